"""Cocycles for continuous one-parameter actions on a vector fiber:
defect measurement, bump-function smoothing, conjugation of continuous
one-parameter subgroups, and a finite smoothness proxy.

A curve alpha with U_t alpha(s) = alpha(t+s) - alpha(t) is smoothed by
averaging against a mass-one bump f: with v = integral of f(s) alpha(s),
the equivalent curve alpha(t) + U_t v - v coincides with the manifestly
smooth integral of (f(s-t) - f(s)) alpha(s).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import lie_core as lc
from .errors import HalfLieError, QuadratureError, WindowTooShortError
from .lie_core import GroupElement
from .semidirect import HalfLiePoint, InstanceDescriptor

QUAD_TOL = 1e-10
_MAX_QUAD_DEPTH = 48


def adaptive_simpson(f, a: float, b: float, tol: float = QUAD_TOL) -> np.ndarray:
    """Adaptive composite Simpson with Richardson correction.

    ``f`` may return scalars or arrays; the error control is on the max
    absolute component.  Raises when the segment stack exceeds the depth
    cap without meeting the local tolerance budget.
    """
    if b <= a:
        raise ValueError("integration bounds must satisfy a < b")
    fa = np.asarray(f(a), dtype=complex)
    fb = np.asarray(f(b), dtype=complex)
    m = 0.5 * (a + b)
    fm = np.asarray(f(m), dtype=complex)

    def simpson(left, right, f_left, f_mid, f_right):
        return (right - left) / 6.0 * (f_left + 4.0 * f_mid + f_right)

    total = np.zeros_like(fa)
    stack = [(a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), 0)]
    span = b - a
    while stack:
        left, right, f_l, f_m, f_r, coarse, depth = stack.pop()
        if depth > _MAX_QUAD_DEPTH:
            raise QuadratureError("adaptive quadrature exceeded its depth cap")
        mid = 0.5 * (left + right)
        lm_ = 0.5 * (left + mid)
        rm = 0.5 * (mid + right)
        f_lm = np.asarray(f(lm_), dtype=complex)
        f_rm = np.asarray(f(rm), dtype=complex)
        s_left = simpson(left, mid, f_l, f_lm, f_m)
        s_right = simpson(mid, right, f_m, f_rm, f_r)
        fine = s_left + s_right
        err = float(np.max(np.abs(fine - coarse))) / 15.0
        budget = tol * max((right - left) / span, 1e-16)
        if err <= budget:
            total = total + fine + (fine - coarse) / 15.0
        else:
            stack.append((left, mid, f_l, f_lm, f_m, s_left, depth + 1))
            stack.append((mid, right, f_m, f_rm, f_r, s_right, depth + 1))
    return total


@dataclass(frozen=True, eq=False)
class BumpFunction:
    """Smooth nonnegative bump on [0, length] with unit mass.

    The standard profile exp(-1/(1-u^2)) is rescaled to the support and
    mass-normalized by quadrature at construction.
    """

    length: float
    eval: Callable[[float], float]

    def __call__(self, t):
        return self.eval(t)

    @property
    def support(self) -> tuple:
        return (0.0, self.length)


def standard_mollifier(length: float = 1.0) -> BumpFunction:
    if length <= 0:
        raise ValueError("support length must be positive")

    def raw(t):
        u = 2.0 * np.asarray(t, dtype=float) / length - 1.0
        inside = np.abs(u) < 1.0
        out = np.zeros_like(u, dtype=float)
        term = np.where(inside, 1.0 - u * u, 1.0)
        out = np.where(inside, np.exp(-1.0 / term), 0.0)
        return out

    mass = float(adaptive_simpson(lambda s: raw(s), 0.0, length, 1e-12).real)

    def eval_scaled(t):
        return raw(t) / mass

    bump = BumpFunction(length, eval_scaled)
    _check_bump(bump)
    return bump


def bump_from_callable(length: float, profile) -> BumpFunction:
    """Wrap an arbitrary smooth profile on [0, length]; normalizes mass."""
    mass = float(adaptive_simpson(lambda s: profile(s), 0.0, length, 1e-12).real)
    if mass <= 0:
        raise ValueError("bump profile must have positive mass")
    bump = BumpFunction(length, lambda t: profile(t) / mass)
    _check_bump(bump)
    return bump


def _check_bump(bump: BumpFunction) -> None:
    mass = float(adaptive_simpson(lambda s: bump(s), 0.0, bump.length, 1e-12).real)
    if abs(mass - 1.0) > 1e-10:
        raise HalfLieError(f"bump mass {mass} is not 1 within 1e-10")
    h = 1e-5 * bump.length
    for endpoint in (0.0, bump.length):
        inner = min(max(endpoint, h), bump.length - h)
        slope = abs(bump(inner) - bump(endpoint)) / h
        if abs(float(bump(endpoint))) > 1e-12 or slope > 1e-6:
            raise HalfLieError("bump must vanish to high order at the support endpoints")


@dataclass(frozen=True, eq=False)
class CocycleCurve:
    """Fiber-valued curve on a declared window with alpha(0) = 0."""

    eval: Callable[[float], np.ndarray]
    window: tuple
    declared_class: str = "general"  # "coboundary" | "general"

    def __post_init__(self):
        lo, hi = self.window
        if not lo <= 0.0 < hi:
            raise ValueError("window must contain 0 with positive right extent")
        start = np.asarray(self.eval(0.0))
        if float(np.max(np.abs(start))) > 1e-12:
            raise ValueError("cocycle curves must vanish at t = 0")

    def __call__(self, t: float) -> np.ndarray:
        return np.asarray(self.eval(t))

    def require_inside(self, *ts) -> None:
        lo, hi = self.window
        for t in ts:
            if not lo <= t <= hi:
                raise WindowTooShortError(
                    f"time {t} outside the declared window [{lo}, {hi}]"
                )


def coboundary_curve(u_apply, v: np.ndarray, window=(0.0, 1.0)) -> CocycleCurve:
    """alpha(t) = U_t v - v."""
    v = np.asarray(v, dtype=complex)
    return CocycleCurve(lambda t: u_apply(t, v) - v, window, "coboundary")


def cocycle_defect(alpha: CocycleCurve, u_apply, s: float, t: float) -> float:
    """|U_t alpha(s) - alpha(t+s) + alpha(t)|."""
    alpha.require_inside(s, t, s + t)
    value = u_apply(t, alpha(s)) - alpha(t + s) + alpha(t)
    return float(np.linalg.norm(value))


def max_cocycle_defect(alpha: CocycleCurve, u_apply, pairs) -> float:
    return max(cocycle_defect(alpha, u_apply, s, t) for s, t in pairs)


def bump_average(alpha: CocycleCurve, bump: BumpFunction, tol: float = QUAD_TOL) -> np.ndarray:
    """v = integral of f(s) alpha(s) over the bump support."""
    alpha.require_inside(*bump.support)
    return adaptive_simpson(lambda s: bump(s) * alpha(s), 0.0, bump.length, tol)


def smooth_equivalent(
    alpha: CocycleCurve,
    u_apply,
    bump: BumpFunction,
    tol: float = QUAD_TOL,
    consistency_times=(0.05, 0.35, 0.6),
) -> CocycleCurve:
    """Equivalent smooth curve beta(t) = integral of (f(s-t) - f(s)) alpha(s).

    beta differs from alpha by the coboundary of v = bump_average(alpha);
    the residual of that identity at a few sample times is recorded on
    the returned curve as ``consistency_residual``.
    """
    lo, hi = alpha.window
    length = bump.length
    out_hi = hi - length
    if out_hi <= 0:
        raise WindowTooShortError(
            "window cannot accommodate the shifted bump support"
        )
    v = bump_average(alpha, bump, tol)
    cache: dict = {}

    def beta(t: float) -> np.ndarray:
        if t not in cache:
            if not 0.0 <= t <= out_hi:
                raise WindowTooShortError(
                    f"time {t} outside the smoothed window [0, {out_hi}]"
                )
            cache[t] = adaptive_simpson(
                lambda s: (bump(s - t) - bump(s)) * alpha(s), 0.0, t + length, tol
            )
        return cache[t]

    result = CocycleCurve(beta, (0.0, out_hi), "general")
    residual = 0.0
    for t in consistency_times:
        if 0.0 <= t <= out_hi:
            direct = alpha(t) + u_apply(t, v) - v
            residual = max(residual, float(np.max(np.abs(beta(t) - direct))))
    object.__setattr__(result, "consistency_residual", residual)
    object.__setattr__(result, "coboundary_vector", v)
    return result


def fit_coboundary(curve, u_apply, ts, dim: int) -> tuple:
    """Least-squares coboundary fit: v minimizing |curve(t) - (U_t v - v)|.

    Returns (v, sup residual over the sample times).
    """
    rows = []
    rhs = []
    eye = np.eye(dim, dtype=complex)
    for t in ts:
        u_mat = np.column_stack([u_apply(t, eye[:, j]) for j in range(dim)])
        rows.append(u_mat - eye)
        rhs.append(np.asarray(curve(t), dtype=complex))
    a = np.vstack(rows)
    b = np.concatenate(rhs)
    v, *_ = np.linalg.lstsq(a, b, rcond=None)
    residual = max(
        float(np.linalg.norm(np.asarray(curve(t)) - (u_apply(t, v) - v))) for t in ts
    )
    return v, residual


@dataclass(frozen=True)
class SmoothnessReport:
    """Nested central-difference disagreement per derivative order."""

    scores: dict
    threshold: float
    base_step: float

    def passes(self, order: int) -> bool:
        return self.scores[order] <= self.threshold


def smoothness_score(
    curve,
    window: tuple,
    base_step: float,
    orders=(1, 2),
    grid_points: int = 33,
    threshold: float = 1e-3,
) -> SmoothnessReport:
    """Numerical smoothness proxy: compare central-difference derivative
    estimates at three nested resolutions; the score per order is the
    max relative disagreement between successive resolutions.

    This is a resolution-dependent proxy for differentiability claims
    that finite data cannot decide; reports should label it as such.
    """
    lo, hi = window
    if hi - lo <= 4 * base_step:
        raise ValueError("window too short for the requested base step")
    ts = np.linspace(lo + 2 * base_step, hi - 2 * base_step, grid_points)
    steps = [base_step, base_step / 2.0, base_step / 4.0]

    def d1(t, h):
        return (np.asarray(curve(t + h)) - np.asarray(curve(t - h))) / (2.0 * h)

    def d2(t, h):
        return (
            np.asarray(curve(t + h)) - 2.0 * np.asarray(curve(t)) + np.asarray(curve(t - h))
        ) / (h * h)

    estimator = {1: d1, 2: d2}
    scores = {}
    for order in orders:
        est = estimator[order]
        levels = []
        for h in steps:
            levels.append(np.array([est(t, h) for t in ts]))
        scale = max(float(np.max(np.abs(levels[-1]))), 1e-12)
        disagreement = max(
            float(np.max(np.abs(levels[i + 1] - levels[i]))) for i in range(len(levels) - 1)
        )
        scores[order] = disagreement / scale
    return SmoothnessReport(scores, threshold, base_step)


@dataclass(frozen=True, eq=False)
class HOneParameter:
    """Continuous one-parameter subgroup of H with abelian vector fiber:
    t -> (fiber(t), exp_G(t x))."""

    instance: InstanceDescriptor
    fiber_eval: Callable[[float], np.ndarray]
    base_generator: lc.AlgebraVector
    window: tuple = (0.0, 1.0)

    def base_at(self, t: float) -> GroupElement:
        return lc.exp(t * self.base_generator)

    def point_at(self, t: float) -> HalfLiePoint:
        return HalfLiePoint(
            GroupElement.of(self.instance.N_spec, self.fiber_eval(t)),
            self.base_at(t),
            self.instance,
        )

    def u_apply(self, t: float, vec: np.ndarray) -> np.ndarray:
        """The fiber action of the base one-parameter subgroup."""
        inst = self.instance
        g = self.base_at(t)
        element = GroupElement.of(inst.N_spec, np.asarray(vec, dtype=inst.N_spec.dtype))
        return inst.action.act(g, element).coords


def conjugate_one_parameter(
    gamma: HOneParameter,
    bump: BumpFunction,
    tol: float = QUAD_TOL,
):
    """Conjugator g = (v, 1_G) moving a continuous one-parameter subgroup
    onto a smooth one: the conjugated fiber is alpha(t) + U_t v - v with
    v the bump average of the fiber cocycle.

    Only abelian (vector) fibers are supported; the construction needs
    the fiber group to be its own algebra.
    """
    inst = gamma.instance
    if inst.N_spec.kind == lc.KIND_MATRIX:
        raise HalfLieError("conjugation smoothing requires an abelian vector fiber")

    alpha = CocycleCurve(gamma.fiber_eval, gamma.window, "general")
    v = bump_average(alpha, bump, tol)

    def smooth_fiber(t: float) -> np.ndarray:
        return alpha(t) + gamma.u_apply(t, v) - v

    conjugator = HalfLiePoint(
        GroupElement.of(inst.N_spec, v), lc.identity(inst.G_spec), inst
    )
    smoothed = HOneParameter(inst, smooth_fiber, gamma.base_generator, gamma.window)
    return conjugator, smoothed
