"""Half-Lie groups H = N x| G: group law, twisted controls, factorized
evolution and exponential, the partial bracket, and smooth-vector
diagnostics.

The fiber evolution of a pair of controls (alpha, beta) is driven by the
twisted control t -> pidot(g(t)) alpha(t), where g is the base flow of
beta; the base component of the joint flow is that base flow itself,
shared as the same object.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import lie_core as lc
from .errors import (
    HalfLieError,
    NotDifferentiableError,
    PartialBracketUndefinedError,
    SpecMismatchError,
)
from .evolution import MAX_REFINEMENT_DEPTH, EvolutionResult, evol_step, evolve
from .lie_core import AlgebraVector, GroupElement, LieGroupSpec
from .regulated import RegulatedPath, constant_path, map_pointwise
from .errors import ConvergenceFailureError


@dataclass(frozen=True, eq=False)
class ActionSpec:
    """Automorphic action of G on N together with its linearizations.

    ``act(g, n)`` is the action itself.  ``derived_act(g, v)`` is the
    induced map on the fiber algebra (computed through the exponential
    chart when no closed form is registered).  ``generator(x, v)`` is
    the derivative of the derived action in the group direction, when
    the instance has one in closed form.  ``derived_act_many`` is an
    optional vectorized evaluator over stacked base coordinates and
    fiber values, used by the evolution hot loops.
    """

    act: Callable[[GroupElement, GroupElement], GroupElement]
    derived_act: Optional[Callable[[GroupElement, AlgebraVector], AlgebraVector]] = None
    derived_act_many: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    generator: Optional[Callable[[AlgebraVector, AlgebraVector], AlgebraVector]] = None


@dataclass(frozen=True, eq=False)
class InstanceDescriptor:
    """A concrete half-Lie group: fiber and base specs plus the action.

    Construction probes the action laws (identity, homomorphism,
    naturality through the chart, homomorphism of the derived action) on
    a handful of seeded samples and stores the worst residual.
    """

    name: str
    params: dict
    N_spec: LieGroupSpec
    G_spec: LieGroupSpec
    action: ActionSpec
    c1_criterion: Optional[Callable[[AlgebraVector], float]] = None
    c1_description: str = ""
    closed_forms: dict = field(default_factory=dict)
    probe_residual: float = field(default=0.0, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "probe_residual", _probe_action(self))


_PROBE_TOL = 1e-9


def _probe_action(inst: InstanceDescriptor) -> float:
    rng = np.random.default_rng(20240901)
    worst = 0.0
    for _ in range(6):
        x_g = lc.random_algebra(inst.G_spec, rng, 0.4)
        y_g = lc.random_algebra(inst.G_spec, rng, 0.4)
        g1, g2 = lc.exp(x_g), lc.exp(y_g)
        v = lc.random_algebra(inst.N_spec, rng, 0.1)
        n = lc.exp(v)

        ident = inst.action.act(lc.identity(inst.G_spec), n)
        worst = max(worst, lc.group_distance(ident, n))

        lhs = inst.action.act(lc.multiply(g1, g2), n)
        rhs = inst.action.act(g1, inst.action.act(g2, n))
        worst = max(worst, lc.group_distance(lhs, rhs))

        tv = derived_action(inst, g1, v)
        worst = max(
            worst, lc.group_distance(inst.action.act(g1, lc.exp(v)), lc.exp(tv))
        )

        hom_l = derived_action(inst, lc.multiply(g1, g2), v)
        hom_r = derived_action(inst, g1, derived_action(inst, g2, v))
        worst = max(worst, lc.algebra_norm(hom_l - hom_r))

        if inst.action.derived_act_many is not None:
            batch = inst.action.derived_act_many(
                g1.coords[np.newaxis], v.coords[np.newaxis]
            )[0]
            worst = max(
                worst,
                float(lc.algebra_norms(inst.N_spec, (batch - tv.coords)[np.newaxis])[0]),
            )
    if worst > _PROBE_TOL:
        raise HalfLieError(
            f"action probes for instance {inst.name!r} failed: residual {worst:.3g}"
        )
    return worst


def _same_instance(a, b) -> None:
    ia, ib = a.instance, b.instance
    if ia is ib:
        return
    if ia.name == ib.name and ia.params == ib.params and ia.N_spec == ib.N_spec and ia.G_spec == ib.G_spec:
        return
    raise SpecMismatchError(f"points live on different instances: {ia.name} vs {ib.name}")


@dataclass(frozen=True, eq=False)
class HalfLiePoint:
    """Point (n, g) of N x| G."""

    n: GroupElement
    g: GroupElement
    instance: InstanceDescriptor


@dataclass(frozen=True, eq=False)
class HalfLieVector:
    """Tangent vector (v, x) at the identity of N x| G.

    ``fiber_c1`` optionally declares whether the fiber part counts as a
    C^1 vector for the action; ``False`` makes the partial bracket refuse.
    """

    v: AlgebraVector
    x: AlgebraVector
    instance: InstanceDescriptor
    fiber_c1: Optional[bool] = None

    def __mul__(self, scalar) -> "HalfLieVector":
        return HalfLieVector(self.v * scalar, self.x * scalar, self.instance, self.fiber_c1)

    __rmul__ = __mul__

    def __add__(self, other: "HalfLieVector") -> "HalfLieVector":
        _same_instance(self, other)
        return HalfLieVector(self.v + other.v, self.x + other.x, self.instance)


def point(inst: InstanceDescriptor, n_coords, g_coords) -> HalfLiePoint:
    return HalfLiePoint(
        GroupElement.of(inst.N_spec, n_coords),
        GroupElement.of(inst.G_spec, g_coords),
        inst,
    )


def vector(inst: InstanceDescriptor, v_coords, x_coords, fiber_c1=None) -> HalfLieVector:
    return HalfLieVector(
        AlgebraVector.of(inst.N_spec, v_coords),
        AlgebraVector.of(inst.G_spec, x_coords),
        inst,
        fiber_c1,
    )


def identity_point(inst: InstanceDescriptor) -> HalfLiePoint:
    return HalfLiePoint(lc.identity(inst.N_spec), lc.identity(inst.G_spec), inst)


def h_multiply(a: HalfLiePoint, b: HalfLiePoint) -> HalfLiePoint:
    """Semidirect product (n1, g1)(n2, g2) = (n1 . pi(g1) n2, g1 g2)."""
    _same_instance(a, b)
    inst = a.instance
    return HalfLiePoint(
        lc.multiply(a.n, inst.action.act(a.g, b.n)),
        lc.multiply(a.g, b.g),
        inst,
    )


def h_inverse(a: HalfLiePoint) -> HalfLiePoint:
    """(n, g)^-1 = (pi(g^-1) n^-1, g^-1)."""
    inst = a.instance
    g_inv = lc.inverse(a.g)
    return HalfLiePoint(inst.action.act(g_inv, lc.inverse(a.n)), g_inv, inst)


def h_power(a: HalfLiePoint, k: int) -> HalfLiePoint:
    """a^k by binary exponentiation (k >= 0)."""
    if k < 0:
        return h_power(h_inverse(a), -k)
    result = identity_point(a.instance)
    base = a
    while k:
        if k & 1:
            result = h_multiply(result, base)
        base = h_multiply(base, base)
        k >>= 1
    return result


def h_distance(a: HalfLiePoint, b: HalfLiePoint) -> float:
    """Fiber norm after left-translating to the identity, plus base metric.

    Raises OutOfChartError when the fiber comparison leaves the chart.
    """
    _same_instance(a, b)
    fiber = lc.algebra_norm(lc.log_local(lc.multiply(lc.inverse(a.n), b.n)))
    if a.g.group.kind == lc.KIND_MATRIX:
        base = lc.algebra_norm(lc.log_local(lc.multiply(lc.inverse(a.g), b.g)))
    else:
        base = lc.group_distance(a.g, b.g)
    return fiber + base


def derived_action(inst: InstanceDescriptor, g: GroupElement, v: AlgebraVector) -> AlgebraVector:
    """pidot(g) v: closed form if registered, else through the chart.

    The chart route computes log(pi(g) exp(v)) and raises rather than
    extrapolate when the image leaves the chart.
    """
    if inst.action.derived_act is not None:
        return inst.action.derived_act(g, v)
    return lc.log_local(inst.action.act(g, lc.exp(v)))


def twisted_control(
    inst: InstanceDescriptor,
    alpha: RegulatedPath,
    beta,
    refine: int = 1,
    g_flow: EvolutionResult | None = None,
    tol: float = 1e-10,
) -> RegulatedPath:
    """Step approximation of t -> pidot(g(t)) alpha(t), g = base flow of beta."""
    if alpha.group != inst.N_spec:
        raise SpecMismatchError("alpha must take values in the fiber algebra")
    if g_flow is None:
        g_flow = evolve(inst.G_spec, beta, tol)

    f_many = None
    if inst.action.derived_act_many is not None:
        act_many = inst.action.derived_act_many

        def f_many(ts, stack):
            return act_many(g_flow.at_many(ts), stack)

    return map_pointwise(
        lambda t: g_flow.at(t),
        alpha,
        lambda g_el, v: derived_action(inst, g_el, v),
        out_group=inst.N_spec,
        f_many=f_many,
        refine=refine,
    )


@dataclass(frozen=True, eq=False)
class HEvolutionResult:
    """Joint flow on H: fiber flow of the twisted control plus the base
    flow of beta (the base component is literally the shared base-flow
    object, not a recomputation)."""

    instance: InstanceDescriptor
    n_flow: EvolutionResult
    g_flow: EvolutionResult
    refinement_depth: int
    error_estimate: float

    @property
    def endpoint(self) -> HalfLiePoint:
        return HalfLiePoint(self.n_flow.endpoint, self.g_flow.endpoint, self.instance)

    def at(self, t: float) -> HalfLiePoint:
        return HalfLiePoint(self.n_flow.at(t), self.g_flow.at(t), self.instance)


def evol_h(
    inst: InstanceDescriptor,
    alpha: RegulatedPath,
    beta: RegulatedPath,
    tol: float = 1e-8,
    max_depth: int = MAX_REFINEMENT_DEPTH,
) -> HEvolutionResult:
    """Evolution of the control pair: (Evol_N(twisted control), Evol_G(beta)).

    The twisted control is refined dyadically within alpha's pieces until
    two successive fiber endpoints are closer than ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    g_flow = evolve(inst.G_spec, beta, tol)

    previous = None
    last_two = []
    for depth in range(max_depth + 1):
        ctrl = twisted_control(inst, alpha, beta, refine=2**depth, g_flow=g_flow)
        result = evol_step(inst.N_spec, ctrl)
        last_two = (last_two + [result])[-2:]
        if previous is not None:
            diff = lc.group_distance(result.endpoint, previous.endpoint)
            if diff < tol:
                return HEvolutionResult(inst, result, g_flow, depth, diff)
        previous = result
    raise ConvergenceFailureError(
        f"fiber evolution did not converge to {tol:g} within depth {max_depth}",
        last_iterates=last_two,
    )


def exp_h(
    inst: InstanceDescriptor,
    w: HalfLieVector,
    tol: float = 1e-8,
    with_flow: bool = False,
):
    """exp_H(v, x): endpoint of the constant-control evolution.

    The fiber part integrates t -> pidot(exp_G(t x)) v; the base part is
    exp_G(x).  With ``with_flow`` the full path comes back too.
    """
    alpha = constant_path(inst.N_spec, w.v)
    beta = constant_path(inst.G_spec, w.x)
    flow = evol_h(inst, alpha, beta, tol)
    if with_flow:
        return flow.endpoint, flow
    return flow.endpoint


def d_derived_action(
    inst: InstanceDescriptor,
    x: AlgebraVector,
    v: AlgebraVector,
    h0: float = 1e-3,
    tol: float = 1e-6,
) -> AlgebraVector:
    """Generator of the derived action: d/dt pidot(exp_G(t x)) v at t = 0.

    Uses the instance's closed form when present, otherwise Richardson-
    checked central differences (raising when they fail to settle).
    """
    if inst.action.generator is not None:
        return inst.action.generator(x, v)

    def central(h: float) -> np.ndarray:
        plus = derived_action(inst, lc.exp(h * x), v)
        minus = derived_action(inst, lc.exp((-h) * x), v)
        return (plus.coords - minus.coords) / (2.0 * h)

    d1, d2, d3 = central(h0), central(h0 / 2), central(h0 / 4)
    r1 = (4.0 * d2 - d1) / 3.0
    r2 = (4.0 * d3 - d2) / 3.0
    scale = max(float(lc.algebra_norms(inst.N_spec, r2[np.newaxis])[0]), 1.0)
    if float(lc.algebra_norms(inst.N_spec, (r2 - r1)[np.newaxis])[0]) > tol * scale:
        raise NotDifferentiableError(
            "central differences of the derived action did not converge"
        )
    return AlgebraVector.of(inst.N_spec, r2)


def h_bracket(inst: InstanceDescriptor, w1: HalfLieVector, w2: HalfLieVector) -> HalfLieVector:
    """Partial bracket ([v1,v2] + D(x1)v2 - D(x2)v1, [x1,x2]).

    Defined only when both fiber parts admit the generator; data flagged
    outside the C^1 class is refused (that refusal is the point).
    """
    for w in (w1, w2):
        if w.fiber_c1 is False:
            raise PartialBracketUndefinedError(
                "fiber vector declared outside the C^1 class; bracket undefined"
            )
        if inst.action.generator is None and w.fiber_c1 is not True:
            raise PartialBracketUndefinedError(
                "no closed-form generator and fiber vector not flagged C^1"
            )
    fiber = (
        lc.bracket_ad(w1.v, w2.v)
        + d_derived_action(inst, w1.x, w2.v)
        - d_derived_action(inst, w2.x, w1.v)
    )
    return HalfLieVector(fiber, lc.bracket_ad(w1.x, w2.x), inst)


def seminorm_pk(
    inst: InstanceDescriptor,
    v: AlgebraVector,
    k: int,
    samples: int = 10_000,
    seed: int = 0,
) -> float:
    """Smooth-vector seminorm p_k(v) = sup |D(x1)...D(xk) v| over unit balls.

    Exact for a one-dimensional base (the sup is attained at |x| = 1);
    otherwise a sphere-sampled lower bound over ``samples`` draws.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    if inst.action.generator is None:
        raise HalfLieError("instance has no closed-form generator")
    if inst.G_spec.dimension == 1:
        unit = AlgebraVector.of(inst.G_spec, np.ones(1))
        u = v
        for _ in range(k):
            u = inst.action.generator(unit, u)
        return lc.algebra_norm(u)

    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(samples):
        u = v
        for _ in range(k):
            x = lc.random_algebra(inst.G_spec, rng, 1.0)
            x = x * (1.0 / max(x.norm, 1e-300))
            u = inst.action.generator(x, u)
        best = max(best, lc.algebra_norm(u))
    return best


@dataclass(frozen=True)
class CkVerdict:
    """Outcome of the truncation-ladder diagnostic."""

    kind: str  # "bounded" | "diverging"
    exponent: float
    d_values: tuple
    pk_values: tuple


def ck_vector_diagnostic(ladder, k: int, bounded_slope: float = 0.05) -> CkVerdict:
    """Fit the growth of p_k along a truncation ladder.

    ``ladder`` is a sequence of (instance, fiber vector) pairs of
    increasing truncation dimension (at least 4 levels).  The verdict is
    ``bounded`` when the log-log slope stays below ``bounded_slope``,
    else ``diverging`` with the fitted exponent.
    """
    entries = list(ladder)
    if len(entries) < 4:
        raise ValueError("ladder needs at least 4 truncation levels")
    ds = np.array([inst.N_spec.size for inst, _ in entries], dtype=float)
    pks = np.array([seminorm_pk(inst, v, k) for inst, v in entries])
    if pks.max() == 0.0:
        return CkVerdict("bounded", 0.0, tuple(ds), tuple(pks))
    slope = float(np.polyfit(np.log(ds), np.log(np.maximum(pks, 1e-300)), 1)[0])
    kind = "bounded" if slope < bounded_slope else "diverging"
    return CkVerdict(kind, slope, tuple(ds), tuple(pks))
