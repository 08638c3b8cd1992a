"""Product-formula laboratory: strong-Trotter, Trotter-pair, and
commutator sequences with convergence fitting, the sufficient-condition
check for the pairing property, and the quantitative chart bounds the
convergence proof rests on.

Repeated products use binary exponentiation (the factor depends on the
index only through t/n); correctness against the naive loop is covered
in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import lie_core as lc
from .errors import HalfLieError, OutOfChartError, PartialBracketUndefinedError
from .semidirect import (
    HalfLiePoint,
    HalfLieVector,
    InstanceDescriptor,
    exp_h,
    h_bracket,
    h_distance,
    h_multiply,
    h_power,
    identity_point,
)

DEFAULT_INDICES = tuple(2**k for k in range(4, 13))
COMMUTATOR_INDEX_CAP = 2**8


@dataclass(frozen=True, eq=False)
class CurveDescriptor:
    """C^1 curve through the identity of H with its declared derivative.

    ``base_is_one_parameter`` and ``fiber_c1`` carry the declarations the
    pairing-condition check needs; they are statements about the curve,
    not something the finite data could decide.
    """

    instance: InstanceDescriptor
    eval: Callable[[float], HalfLiePoint]
    derivative: HalfLieVector
    base_is_one_parameter: bool = False
    fiber_c1: Optional[bool] = None
    name: str = ""

    def __call__(self, t: float) -> HalfLiePoint:
        return self.eval(t)


def curve_one_parameter(inst: InstanceDescriptor, w: HalfLieVector, tol: float = 1e-10) -> CurveDescriptor:
    """t -> exp_H(t w), cached per evaluation point."""
    cache: dict = {}

    def evaluate(t: float) -> HalfLiePoint:
        if t not in cache:
            cache[t] = exp_h(inst, t * w, tol)
        return cache[t]

    return CurveDescriptor(inst, evaluate, w, True, w.fiber_c1, "one_parameter")


def curve_fiber_linear(inst: InstanceDescriptor, v, fiber_c1=None) -> CurveDescriptor:
    """t -> (exp_N(t v), 1_G)."""
    vv = lc.AlgebraVector.of(inst.N_spec, v)

    def evaluate(t: float) -> HalfLiePoint:
        return HalfLiePoint(lc.exp(t * vv), lc.identity(inst.G_spec), inst)

    w = HalfLieVector(vv, lc.zero_vector(inst.G_spec), inst, fiber_c1)
    return CurveDescriptor(inst, evaluate, w, True, fiber_c1, "fiber_linear")


def curve_base_linear(inst: InstanceDescriptor, x) -> CurveDescriptor:
    """t -> (1_N, exp_G(t x))."""
    xx = lc.AlgebraVector.of(inst.G_spec, x)

    def evaluate(t: float) -> HalfLiePoint:
        return HalfLiePoint(lc.identity(inst.N_spec), lc.exp(t * xx), inst)

    w = HalfLieVector(lc.zero_vector(inst.N_spec), xx, inst, True)
    return CurveDescriptor(inst, evaluate, w, True, True, "base_linear")


def curve_sin_fiber_linear_base(inst: InstanceDescriptor, v, x, fiber_c1=None) -> CurveDescriptor:
    """t -> (exp_N(sin(t) v), exp_G(t x)): C^1 but not a one-parameter group."""
    vv = lc.AlgebraVector.of(inst.N_spec, v)
    xx = lc.AlgebraVector.of(inst.G_spec, x)

    def evaluate(t: float) -> HalfLiePoint:
        return HalfLiePoint(lc.exp(np.sin(t) * vv), lc.exp(t * xx), inst)

    w = HalfLieVector(vv, xx, inst, fiber_c1)
    return CurveDescriptor(inst, evaluate, w, True, fiber_c1, "sin_fiber_linear_base")


def curve_fiber_quadratic(inst: InstanceDescriptor, v) -> CurveDescriptor:
    """t -> (exp_N(t^2 v), 1_G): derivative zero at the identity."""
    vv = lc.AlgebraVector.of(inst.N_spec, v)

    def evaluate(t: float) -> HalfLiePoint:
        return HalfLiePoint(lc.exp(t * t * vv), lc.identity(inst.G_spec), inst)

    w = HalfLieVector(lc.zero_vector(inst.N_spec), lc.zero_vector(inst.G_spec), inst, True)
    return CurveDescriptor(inst, evaluate, w, True, True, "fiber_quadratic")


@dataclass(frozen=True)
class ConvergenceReport:
    """Distances of the n-indexed products to their target, with a
    tail-half log-log decay fit and a verdict against a declared
    tolerance."""

    indices: tuple
    errors: tuple
    fitted_exponent: float
    target: HalfLiePoint
    verdict: str  # "converging" | "stalled" | "diverging"
    tolerance: float
    chart_escapes: int = 0


def _fit_decay_exponent(indices, errors) -> float:
    """Least-squares slope of log error against log n over the tail half."""
    pairs = [
        (n, e)
        for n, e in zip(indices, errors)
        if math.isfinite(e) and e > 0.0
    ]
    if len(pairs) < 2:
        return 0.0
    tail = pairs[len(pairs) // 2 :]
    if len(tail) < 2:
        tail = pairs[-2:]
    xs = np.log([n for n, _ in tail])
    ys = np.log([e for _, e in tail])
    slope = float(np.polyfit(xs, ys, 1)[0])
    return -slope


def _verdict(errors, tolerance: float) -> str:
    finite = [e for e in errors if math.isfinite(e)]
    if not finite or not math.isfinite(errors[-1]):
        return "diverging"
    first, last = errors[0], errors[-1]
    if last < first / 4 and last < tolerance:
        return "converging"
    if last > 2 * first and last > tolerance:
        return "diverging"
    return "stalled"


def _product_report(
    inst: InstanceDescriptor,
    factor_at,
    power_at,
    target: HalfLiePoint,
    indices,
    tolerance: float,
) -> ConvergenceReport:
    indices = tuple(int(n) for n in indices)
    if not indices or any(b <= a for a, b in zip(indices, indices[1:])):
        raise ValueError("indices must be nonempty and strictly increasing")
    errors = []
    escapes = 0
    for n in indices:
        product = h_power(factor_at(n), power_at(n))
        try:
            errors.append(h_distance(product, target))
        except OutOfChartError:
            errors.append(math.inf)
            escapes += 1
    return ConvergenceReport(
        indices,
        tuple(errors),
        _fit_decay_exponent(indices, errors),
        target,
        _verdict(errors, tolerance),
        tolerance,
        escapes,
    )


def _require_identity_start(curve: CurveDescriptor) -> None:
    start = curve(0.0)
    residual = float(
        np.linalg.norm(start.n.coords - lc.identity(curve.instance.N_spec).coords)
        + np.linalg.norm(start.g.coords - lc.identity(curve.instance.G_spec).coords)
    )
    if residual > 1e-12:
        raise HalfLieError("curve does not start at the identity")


def strong_trotter_sequence(
    zeta: CurveDescriptor,
    t: float,
    indices=DEFAULT_INDICES,
    tolerance: float = 1e-6,
    exp_tol: float = 1e-10,
) -> ConvergenceReport:
    """zeta(t/n)^n against exp_H(t zeta'(0))."""
    _require_identity_start(zeta)
    inst = zeta.instance
    target = exp_h(inst, t * zeta.derivative, exp_tol)
    return _product_report(
        inst, lambda n: zeta(t / n), lambda n: n, target, indices, tolerance
    )


def trotter_pair_sequence(
    gamma1: CurveDescriptor,
    gamma2: CurveDescriptor,
    t: float,
    indices=DEFAULT_INDICES,
    tolerance: float = 1e-6,
    exp_tol: float = 1e-10,
) -> ConvergenceReport:
    """(gamma1(t/n) gamma2(t/n))^n against exp_H(t (sum of derivatives))."""
    _require_identity_start(gamma1)
    _require_identity_start(gamma2)
    inst = gamma1.instance
    target = exp_h(inst, t * (gamma1.derivative + gamma2.derivative), exp_tol)
    return _product_report(
        inst,
        lambda n: h_multiply(gamma1(t / n), gamma2(t / n)),
        lambda n: n,
        target,
        indices,
        tolerance,
    )


@dataclass(frozen=True)
class CommutatorRawSequence:
    """Commutator products without a target: the regime where the bracket
    of the declared derivatives is undefined."""

    indices: tuple
    endpoints: tuple
    fiber_norms: tuple


def commutator_sequence(
    gamma1: CurveDescriptor,
    gamma2: CurveDescriptor,
    t: float,
    indices=None,
    tolerance: float = 1e-6,
    exp_tol: float = 1e-10,
):
    """n^2-fold products of the group commutator at sqrt(t)/n.

    When the partial bracket of the declared derivatives exists the
    report compares against exp_H(t [w1, w2]); otherwise the raw product
    sequence comes back (that failure regime is itself the content).
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    _require_identity_start(gamma1)
    _require_identity_start(gamma2)
    inst = gamma1.instance
    if indices is None:
        indices = tuple(n for n in DEFAULT_INDICES if n <= COMMUTATOR_INDEX_CAP)
    s_of = lambda n: math.sqrt(t) / n

    def factor(n: int) -> HalfLiePoint:
        s = s_of(n)
        return h_multiply(
            h_multiply(gamma1(s), gamma2(s)),
            h_multiply(gamma1(-s), gamma2(-s)),
        )

    try:
        bracket = h_bracket(inst, gamma1.derivative, gamma2.derivative)
    except PartialBracketUndefinedError:
        points = tuple(h_power(factor(n), n * n) for n in indices)
        norms = tuple(float(np.linalg.norm(p.n.coords)) for p in points)
        return CommutatorRawSequence(tuple(int(n) for n in indices), points, norms)

    target = exp_h(inst, t * bracket, exp_tol)
    return _product_report(inst, factor, lambda n: n * n, target, indices, tolerance)


def star_condition_check(gamma1: CurveDescriptor, gamma2: CurveDescriptor) -> str:
    """Which sufficient condition (if any) certifies the pairing property.

    One-directional by design: 'unknown' never claims failure.
    """
    if gamma1.base_is_one_parameter:
        return "holds_via_1"
    if gamma2.fiber_c1:
        return "holds_via_2"
    return "unknown"


# ---------------------------------------------------------------------------
# quantitative bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundClaimReport:
    claim: str
    samples: int
    max_slack: float  # max over samples of (lhs - rhs); <= 0 means no violation
    violations: int
    discarded: int = 0


def bound_suite(
    group: lc.LieGroupSpec,
    sample_count: int = 10_000,
    radius: float = 0.2,
    seed: int = 0,
    slack: float = 1e-9,
) -> list:
    """Sampled checks of the chart-product and adjoint-growth bounds.

    Pairs are drawn with norms at most ``radius``; the chart-product
    bound uses C = 2/radius^2 (the Taylor remainder constant).  Samples
    whose chart product escapes are discarded and counted.
    """
    rng = np.random.default_rng(seed)
    c_const = 2.0 / radius**2
    worst11 = -math.inf
    worst14 = -math.inf
    bad11 = 0
    bad14 = 0
    discarded = 0
    kept = 0
    for _ in range(sample_count):
        x = lc.random_algebra(group, rng, radius)
        y = lc.random_algebra(group, rng, radius)
        try:
            prod = lc.local_multiply(x, y)
        except OutOfChartError:
            discarded += 1
            continue
        kept += 1
        lhs11 = lc.algebra_norm(prod)
        rhs11 = lc.algebra_norm(x + y) + c_const * (x.norm**2 + y.norm**2) / 2.0
        worst11 = max(worst11, lhs11 - rhs11)
        if lhs11 - rhs11 > slack:
            bad11 += 1

        lhs14 = lc.algebra_norm(lc.exp_ad(x, y))
        rhs14 = math.exp(x.norm) * y.norm
        worst14 = max(worst14, lhs14 - rhs14)
        if lhs14 - rhs14 > slack:
            bad14 += 1
    return [
        BoundClaimReport("chart_product", kept, worst11, bad11, discarded),
        BoundClaimReport("adjoint_growth", kept, worst14, bad14, discarded),
    ]


@dataclass(frozen=True)
class ANIdentityReport:
    """Doubling identity and bound chain for a_n(rho) = ((C rho + 1)^n - 1)/C."""

    c_const: float
    rho: float
    n_max: int
    doubling_max_residual: float
    doubling_checked: int
    chain_values: tuple  # a_{2^k}(rho / 2^k) for 2^k <= n_max
    chain_bound: float  # (e^{C rho} - 1)/C
    chain_ok: bool
    chain_monotone: bool


def a_n(c_const: float, rho: float, n: int) -> float:
    return ((c_const * rho + 1.0) ** n - 1.0) / c_const


def an_identities(c_const: float, rho: float, n_max: int) -> ANIdentityReport:
    """Verify a_{2n} = 2 a_n + C a_n^2 and a_n(rho/n) <= (e^{C rho}-1)/C.

    The doubling identity is checked wherever (C rho + 1)^{2n} stays in
    float range (it is exact algebra); the rescaled chain values are
    bounded and checked for every power of two up to ``n_max``.
    """
    if c_const <= 0 or rho <= 0 or n_max < 1:
        raise ValueError("inputs must be positive")
    worst = 0.0
    checked = 0
    n = 1
    while 2 * n <= n_max:
        base = c_const * rho + 1.0
        if 2 * n * math.log(base) < 700.0:  # stay inside float range
            lhs = a_n(c_const, rho, 2 * n)
            an = a_n(c_const, rho, n)
            rhs = 2.0 * an + c_const * an * an
            worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
            checked += 1
        n *= 2

    bound = (math.exp(c_const * rho) - 1.0) / c_const
    chain = []
    k = 1
    while k <= n_max:
        chain.append(a_n(c_const, rho / k, k))
        k *= 2
    chain_ok = all(v <= bound * (1.0 + 1e-12) for v in chain)
    chain_monotone = all(b >= a - 1e-12 for a, b in zip(chain, chain[1:]))
    return ANIdentityReport(
        c_const,
        rho,
        n_max,
        worst,
        checked,
        tuple(chain),
        bound,
        chain_ok,
        chain_monotone,
    )
