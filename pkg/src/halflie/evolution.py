"""Evolution operator for a single group: ordered exponentials of step
controls, dyadic refinement for sampled controls, and the inverse
operation (left logarithmic derivative).

For a step control the flow is the exact ordered product of piece
exponentials; partial values are always evolved from stored prefix
products, never interpolated in the group.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lie_core as lc
from .errors import ConvergenceFailureError, HalfLieError
from .lie_core import AlgebraVector, GroupElement, LieGroupSpec
from .regulated import (
    RegulatedPath,
    make_step,
    merge_breakpoints,
    refine_partition,
    sample_on_partition,
)

MAX_REFINEMENT_DEPTH = 20
_PIECE_CAP = 2**20


@dataclass(frozen=True, eq=False)
class EvolutionResult:
    """Flow of one control: prefix products at the control's breakpoints.

    ``prefix[j]`` is the flow value at ``control.breakpoints[j]`` (so
    ``prefix[0]`` is the identity and ``prefix[-1]`` the endpoint).
    """

    group: LieGroupSpec
    control: RegulatedPath
    prefix: np.ndarray
    refinement_depth: int = 0
    error_estimate: float = 0.0
    check_residual: float | None = None

    @property
    def endpoint(self) -> GroupElement:
        return GroupElement(self.prefix[-1], self.group)

    @property
    def checkpoints(self) -> list:
        return [
            (float(t), GroupElement(self.prefix[j], self.group))
            for j, t in enumerate(self.control.breakpoints)
        ]

    def at(self, t: float) -> GroupElement:
        return GroupElement(self.at_many(np.array([t]))[0], self.group)

    def at_many(self, ts) -> np.ndarray:
        """Flow values at arbitrary times, by evolving partial pieces."""
        ts = np.asarray(ts, dtype=float)
        bp = self.control.breakpoints
        idx = np.clip(np.searchsorted(bp, ts, side="right") - 1, 0, self.control.pieces - 1)
        rest = (ts - bp[idx])
        partial = self.control.values[idx] * rest.reshape((-1,) + (1,) * len(self.group.coord_shape))
        if self.group.kind == lc.KIND_MATRIX:
            return self.prefix[idx] @ lc.exp_many(self.group, partial)
        return self.prefix[idx] + partial


def evol_step(group: LieGroupSpec, control: RegulatedPath) -> EvolutionResult:
    """Exact flow of a step control: the ordered product of exponentials."""
    if control.group != group:
        raise HalfLieError("control does not live on the algebra of this group")
    widths = control.widths.reshape((-1,) + (1,) * len(group.coord_shape))
    factors = lc.exp_many(group, widths * control.values)
    prefix = lc.multiply_prefix(group, factors)
    prefix.setflags(write=False)
    return EvolutionResult(group, control, prefix, 0, float(control.approx_error))


def evolve(
    group: LieGroupSpec,
    control,
    tol: float = 1e-10,
    base_partition=None,
    sample_times=(),
    max_depth: int = MAX_REFINEMENT_DEPTH,
) -> EvolutionResult:
    """Flow of a step path or a continuous-curve callback.

    Exact step inputs evolve directly.  Callbacks are midpoint-sampled on
    dyadically refined partitions until two successive endpoints differ
    by less than ``tol`` in the group metric; the last difference is
    recorded as the error estimate.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if isinstance(control, RegulatedPath):
        return evol_step(group, control)

    base = np.asarray(base_partition if base_partition is not None else [0.0, 1.0], dtype=float)
    if len(sample_times):
        base = merge_breakpoints(base, np.asarray(sample_times, dtype=float))

    previous = None
    last_two = []
    for depth in range(max_depth + 1):
        per_piece = 2**depth
        if per_piece * (len(base) - 1) > _PIECE_CAP:
            break
        partition = refine_partition(base, per_piece) if per_piece > 1 else base
        result = evol_step(group, sample_on_partition(group, control, partition))
        last_two = (last_two + [result])[-2:]
        if previous is not None:
            diff = lc.group_distance(result.endpoint, previous.endpoint)
            if diff < tol:
                return EvolutionResult(
                    group,
                    result.control,
                    result.prefix,
                    depth,
                    diff,
                )
        previous = result
    raise ConvergenceFailureError(
        f"evolution did not converge to {tol:g} within depth {max_depth}",
        last_iterates=last_two,
    )


def log_derivative(path: EvolutionResult) -> RegulatedPath:
    """Left logarithmic derivative: the step control that regenerates ``path``.

    Each piece value is recovered from consecutive checkpoints via the
    local logarithm, so this genuinely inverts the flow rather than
    echoing stored data.
    """
    if not isinstance(path, EvolutionResult):
        raise HalfLieError(
            "path is not in ordered-exponential form (expected an EvolutionResult)"
        )
    group = path.group
    bp = path.control.breakpoints
    widths = np.diff(bp)
    values = []
    for j in range(len(widths)):
        a = GroupElement(path.prefix[j], group)
        b = GroupElement(path.prefix[j + 1], group)
        jump = lc.log_local(lc.multiply(lc.inverse(a), b))
        values.append(jump.coords / widths[j])
    return make_step(group, np.array(bp), values)


@dataclass(frozen=True)
class Morphism:
    """Smooth homomorphism descriptor: the group map and its derivative."""

    domain: LieGroupSpec
    codomain: LieGroupSpec
    on_group: object
    on_algebra: object
    name: str = ""


def identity_morphism(group: LieGroupSpec) -> Morphism:
    return Morphism(group, group, lambda g: g, lambda v: v, "id")


def inner_morphism(h: GroupElement) -> Morphism:
    """Conjugation by a fixed element; derivative is Ad(h)."""
    h_inv = lc.inverse(h)
    return Morphism(
        h.group,
        h.group,
        lambda g: lc.multiply(lc.multiply(h, g), h_inv),
        lambda v: lc.adjoint(h, v),
        "inner",
    )


def log_det_morphism(n: int, injectivity_radius: float = 0.5) -> Morphism:
    """GL(n) -> scalar line by log(det); derivative is the trace."""
    domain = lc.matrix_group(n, injectivity_radius)
    line = lc.scalar_line()
    return Morphism(
        domain,
        line,
        lambda g: GroupElement.of(line, [np.log(np.linalg.det(g.coords))]),
        lambda v: AlgebraVector.of(line, [np.trace(v.coords)]),
        "log_det",
    )


def pushforward_evol(morphism: Morphism, control: RegulatedPath) -> EvolutionResult:
    """Flow of the pushed-forward control, cross-checked against the
    image of the original flow at every breakpoint.

    The naturality residual (max distance between the two routes) is
    recorded on the returned result.
    """
    pushed_values = [morphism.on_algebra(control.value(j)) for j in range(control.pieces)]
    pushed = make_step(
        morphism.codomain, np.array(control.breakpoints), pushed_values, control.approx_error
    )
    rhs = evol_step(morphism.codomain, pushed)

    lhs = evol_step(morphism.domain, control)
    residual = 0.0
    for j in range(len(control.breakpoints)):
        image = morphism.on_group(GroupElement(lhs.prefix[j], morphism.domain))
        residual = max(
            residual,
            lc.group_distance(image, GroupElement(rhs.prefix[j], morphism.codomain)),
        )
    return EvolutionResult(
        rhs.group, rhs.control, rhs.prefix, rhs.refinement_depth, rhs.error_estimate, residual
    )
