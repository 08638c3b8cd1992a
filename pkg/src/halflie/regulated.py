"""Exact step-function calculus on the unit interval.

A step path stores its breakpoints and one algebra value per open
interval (right-continuous representative; breakpoint values never enter
integrals).  Paths produced by sampling a continuous curve carry a
measured uniform-approximation error instead of pretending to be exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SpecMismatchError
from .lie_core import AlgebraVector, LieGroupSpec, algebra_norms

_SNAP = 1e-14


@dataclass(frozen=True, eq=False)
class RegulatedPath:
    """Step function on [0, 1] with values in the algebra of ``group``.

    ``values`` is stacked along the leading axis (one row per interval);
    ``approx_error`` is zero for exact step data and a measured sup-norm
    bound when the path stands in for a continuous curve.
    """

    group: LieGroupSpec
    breakpoints: np.ndarray
    values: np.ndarray
    approx_error: float = 0.0

    @property
    def pieces(self) -> int:
        return len(self.values)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def value(self, index: int) -> AlgebraVector:
        return AlgebraVector(self.values[index], self.group)

    def piece_index(self, t: float) -> int:
        """Index of the (right-continuous) piece containing t."""
        idx = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return min(max(idx, 0), self.pieces - 1)

    def piece_indices(self, ts: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.breakpoints, ts, side="right") - 1
        return np.clip(idx, 0, self.pieces - 1)

    def at(self, t: float) -> AlgebraVector:
        return self.value(self.piece_index(t))

    def at_many(self, ts: np.ndarray) -> np.ndarray:
        return self.values[self.piece_indices(np.asarray(ts, dtype=float))]

    def __call__(self, t: float) -> AlgebraVector:
        return self.at(t)


def make_step(group: LieGroupSpec, breakpoints, values, approx_error: float = 0.0) -> RegulatedPath:
    """Exact step path; validates the partition and value shapes."""
    bp = np.array(breakpoints, dtype=float)
    if bp.ndim != 1 or len(bp) < 2:
        raise ValueError("breakpoints must be a 1-d sequence with at least 2 entries")
    if abs(bp[0]) <= _SNAP:
        bp[0] = 0.0
    if abs(bp[-1] - 1.0) <= _SNAP:
        bp[-1] = 1.0
    if bp[0] != 0.0 or bp[-1] != 1.0:
        raise ValueError("breakpoints must start at 0 and end at 1")
    if not np.all(np.diff(bp) > 0):
        raise ValueError("breakpoints must be strictly increasing")

    vals = [v.coords if isinstance(v, AlgebraVector) else np.asarray(v) for v in values]
    if len(vals) != len(bp) - 1:
        raise ValueError(
            f"need {len(bp) - 1} values for {len(bp)} breakpoints, got {len(vals)}"
        )
    stack = np.array(vals, dtype=group.dtype)
    if stack.shape[1:] != group.coord_shape:
        raise ValueError(
            f"value shape {stack.shape[1:]} does not match algebra shape {group.coord_shape}"
        )
    if approx_error < 0:
        raise ValueError("approx_error must be nonnegative")
    bp.setflags(write=False)
    stack.setflags(write=False)
    return RegulatedPath(group, bp, stack, float(approx_error))


def constant_path(group: LieGroupSpec, value) -> RegulatedPath:
    return make_step(group, [0.0, 1.0], [value])


def _eval_curve(group: LieGroupSpec, curve, ts: np.ndarray) -> np.ndarray:
    out = np.empty((len(ts),) + group.coord_shape, dtype=group.dtype)
    for k, t in enumerate(ts):
        v = curve(float(t))
        out[k] = v.coords if isinstance(v, AlgebraVector) else np.asarray(v)
    return out


def _probe_grid(bp: np.ndarray) -> np.ndarray:
    """Nodes of the 4x refinement of a partition (quarter points plus ends)."""
    starts = bp[:-1]
    widths = np.diff(bp)
    offsets = np.array([0.0, 0.25, 0.5, 0.75])
    probes = (starts[:, np.newaxis] + widths[:, np.newaxis] * offsets).ravel()
    return np.append(probes, bp[-1])


def sample_on_partition(group: LieGroupSpec, curve, partition: np.ndarray) -> RegulatedPath:
    """Midpoint-sample ``curve`` on a given partition; measure the error.

    The recorded ``approx_error`` is the max deviation on a probe grid
    four times finer than the partition (nodes included).
    """
    bp = np.asarray(partition, dtype=float)
    mids = 0.5 * (bp[:-1] + bp[1:])
    stack = _eval_curve(group, curve, mids)

    probes = _probe_grid(bp)
    curve_vals = _eval_curve(group, curve, probes)
    idx = np.clip(np.searchsorted(bp, probes, side="right") - 1, 0, len(mids) - 1)
    dev = algebra_norms(group, curve_vals - stack[idx])
    err = float(dev.max()) if len(dev) else 0.0

    bp = np.array(bp)
    bp.setflags(write=False)
    stack.setflags(write=False)
    return RegulatedPath(group, bp, stack, err)


def sample_to_step(group: LieGroupSpec, curve, n: int) -> RegulatedPath:
    """Uniform n-piece midpoint sampling of a continuous curve."""
    if n < 1:
        raise ValueError("piece count must be at least 1")
    return sample_on_partition(group, curve, np.linspace(0.0, 1.0, n + 1))


def refine_partition(base: np.ndarray, per_piece: int) -> np.ndarray:
    """Split every interval of ``base`` into ``per_piece`` equal parts."""
    if per_piece == 1:
        return np.array(base, dtype=float)
    starts = base[:-1]
    widths = np.diff(base)
    offsets = np.arange(per_piece) / per_piece
    inner = (starts[:, np.newaxis] + widths[:, np.newaxis] * offsets).ravel()
    return np.append(inner, base[-1])


def merge_breakpoints(*paths_or_arrays) -> np.ndarray:
    arrays = [
        p.breakpoints if isinstance(p, RegulatedPath) else np.asarray(p, dtype=float)
        for p in paths_or_arrays
    ]
    merged = np.unique(np.concatenate(arrays))
    keep = np.concatenate([[True], np.diff(merged) > _SNAP])
    return merged[keep]


def sup_distance(p: RegulatedPath, q: RegulatedPath) -> float:
    """Essential sup of |p - q| over the merged partition."""
    if p.group != q.group:
        raise SpecMismatchError("paths live on different algebras")
    merged = merge_breakpoints(p, q)
    mids = 0.5 * (merged[:-1] + merged[1:])
    diff = p.at_many(mids) - q.at_many(mids)
    return float(algebra_norms(p.group, diff).max())


def weak_integral(p: RegulatedPath, a: float, b: float) -> AlgebraVector:
    """Integral of the step path over [a, b] (exact interval arithmetic)."""
    if not 0.0 <= a <= b <= 1.0:
        raise ValueError("need 0 <= a <= b <= 1")
    lo = np.maximum(p.breakpoints[:-1], a)
    hi = np.minimum(p.breakpoints[1:], b)
    overlap = np.clip(hi - lo, 0.0, None)
    coords = np.tensordot(overlap, p.values, axes=(0, 0))
    arr = np.asarray(coords, dtype=p.group.dtype)
    arr.setflags(write=False)
    return AlgebraVector(arr, p.group)


def map_pointwise(
    carrier,
    p: RegulatedPath,
    f,
    out_group: LieGroupSpec | None = None,
    f_many=None,
    refine: int = 1,
) -> RegulatedPath:
    """Pointwise image t -> f(carrier(t), p(t)) as a step path.

    ``f`` must be linear in its second slot.  The output partition
    refines p's partition (``refine`` subintervals per piece); values are
    sampled at interval midpoints.  ``f_many(carrier_ts, value_stack)``
    is an optional vectorized evaluator taking the carrier sample times
    and stacked second arguments.  The recorded error combines a probe
    measurement with the linear propagation of p's own approx_error.
    """
    out_group = out_group or p.group
    bp = refine_partition(p.breakpoints, refine) if refine > 1 else np.array(p.breakpoints)
    mids = 0.5 * (bp[:-1] + bp[1:])
    in_vals = p.at_many(mids)

    def apply(ts: np.ndarray, stack: np.ndarray) -> np.ndarray:
        if f_many is not None:
            return np.asarray(f_many(ts, stack), dtype=out_group.dtype)
        out = np.empty((len(ts),) + out_group.coord_shape, dtype=out_group.dtype)
        for k, t in enumerate(ts):
            res = f(carrier(float(t)), AlgebraVector(stack[k], p.group))
            out[k] = res.coords if isinstance(res, AlgebraVector) else np.asarray(res)
        return out

    out_vals = apply(mids, in_vals)

    probes = _probe_grid(bp)
    probe_out = apply(probes, p.at_many(probes))
    idx = np.clip(np.searchsorted(bp, probes, side="right") - 1, 0, len(mids) - 1)
    probe_dev = float(algebra_norms(out_group, probe_out - out_vals[idx]).max())

    lip_term = 0.0
    if p.approx_error > 0:
        # operator factor of f(carrier(t), .) estimated on unit probes
        rng = np.random.default_rng(0)
        ratios = []
        for _ in range(2):
            direction = rng.standard_normal(in_vals.shape[1:])
            if np.iscomplexobj(in_vals):
                direction = direction + 1j * rng.standard_normal(in_vals.shape[1:])
            direction /= algebra_norms(p.group, direction[np.newaxis])[0]
            tiled = np.broadcast_to(direction, (len(probes),) + direction.shape).copy()
            img = apply(probes, tiled)
            ratios.append(algebra_norms(out_group, img).max())
        lip_term = float(max(ratios)) * p.approx_error

    bp.setflags(write=False)
    out_vals.setflags(write=False)
    return RegulatedPath(out_group, bp, out_vals, probe_dev + lip_term)


# ---------------------------------------------------------------------------
# JSON wire format (CLI configs)
# ---------------------------------------------------------------------------


def _coords_to_jsonable(arr: np.ndarray):
    if np.iscomplexobj(arr):
        return {"re": arr.real.tolist(), "im": arr.imag.tolist()}
    return arr.tolist()


def _coords_from_jsonable(obj, dtype):
    if isinstance(obj, dict):
        return np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)
    return np.asarray(obj, dtype=dtype)


def path_to_jsonable(p: RegulatedPath) -> dict:
    return {
        "breakpoints": p.breakpoints.tolist(),
        "values": [_coords_to_jsonable(v) for v in p.values],
        "approx_error": p.approx_error,
    }


def path_from_jsonable(group: LieGroupSpec, obj: dict) -> RegulatedPath:
    values = [_coords_from_jsonable(v, group.dtype) for v in obj["values"]]
    return make_step(group, obj["breakpoints"], values, obj.get("approx_error", 0.0))
