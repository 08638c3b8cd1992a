"""Finite-dimensional Banach-Lie group kernels.

Four concrete realizations sit behind one interface: real matrix groups
GL(n), additive vector groups, the additive scalar line, and additive
complex mode spaces (the fibers that diagonal phase actions rotate).
Operations are pure functions on immutable value objects; batched
variants back the evolution hot loops.

Algebra norms are scaled so the bracket is submultiplicative with
constant 1 (twice the spectral norm on matrix algebras, plain l2 on the
abelian ones).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NonInvertibleError, OutOfChartError, SpecMismatchError

KIND_MATRIX = "matrix"
KIND_ADDITIVE = "additive_vector"
KIND_SCALAR = "scalar_line"
KIND_COMPLEX = "complex_torus_factor"

_ABELIAN_KINDS = (KIND_ADDITIVE, KIND_SCALAR, KIND_COMPLEX)

_COND_LIMIT = 1e12


@dataclass(frozen=True)
class LieGroupSpec:
    """Descriptor of one concrete group instance.

    ``size`` is the matrix edge length for ``matrix`` kind and the number
    of coordinates otherwise.  ``injectivity_radius`` bounds the log
    chart: for matrix groups we only invert exp where the operator norm
    of ``g - 1`` stays below it (the radius is a modelling choice exposed
    here rather than hard-coded; abelian charts are global).
    """

    kind: str
    size: int
    injectivity_radius: float = 0.5

    def __post_init__(self):
        if self.kind not in (KIND_MATRIX,) + _ABELIAN_KINDS:
            raise ValueError(f"unknown group kind {self.kind!r}")
        if self.size < 1:
            raise ValueError("size must be positive")
        if self.injectivity_radius <= 0:
            raise ValueError("injectivity_radius must be positive")

    @property
    def dimension(self) -> int:
        """Coordinate count of algebra elements."""
        return self.size * self.size if self.kind == KIND_MATRIX else self.size

    @property
    def is_abelian(self) -> bool:
        return self.kind in _ABELIAN_KINDS

    @property
    def coord_shape(self) -> tuple:
        if self.kind == KIND_MATRIX:
            return (self.size, self.size)
        return (self.size,)

    @property
    def dtype(self):
        return np.complex128 if self.kind == KIND_COMPLEX else np.float64


def matrix_group(n: int, injectivity_radius: float = 0.5) -> LieGroupSpec:
    return LieGroupSpec(KIND_MATRIX, n, injectivity_radius)


def additive_group(d: int) -> LieGroupSpec:
    return LieGroupSpec(KIND_ADDITIVE, d, np.inf)


def scalar_line() -> LieGroupSpec:
    return LieGroupSpec(KIND_SCALAR, 1, np.inf)


def complex_modes(d: int) -> LieGroupSpec:
    return LieGroupSpec(KIND_COMPLEX, d, np.inf)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _coerce(group: LieGroupSpec, coords) -> np.ndarray:
    arr = np.array(coords, dtype=group.dtype)
    if group.kind != KIND_MATRIX:
        arr = np.atleast_1d(arr)
    if arr.shape != group.coord_shape:
        raise ValueError(
            f"coordinate shape {arr.shape} does not match {group.coord_shape}"
        )
    if not np.isfinite(arr).all():
        raise ValueError("coordinates must be finite")
    return _freeze(arr)


@dataclass(frozen=True, eq=False)
class AlgebraVector:
    """Element of the Lie algebra of ``group``, in coordinates."""

    coords: np.ndarray
    group: LieGroupSpec

    @staticmethod
    def of(group: LieGroupSpec, coords) -> "AlgebraVector":
        return AlgebraVector(_coerce(group, coords), group)

    @property
    def norm(self) -> float:
        return algebra_norm(self)

    def __add__(self, other: "AlgebraVector") -> "AlgebraVector":
        _same_group(self, other)
        return AlgebraVector(_freeze(self.coords + other.coords), self.group)

    def __sub__(self, other: "AlgebraVector") -> "AlgebraVector":
        _same_group(self, other)
        return AlgebraVector(_freeze(self.coords - other.coords), self.group)

    def __mul__(self, scalar) -> "AlgebraVector":
        return AlgebraVector(_freeze(self.coords * scalar), self.group)

    __rmul__ = __mul__

    def __neg__(self) -> "AlgebraVector":
        return AlgebraVector(_freeze(-self.coords), self.group)


@dataclass(frozen=True, eq=False)
class GroupElement:
    """Point of ``group``, in the instance-specific coordinates."""

    coords: np.ndarray
    group: LieGroupSpec

    @staticmethod
    def of(group: LieGroupSpec, coords) -> "GroupElement":
        return GroupElement(_coerce(group, coords), group)


def _same_group(a, b) -> None:
    if a.group != b.group:
        raise SpecMismatchError(
            f"operands live on different groups: {a.group} vs {b.group}"
        )


def identity(group: LieGroupSpec) -> GroupElement:
    if group.kind == KIND_MATRIX:
        return GroupElement(_freeze(np.eye(group.size)), group)
    return GroupElement(_freeze(np.zeros(group.size, dtype=group.dtype)), group)


def zero_vector(group: LieGroupSpec) -> AlgebraVector:
    if group.kind == KIND_MATRIX:
        return AlgebraVector(_freeze(np.zeros((group.size, group.size))), group)
    return AlgebraVector(_freeze(np.zeros(group.size, dtype=group.dtype)), group)


def multiply(a: GroupElement, b: GroupElement) -> GroupElement:
    _same_group(a, b)
    if a.group.kind == KIND_MATRIX:
        return GroupElement(_freeze(a.coords @ b.coords), a.group)
    return GroupElement(_freeze(a.coords + b.coords), a.group)


def inverse(a: GroupElement) -> GroupElement:
    if a.group.kind == KIND_MATRIX:
        if np.linalg.cond(a.coords) > _COND_LIMIT:
            raise NonInvertibleError("matrix is numerically singular")
        return GroupElement(_freeze(np.linalg.inv(a.coords)), a.group)
    return GroupElement(_freeze(-a.coords), a.group)


def exp(x: AlgebraVector) -> GroupElement:
    if x.group.kind == KIND_MATRIX:
        return GroupElement(_freeze(expm(x.coords)), x.group)
    return GroupElement(x.coords, x.group)


def log_local(g: GroupElement) -> AlgebraVector:
    """Inverse of exp on the chart neighbourhood; refuses to extrapolate."""
    group = g.group
    if group.kind != KIND_MATRIX:
        return AlgebraVector(g.coords, group)
    dev = np.linalg.norm(g.coords - np.eye(group.size), 2)
    if not dev < group.injectivity_radius:
        raise OutOfChartError(
            f"|g - 1| = {dev:.3g} exceeds the chart radius "
            f"{group.injectivity_radius:.3g}"
        )
    raw, _err = scipy.linalg.logm(g.coords, disp=False)
    if np.iscomplexobj(raw):
        raw = np.ascontiguousarray(raw.real)
    return AlgebraVector(_freeze(raw), group)


def adjoint(g: GroupElement, y: AlgebraVector) -> AlgebraVector:
    _same_group(g, y)
    if g.group.kind == KIND_MATRIX:
        inv_g = inverse(g)
        return AlgebraVector(_freeze(g.coords @ y.coords @ inv_g.coords), g.group)
    return y


def bracket_ad(x: AlgebraVector, y: AlgebraVector) -> AlgebraVector:
    _same_group(x, y)
    if x.group.kind == KIND_MATRIX:
        return AlgebraVector(
            _freeze(x.coords @ y.coords - y.coords @ x.coords), x.group
        )
    return zero_vector(x.group)


def local_multiply(x: AlgebraVector, y: AlgebraVector) -> AlgebraVector:
    """Chart product x*y = log(exp x . exp y); raises on chart escape."""
    _same_group(x, y)
    return log_local(multiply(exp(x), exp(y)))


def exp_ad(x: AlgebraVector, y: AlgebraVector) -> AlgebraVector:
    """e^{ad x} y via the exponential of the matrix of ad x in coordinates."""
    _same_group(x, y)
    group = x.group
    if group.kind != KIND_MATRIX:
        return y
    n = group.size
    ad_matrix = np.kron(x.coords, np.eye(n)) - np.kron(np.eye(n), x.coords.T)
    flat = expm(ad_matrix) @ y.coords.reshape(-1)
    return AlgebraVector(_freeze(flat.reshape(n, n)), group)


def algebra_norm(x: AlgebraVector) -> float:
    return algebra_norms(x.group, x.coords[np.newaxis])[0]


def algebra_norms(group: LieGroupSpec, stack: np.ndarray) -> np.ndarray:
    """Norms of a stack of algebra coordinates (leading axis = batch)."""
    if group.kind == KIND_MATRIX:
        # twice the spectral norm, so |[x,y]| <= |x| |y| holds exactly
        return 2.0 * np.linalg.norm(stack, 2, axis=(-2, -1))
    return np.linalg.norm(stack, axis=-1)


def group_distance(a: GroupElement, b: GroupElement) -> float:
    """Frobenius distance on matrix groups, l2 on the abelian ones."""
    _same_group(a, b)
    return float(np.linalg.norm(a.coords - b.coords))


# ---------------------------------------------------------------------------
# batched kernels for the evolution loops
# ---------------------------------------------------------------------------

_PADE13_B = np.array(
    [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ]
)

_PADE13_THETA = 5.371920351148152


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential, degree-13 Pade with scaling and squaring.

    Accepts a single (n, n) matrix or a stack (..., n, n); the stack is
    processed with shared scaling, which is what the evolution loops
    need (many small, similarly sized generators).
    """
    a = np.asarray(a, dtype=np.complex128 if np.iscomplexobj(a) else np.float64)
    n = a.shape[-1]
    norm = float(np.abs(a).sum(axis=-2).max()) if a.size else 0.0
    squarings = 0
    if norm > _PADE13_THETA:
        squarings = int(np.ceil(np.log2(norm / _PADE13_THETA)))
    scaled = a / (2.0**squarings)

    ident = np.broadcast_to(np.eye(n, dtype=scaled.dtype), scaled.shape)
    b = _PADE13_B
    a2 = scaled @ scaled
    a4 = a2 @ a2
    a6 = a2 @ a4
    u = scaled @ (
        a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
        + b[7] * a6
        + b[5] * a4
        + b[3] * a2
        + b[1] * ident
    )
    v = (
        a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
        + b[6] * a6
        + b[4] * a4
        + b[2] * a2
        + b[0] * ident
    )
    result = np.linalg.solve(v - u, v + u)
    for _ in range(squarings):
        result = result @ result
    return result


def exp_many(group: LieGroupSpec, stack: np.ndarray) -> np.ndarray:
    """exp applied along the leading axis of stacked algebra coordinates."""
    if group.kind == KIND_MATRIX:
        return expm(stack)
    return np.array(stack)


def multiply_prefix(group: LieGroupSpec, factors: np.ndarray) -> np.ndarray:
    """Prefix products (identity first) of stacked group elements."""
    m = factors.shape[0]
    if group.kind == KIND_MATRIX:
        out = np.empty((m + 1,) + group.coord_shape, dtype=factors.dtype)
        out[0] = np.eye(group.size)
        for j in range(m):
            out[j + 1] = out[j] @ factors[j]
        return out
    out = np.zeros((m + 1,) + group.coord_shape, dtype=group.dtype)
    np.cumsum(factors, axis=0, out=out[1:])
    return out


def random_algebra(group: LieGroupSpec, rng: np.random.Generator, max_norm: float) -> AlgebraVector:
    """Random algebra element with norm uniform on (0, max_norm]."""
    if group.kind == KIND_COMPLEX:
        raw = rng.standard_normal(group.size) + 1j * rng.standard_normal(group.size)
    elif group.kind == KIND_MATRIX:
        raw = rng.standard_normal((group.size, group.size))
    else:
        raw = rng.standard_normal(group.size)
    x = AlgebraVector.of(group, raw)
    scale = max_norm * rng.uniform(0.05, 1.0) / max(x.norm, 1e-300)
    return x * scale
