"""Registry of concrete half-Lie group instances with closed-form actions.

Every instance ships the action, its derived action (vectorized where
the evolution loops need it), the generator in closed form, and any
analytic shortcuts (fiber exponential integral, seminorm values) that
the generic pipeline is tested against.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from . import lie_core as lc
from .errors import ConfigError
from .lie_core import AlgebraVector, GroupElement
from .semidirect import ActionSpec, InstanceDescriptor


def _phi(z):
    """(e^z - 1)/z, elementwise, with the removable singularity handled."""
    z = np.asarray(z)
    out = np.ones(z.shape, dtype=z.dtype if np.iscomplexobj(z) else float)
    small = np.abs(z) < 1e-4
    zs = np.where(small, 0.0, z)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(small, 1.0 + z / 2.0 + z * z / 6.0, (np.exp(zs) - 1.0) / np.where(small, 1.0, zs))
    return out


def oscillator(lam) -> InstanceDescriptor:
    """Diagonal phase action on complex modes: pi(t) z = (e^{i lam_n t} z_n).

    The base is the scalar line; a fiber vector is a C^1 vector for the
    full (untruncated) action iff sum |lam_n z_n|^2 converges, which the
    truncation ladder diagnostic operationalizes.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.ndim != 1 or len(lam) < 1:
        raise ValueError("lam must be a nonempty 1-d sequence")
    d = len(lam)
    n_spec = lc.complex_modes(d)
    g_spec = lc.scalar_line()

    def phases(t_values: np.ndarray) -> np.ndarray:
        return np.exp(1j * np.outer(np.atleast_1d(t_values).reshape(-1), lam))

    def act(g: GroupElement, n: GroupElement) -> GroupElement:
        return GroupElement.of(n_spec, np.exp(1j * lam * g.coords[0]) * n.coords)

    def derived_act(g: GroupElement, v: AlgebraVector) -> AlgebraVector:
        return AlgebraVector.of(n_spec, np.exp(1j * lam * g.coords[0]) * v.coords)

    def derived_act_many(g_stack: np.ndarray, v_stack: np.ndarray) -> np.ndarray:
        return phases(g_stack[:, 0] if g_stack.ndim > 1 else g_stack) * v_stack

    def generator(x: AlgebraVector, v: AlgebraVector) -> AlgebraVector:
        return AlgebraVector.of(n_spec, 1j * x.coords[0] * lam * v.coords)

    def exp_h_fiber(v: AlgebraVector, x: AlgebraVector) -> np.ndarray:
        return _phi(1j * lam * x.coords[0]) * v.coords

    def p_k_closed(v: AlgebraVector, k: int) -> float:
        return float(np.linalg.norm((lam**k) * v.coords))

    def c1_sum(v: AlgebraVector) -> float:
        return float(np.sum(np.abs(lam * v.coords) ** 2))

    return InstanceDescriptor(
        name="oscillator",
        params={"lam": tuple(lam.tolist())},
        N_spec=n_spec,
        G_spec=g_spec,
        action=ActionSpec(act, derived_act, derived_act_many, generator),
        c1_criterion=c1_sum,
        c1_description="sum |lam_n v_n|^2 bounded along the truncation ladder",
        closed_forms={"exp_h_fiber": exp_h_fiber, "p_k": p_k_closed},
    )


def affine(a: float) -> InstanceDescriptor:
    """Scalar affine instance: base R acts on fiber R by pi(s) v = e^{as} v."""
    a = float(a)
    n_spec = lc.scalar_line()
    g_spec = lc.scalar_line()

    def act(g: GroupElement, n: GroupElement) -> GroupElement:
        return GroupElement.of(n_spec, np.exp(a * g.coords[0]) * n.coords)

    def derived_act(g: GroupElement, v: AlgebraVector) -> AlgebraVector:
        return AlgebraVector.of(n_spec, np.exp(a * g.coords[0]) * v.coords)

    def derived_act_many(g_stack: np.ndarray, v_stack: np.ndarray) -> np.ndarray:
        s = g_stack[:, 0] if g_stack.ndim > 1 else g_stack
        return np.exp(a * s)[:, np.newaxis] * v_stack

    def generator(x: AlgebraVector, v: AlgebraVector) -> AlgebraVector:
        return AlgebraVector.of(n_spec, a * x.coords[0] * v.coords)

    def exp_h_fiber(v: AlgebraVector, x: AlgebraVector) -> np.ndarray:
        return _phi(np.array([a * x.coords[0]])) * v.coords

    def p_k_closed(v: AlgebraVector, k: int) -> float:
        return float(abs(a) ** k * np.linalg.norm(v.coords))

    return InstanceDescriptor(
        name="affine",
        params={"a": a},
        N_spec=n_spec,
        G_spec=g_spec,
        action=ActionSpec(act, derived_act, derived_act_many, generator),
        closed_forms={"exp_h_fiber": exp_h_fiber, "p_k": p_k_closed},
    )


def _default_conjugation_generator(size: int) -> np.ndarray:
    rng = np.random.default_rng(12345)
    raw = rng.standard_normal((size, size))
    return 0.4 * raw / np.linalg.norm(raw, 2)


def unit_group_conjugation(
    size: int,
    generator_matrix=None,
    injectivity_radius: float = 0.5,
) -> InstanceDescriptor:
    """Scalar line acting on GL(size) by conjugation: pi(t) m = e^{tA} m e^{-tA}.

    The action is fully smooth (every fiber vector is C^infinity), the
    smooth-control reference case.
    """
    if size < 2:
        raise ValueError("matrix size must be at least 2")
    a_mat = (
        np.asarray(generator_matrix, dtype=float)
        if generator_matrix is not None
        else _default_conjugation_generator(size)
    )
    if a_mat.shape != (size, size):
        raise ValueError("generator matrix has the wrong shape")
    n_spec = lc.matrix_group(size, injectivity_radius)
    g_spec = lc.scalar_line()

    eigvals, eigvecs = np.linalg.eig(a_mat)
    eigvecs_inv = np.linalg.inv(eigvecs)
    diagonalizable = np.linalg.cond(eigvecs) < 1e8

    def conjugators(s: np.ndarray):
        """e^{sA} and e^{-sA} for a batch of scalars, via the eigenbasis."""
        phase = np.exp(np.outer(s, eigvals))
        fwd = np.einsum("ij,mj,jk->mik", eigvecs, phase, eigvecs_inv)
        bwd = np.einsum("ij,mj,jk->mik", eigvecs, 1.0 / phase, eigvecs_inv)
        return fwd.real, bwd.real

    def act(g: GroupElement, n: GroupElement) -> GroupElement:
        t = g.coords[0]
        e_fwd = scipy.linalg.expm(t * a_mat)
        e_bwd = scipy.linalg.expm(-t * a_mat)
        return GroupElement.of(n_spec, e_fwd @ n.coords @ e_bwd)

    def derived_act(g: GroupElement, v: AlgebraVector) -> AlgebraVector:
        t = g.coords[0]
        e_fwd = scipy.linalg.expm(t * a_mat)
        e_bwd = scipy.linalg.expm(-t * a_mat)
        return AlgebraVector.of(n_spec, e_fwd @ v.coords @ e_bwd)

    def derived_act_many(g_stack: np.ndarray, v_stack: np.ndarray) -> np.ndarray:
        s = g_stack[:, 0] if g_stack.ndim > 1 else g_stack
        if diagonalizable:
            fwd, bwd = conjugators(s)
            return fwd @ v_stack @ bwd
        out = np.empty_like(v_stack)
        for i, t in enumerate(s):
            e_fwd = scipy.linalg.expm(t * a_mat)
            out[i] = e_fwd @ v_stack[i] @ scipy.linalg.expm(-t * a_mat)
        return out

    def generator(x: AlgebraVector, v: AlgebraVector) -> AlgebraVector:
        t = x.coords[0]
        return AlgebraVector.of(n_spec, t * (a_mat @ v.coords - v.coords @ a_mat))

    return InstanceDescriptor(
        name="unit_group_conjugation",
        params={"size": size},
        N_spec=n_spec,
        G_spec=g_spec,
        action=ActionSpec(act, derived_act, derived_act_many, generator),
        closed_forms={"conjugation_generator": lambda: a_mat},
    )


def loop_group(grid: int, lam_profile=None) -> InstanceDescriptor:
    """Rigid rotations of Fourier modes up to degree ``grid``.

    Fiber coordinates are trigonometric-polynomial coefficients of an
    abelian target; rotation by t multiplies mode k by e^{ikt}, so the
    instance is the diagonal phase action with frequencies -grid..grid
    (optionally reweighted by ``lam_profile``).
    """
    if grid < 1:
        raise ValueError("grid must be at least 1")
    modes = np.arange(-grid, grid + 1, dtype=float)
    lam = np.array([lam_profile(k) for k in modes]) if lam_profile else modes
    inst = oscillator(lam)
    return InstanceDescriptor(
        name="loop_group",
        params={"grid": grid, "lam": tuple(lam.tolist())},
        N_spec=inst.N_spec,
        G_spec=inst.G_spec,
        action=inst.action,
        c1_criterion=inst.c1_criterion,
        c1_description=inst.c1_description,
        closed_forms=inst.closed_forms,
    )


def oscillator_ladder(d_values, lam_exponent: float, coeff_exponent: float):
    """Truncation ladder (instance, fiber vector) with power-law data.

    Frequencies lam_n = n^lam_exponent and coefficients v_n =
    n^coeff_exponent over modes n = 1..d, for each d in ``d_values``.
    """
    ladder = []
    for d in d_values:
        n = np.arange(1, d + 1, dtype=float)
        inst = oscillator(n**lam_exponent)
        v = AlgebraVector.of(inst.N_spec, (n**coeff_exponent).astype(complex))
        ladder.append((inst, v))
    return ladder


def build_instance(name: str, params: dict) -> InstanceDescriptor:
    """CLI-facing constructor; raises ConfigError for unknown names."""
    known = {
        "oscillator": lambda p: oscillator(p["lam"]),
        "affine": lambda p: affine(p.get("a", 1.0)),
        "unit_group_conjugation": lambda p: unit_group_conjugation(p.get("size", 3)),
        "loop_group": lambda p: loop_group(p.get("grid", 1)),
    }
    if name not in known:
        raise ConfigError(
            "instance.name",
            f"unknown instance {name!r}; registry: {sorted(known)}",
        )
    try:
        return known[name](params)
    except KeyError as missing:
        raise ConfigError(f"instance.params.{missing.args[0]}", "required parameter missing")
