"""Cocycle defects, bump averaging, smoothing, conjugation, smoothness proxy.

Frozen oracle constants were computed with 30-digit quadrature
(independent of the adaptive Simpson path under test): for the standard
mollifier f on [0, 1],

    I_1 = int f(s) e^{is}  ds = 0.86035848551938322 + 0.47001598279747184 i
    I_5 = int f(s) e^{5is} ds   (enters only through the closed form below)

and for alpha_j(s) = e^{i mu s} - 1 the smoothed curve is
beta_j(t) = (e^{i mu t} - 1) I_mu, giving e.g. at mu=1, t=0.5:
beta = -0.330660547358423506 + 0.354939677828181537 i.
"""

import numpy as np
import pytest

from halflie import cocycle as cc
from halflie import lie_core as lc
from halflie import semidirect as sd
from halflie.errors import HalfLieError, WindowTooShortError
from halflie.instances import oscillator

I1 = 0.86035848551938322016 + 0.470015982797471839j
BETA_MU1_T05 = -0.330660547358423506 + 0.354939677828181537j
BETA_MU5_T05 = 0.634317955609521293 - 0.910655632101179495j


def diag_action(mus):
    mus = np.asarray(mus, dtype=float)

    def u_apply(t, vec):
        return np.exp(1j * mus * t) * np.asarray(vec, dtype=complex)

    return u_apply


def test_adaptive_simpson_known_integrals():
    assert abs(cc.adaptive_simpson(lambda s: s * s, 0, 1, 1e-12) - 1 / 3) < 1e-12
    val = cc.adaptive_simpson(lambda s: np.exp(1j * s), 0, np.pi, 1e-12)
    assert abs(val - (np.exp(1j * np.pi) - 1) / 1j) < 1e-11
    vec = cc.adaptive_simpson(lambda s: np.array([1.0, s]), 0, 2, 1e-12)
    assert np.allclose(vec, [2.0, 2.0])


def test_standard_mollifier_properties():
    bump = cc.standard_mollifier(1.0)
    mass = cc.adaptive_simpson(lambda s: bump(s), 0, 1, 1e-12)
    assert abs(mass - 1.0) < 1e-10
    assert bump(0.0) == 0.0 and bump(1.0) == 0.0
    assert bump(0.5) > 0


def test_cocycle_defect_cases():
    u = diag_action([1.0])
    alpha = cc.coboundary_curve(u, np.array([1.0 + 0j]), window=(0.0, 3.0))
    assert cc.cocycle_defect(alpha, u, 0.0, 0.7) < 1e-15
    rng = np.random.default_rng(1)
    for _ in range(40):
        s, t = rng.uniform(0, 1.2, 2)
        assert cc.cocycle_defect(alpha, u, s, t) < 1e-10

    bad = cc.CocycleCurve(lambda t: np.array([t * t + 0j]), (0.0, 3.0))
    assert cc.cocycle_defect(bad, u, 0.5, 0.5) > 1e-3


def test_cocycle_defect_window_escape():
    u = diag_action([1.0])
    alpha = cc.coboundary_curve(u, np.array([1.0 + 0j]), window=(0.0, 1.0))
    with pytest.raises(WindowTooShortError):
        cc.cocycle_defect(alpha, u, 0.8, 0.8)


def test_bump_average_cases():
    bump = cc.standard_mollifier(1.0)
    zero = cc.CocycleCurve(lambda t: np.array([0.0 + 0j]), (0.0, 2.0))
    assert np.linalg.norm(cc.bump_average(zero, bump)) < 1e-14

    u = diag_action([1.0])
    alpha = cc.coboundary_curve(u, np.array([1.0 + 0j]), window=(0.0, 2.0))
    v = cc.bump_average(alpha, bump)
    assert abs(v[0] - (I1 - 1.0)) < 1e-10

    # mass-one average of a curve constant on the support
    const = cc.CocycleCurve(
        lambda t: np.array([0.0 + 0j]) if t == 0 else np.array([2.5 + 0j]), (0.0, 2.0)
    )
    assert abs(cc.bump_average(const, bump)[0] - 2.5) < 1e-9


def test_smooth_equivalent_closed_form_c2():
    mus = [1.0, 5.0]
    u = diag_action(mus)
    w = np.array([1.0 + 0j, 1.0 + 0j])
    alpha = cc.coboundary_curve(u, w, window=(0.0, 2.0))
    bump = cc.standard_mollifier(1.0)
    beta = cc.smooth_equivalent(alpha, u, bump)
    val = beta(0.5)
    assert abs(val[0] - BETA_MU1_T05) < 1e-9
    assert abs(val[1] - BETA_MU5_T05) < 1e-9
    assert beta.consistency_residual < 1e-9
    # beta satisfies the cocycle identity at the quadrature tolerance
    rng = np.random.default_rng(3)
    for _ in range(10):
        s, t = rng.uniform(0, 0.5, 2)
        assert cc.cocycle_defect(beta, u, s, t) < 1e-9


def test_smooth_equivalent_zero_curve():
    u = diag_action([1.0, 5.0])
    zero = cc.CocycleCurve(lambda t: np.zeros(2, dtype=complex), (0.0, 2.0))
    beta = cc.smooth_equivalent(zero, u, cc.standard_mollifier(1.0))
    assert np.linalg.norm(beta(0.4)) < 1e-12


def test_smooth_equivalent_window_too_short():
    u = diag_action([1.0])
    alpha = cc.coboundary_curve(u, np.array([1.0 + 0j]), window=(0.0, 0.5))
    with pytest.raises(WindowTooShortError):
        cc.smooth_equivalent(alpha, u, cc.standard_mollifier(1.0))


def test_smooth_equivalent_difference_is_coboundary():
    u = diag_action([1.0, 5.0])
    w = np.array([0.3 - 0.4j, -1.0 + 0j])
    alpha = cc.coboundary_curve(u, w, window=(0.0, 2.0))
    bump = cc.standard_mollifier(1.0)
    beta = cc.smooth_equivalent(alpha, u, bump)
    diff = lambda t: beta(t) - alpha(t)
    ts = np.linspace(0.05, 0.9, 12)
    _, residual = cc.fit_coboundary(diff, u, ts, 2)
    assert residual < 1e-9


def test_smooth_equivalent_stable_under_bump_choice():
    u = diag_action([1.0, 5.0])
    w = np.array([1.0 + 0j, 0.5j])
    alpha = cc.coboundary_curve(u, w, window=(0.0, 2.0))
    bump_a = cc.standard_mollifier(1.0)
    bump_b = cc.bump_from_callable(
        0.8, lambda s: np.where((s > 0) & (s < 0.8), np.sin(np.pi * s / 0.8) ** 4, 0.0)
    )
    beta_a = cc.smooth_equivalent(alpha, u, bump_a)
    beta_b = cc.smooth_equivalent(alpha, u, bump_b)
    diff = lambda t: beta_a(t) - beta_b(t)
    ts = np.linspace(0.05, 0.9, 12)
    _, residual = cc.fit_coboundary(diff, u, ts, 2)
    assert residual < 1e-9


def test_smoothness_score_cases():
    window = (0.0, 1.0)
    quad = cc.smoothness_score(lambda t: np.array([t * t]), window, base_step=0.05)
    assert quad.passes(1) and quad.passes(2)

    kink = cc.smoothness_score(
        lambda t: np.array([abs(t - 0.5)]), window, base_step=0.05
    )
    assert not kink.passes(1)

    const = cc.smoothness_score(lambda t: np.array([1.0]), window, base_step=0.05)
    assert const.scores[1] == 0.0 and const.passes(1)


def test_conjugate_one_parameter_trivial_base_fiber():
    inst = oscillator([1.0])
    bump = cc.standard_mollifier(1.0)
    # gamma(t) = (0, t): conjugator acts trivially, curve unchanged
    gamma = cc.HOneParameter(
        inst,
        lambda t: np.zeros(1, dtype=complex),
        lc.AlgebraVector.of(inst.G_spec, [1.0]),
        window=(0.0, 2.5),
    )
    conj, smoothed = cc.conjugate_one_parameter(gamma, bump)
    assert np.linalg.norm(conj.n.coords) < 1e-12
    assert np.linalg.norm(smoothed.fiber_eval(0.7)) < 1e-12


def test_conjugate_one_parameter_rough_coboundary():
    # gamma(t) = (e^{it} w - w, t): the conjugated fiber matches the
    # smooth equivalent from the bump construction, and conjugation by
    # (v, 1) reproduces it pointwise through the group product
    inst = oscillator([1.0])
    bump = cc.standard_mollifier(1.0)
    w = 1.25 + 0j

    def fiber(t):
        return np.array([(np.exp(1j * t) - 1.0) * w])

    gamma = cc.HOneParameter(
        inst, fiber, lc.AlgebraVector.of(inst.G_spec, [1.0]), window=(0.0, 2.5)
    )
    conj, smoothed = cc.conjugate_one_parameter(gamma, bump)

    u = diag_action([1.0])
    alpha = cc.CocycleCurve(fiber, (0.0, 2.5))
    beta = cc.smooth_equivalent(alpha, u, bump)
    for t in (0.2, 0.5, 0.9):
        assert np.linalg.norm(smoothed.fiber_eval(t) - beta(t)) < 1e-9

    # direct group-level check: g^{-1} gamma(t) g with g = (v, 1)
    for t in (0.3, 0.8):
        lhs = smoothed.point_at(t)
        rhs = sd.h_multiply(
            sd.h_multiply(sd.h_inverse(conj), gamma.point_at(t)), conj
        )
        assert np.linalg.norm(lhs.n.coords - rhs.n.coords) < 1e-12
        assert np.linalg.norm(lhs.g.coords - rhs.g.coords) < 1e-14

    # one-parameter law of the smoothed curve
    for s, t in ((0.2, 0.3), (0.5, 0.4)):
        prod = sd.h_multiply(smoothed.point_at(s), smoothed.point_at(t))
        direct = smoothed.point_at(s + t)
        assert np.linalg.norm(prod.n.coords - direct.n.coords) < 1e-9


def test_conjugate_one_parameter_already_smooth():
    inst = oscillator([1.0])
    bump = cc.standard_mollifier(1.0)
    w = sd.vector(inst, [0.5 + 0j], [1.0])

    def fiber(t):
        # fiber of exp_H(t (v, x)): closed-form integral
        return inst.closed_forms["exp_h_fiber"](t * w.v, t * w.x)

    gamma = cc.HOneParameter(
        inst, fiber, lc.AlgebraVector.of(inst.G_spec, [1.0]), window=(0.0, 2.5)
    )
    conj, smoothed = cc.conjugate_one_parameter(gamma, bump)
    score = cc.smoothness_score(
        smoothed.fiber_eval, (0.0, 1.2), base_step=0.02
    )
    assert score.passes(1)
    # smoothed curve still passes the cocycle defect test for U = pi o beta
    u = gamma.u_apply
    alpha2 = cc.CocycleCurve(smoothed.fiber_eval, gamma.window)
    assert cc.max_cocycle_defect(alpha2, u, [(0.3, 0.4), (0.1, 0.9)]) < 1e-9


def test_conjugate_rejects_matrix_fiber():
    from halflie.instances import unit_group_conjugation

    inst = unit_group_conjugation(2)
    bump = cc.standard_mollifier(1.0)
    gamma = cc.HOneParameter(
        inst,
        lambda t: np.eye(2),
        lc.AlgebraVector.of(inst.G_spec, [1.0]),
        window=(0.0, 2.0),
    )
    with pytest.raises(HalfLieError):
        cc.conjugate_one_parameter(gamma, bump)
