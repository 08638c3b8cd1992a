"""Semidirect product law, twisted controls, factorized evolution, exp_H,
partial bracket, seminorms, ladder diagnostics."""

import numpy as np
import pytest

from halflie import lie_core as lc
from halflie import regulated as reg
from halflie import semidirect as sd
from halflie.errors import PartialBracketUndefinedError, SpecMismatchError
from halflie.instances import affine, oscillator, oscillator_ladder, unit_group_conjugation

E = np.e


@pytest.fixture(scope="module")
def osc1():
    return oscillator([1.0])


@pytest.fixture(scope="module")
def osc12():
    return oscillator([1.0, 2.0])


@pytest.fixture(scope="module")
def aff1():
    return affine(1.0)


def test_h_multiply_identity(aff1):
    p = sd.point(aff1, [0.7], [0.3])
    prod = sd.h_multiply(sd.identity_point(aff1), p)
    assert np.allclose(prod.n.coords, p.n.coords)
    assert np.allclose(prod.g.coords, p.g.coords)


def test_h_multiply_oscillator_pi(osc1):
    a = sd.point(osc1, [1.0 + 0j], [np.pi])
    b = sd.point(osc1, [1.0 + 0j], [0.0])
    prod = sd.h_multiply(a, b)
    assert abs(prod.n.coords[0] - (1 + np.exp(1j * np.pi))) < 1e-14
    assert abs(prod.n.coords[0]) < 1e-14  # 1 + e^{i pi} = 0
    assert abs(prod.g.coords[0] - np.pi) < 1e-15


def test_h_multiply_affine(aff1):
    a = sd.point(aff1, [1.0], [1.0])
    b = sd.point(aff1, [1.0], [0.0])
    prod = sd.h_multiply(a, b)
    assert abs(prod.n.coords[0] - (1 + E)) < 1e-14
    assert abs(prod.g.coords[0] - 1.0) < 1e-15


def test_h_multiply_instance_mismatch(aff1, osc1):
    with pytest.raises(SpecMismatchError):
        sd.h_multiply(sd.identity_point(aff1), sd.identity_point(osc1))


def test_h_inverse_cases(osc1):
    ident = sd.identity_point(osc1)
    inv = sd.h_inverse(ident)
    assert np.allclose(inv.n.coords, 0) and np.allclose(inv.g.coords, 0)

    a = sd.point(osc1, [1.0 + 0j], [np.pi])
    inv = sd.h_inverse(a)
    assert abs(inv.n.coords[0] - 1.0) < 1e-14  # -e^{-i pi} = 1
    assert abs(inv.g.coords[0] + np.pi) < 1e-15

    b = sd.point(osc1, [0.5 + 0.2j], [0.0])
    inv_b = sd.h_inverse(b)
    assert abs(inv_b.n.coords[0] + b.n.coords[0]) < 1e-15


def test_h_inverse_is_two_sided(aff1, osc12):
    rng = np.random.default_rng(2)
    for inst in (aff1, osc12):
        for _ in range(50):
            n = lc.random_algebra(inst.N_spec, rng, 1.0).coords
            g = lc.random_algebra(inst.G_spec, rng, 1.0).coords
            a = sd.point(inst, n, g)
            for prod in (sd.h_multiply(a, sd.h_inverse(a)), sd.h_multiply(sd.h_inverse(a), a)):
                assert np.linalg.norm(prod.n.coords) < 1e-10
                assert np.linalg.norm(prod.g.coords) < 1e-10


def test_action_naturality_bulk(osc12, aff1):
    rng = np.random.default_rng(3)
    conj = unit_group_conjugation(2)
    for inst in (osc12, aff1, conj):
        worst = 0.0
        for _ in range(1000):
            g = lc.exp(lc.random_algebra(inst.G_spec, rng, 0.5))
            v = lc.random_algebra(inst.N_spec, rng, 0.1)
            lhs = inst.action.act(g, lc.exp(v))
            rhs = lc.exp(sd.derived_action(inst, g, v))
            worst = max(worst, lc.group_distance(lhs, rhs))
        assert worst < 1e-9


def test_derived_action_homomorphism(osc12):
    rng = np.random.default_rng(4)
    conj = unit_group_conjugation(2)
    for inst in (osc12, conj):
        worst = 0.0
        for _ in range(200):
            g1 = lc.exp(lc.random_algebra(inst.G_spec, rng, 0.4))
            g2 = lc.exp(lc.random_algebra(inst.G_spec, rng, 0.4))
            v = lc.random_algebra(inst.N_spec, rng, 0.5)
            lhs = sd.derived_action(inst, lc.multiply(g1, g2), v)
            rhs = sd.derived_action(inst, g1, sd.derived_action(inst, g2, v))
            worst = max(worst, lc.algebra_norm(lhs - rhs))
        assert worst < 1e-10


def test_derived_action_chart_fallback(osc12):
    # drop the closed forms and recover pidot through the chart
    bare = sd.InstanceDescriptor(
        name="oscillator_bare",
        params=osc12.params,
        N_spec=osc12.N_spec,
        G_spec=osc12.G_spec,
        action=sd.ActionSpec(act=osc12.action.act),
    )
    g = lc.exp(lc.AlgebraVector.of(bare.G_spec, [0.7]))
    v = lc.AlgebraVector.of(bare.N_spec, [0.2 + 0.1j, -0.3j])
    via_chart = sd.derived_action(bare, g, v)
    closed = osc12.action.derived_act(g, v)
    assert lc.algebra_norm(via_chart - closed) < 1e-12


def test_twisted_control_frozen_base(osc12):
    alpha = reg.make_step(osc12.N_spec, [0, 0.5, 1], [[1.0, 0.0], [0.0, 1.0]])
    beta = reg.constant_path(osc12.G_spec, [0.0])
    out = sd.twisted_control(osc12, alpha, beta)
    assert reg.sup_distance(out, alpha) < 1e-15
    assert out.approx_error < 1e-12


def test_twisted_control_affine_closed_form(aff1):
    alpha = reg.constant_path(aff1.N_spec, [1.0])
    beta = reg.constant_path(aff1.G_spec, [1.0])
    out = sd.twisted_control(aff1, alpha, beta, refine=4)
    mids = 0.5 * (out.breakpoints[:-1] + out.breakpoints[1:])
    assert np.allclose(out.values[:, 0], np.exp(mids))


def test_twisted_control_oscillator(osc12):
    alpha = reg.constant_path(osc12.N_spec, [1.0, 0.0])
    beta = reg.constant_path(osc12.G_spec, [1.0])
    out = sd.twisted_control(osc12, alpha, beta, refine=8)
    mids = 0.5 * (out.breakpoints[:-1] + out.breakpoints[1:])
    assert np.allclose(out.values[:, 0], np.exp(1j * mids))
    assert np.allclose(out.values[:, 1], 0.0)


def test_evol_h_zero_fiber(osc12):
    alpha = reg.constant_path(osc12.N_spec, [0.0, 0.0])
    beta = reg.constant_path(osc12.G_spec, [0.7])
    flow = sd.evol_h(osc12, alpha, beta, tol=1e-10)
    assert np.allclose(flow.endpoint.n.coords, 0.0)
    assert abs(flow.endpoint.g.coords[0] - 0.7) < 1e-15


def test_evol_h_frozen_base(osc12):
    alpha = reg.make_step(osc12.N_spec, [0, 0.5, 1], [[1.0, 0.0], [0.0, 2.0]])
    beta = reg.constant_path(osc12.G_spec, [0.0])
    flow = sd.evol_h(osc12, alpha, beta, tol=1e-10)
    expected = reg.weak_integral(alpha, 0, 1)
    assert np.allclose(flow.endpoint.n.coords, expected.coords, atol=1e-12)
    assert abs(flow.endpoint.g.coords[0]) < 1e-15


def test_evol_h_affine_integral(aff1):
    alpha = reg.constant_path(aff1.N_spec, [1.0])
    beta = reg.constant_path(aff1.G_spec, [1.0])
    flow = sd.evol_h(aff1, alpha, beta, tol=1e-10)
    assert abs(flow.endpoint.n.coords[0] - (E - 1)) < 1e-9
    assert abs(flow.endpoint.g.coords[0] - 1.0) < 1e-15


def test_evol_h_base_component_is_shared_object(aff1):
    from halflie.evolution import evolve

    alpha = reg.constant_path(aff1.N_spec, [1.0])
    beta = reg.make_step(aff1.G_spec, [0, 0.5, 1], [[1.0], [0.25]])
    flow = sd.evol_h(aff1, alpha, beta, tol=1e-9)
    independent = evolve(aff1.G_spec, beta, 1e-9)
    # zero difference: identical computation path
    assert np.array_equal(flow.g_flow.prefix, independent.prefix)


def test_exp_h_trivial_directions(osc12):
    w = sd.vector(osc12, [0.0, 0.0], [0.8])
    pt = sd.exp_h(osc12, w, tol=1e-10)
    assert np.allclose(pt.n.coords, 0.0)
    assert abs(pt.g.coords[0] - 0.8) < 1e-15

    w2 = sd.vector(osc12, [0.3, -0.2j], [0.0])
    pt2 = sd.exp_h(osc12, w2, tol=1e-10)
    assert np.allclose(pt2.n.coords, [0.3, -0.2j])
    assert abs(pt2.g.coords[0]) < 1e-15


def test_exp_h_affine_value(aff1):
    pt = sd.exp_h(aff1, sd.vector(aff1, [1.0], [1.0]), tol=1e-10)
    assert abs(pt.n.coords[0] - (E - 1)) < 1e-9


def test_exp_h_one_parameter_law(aff1, osc12):
    rng = np.random.default_rng(8)
    for inst in (aff1, osc12):
        for _ in range(5):
            w = sd.vector(
                inst,
                lc.random_algebra(inst.N_spec, rng, 0.8).coords,
                lc.random_algebra(inst.G_spec, rng, 0.8).coords,
            )
            s, t = rng.uniform(-1, 1, 2)
            whole = sd.exp_h(inst, (s + t) * w, tol=1e-11)
            parts = sd.h_multiply(
                sd.exp_h(inst, s * w, tol=1e-11), sd.exp_h(inst, t * w, tol=1e-11)
            )
            assert np.linalg.norm(whole.n.coords - parts.n.coords) < 1e-8
            assert np.linalg.norm(whole.g.coords - parts.g.coords) < 1e-12


def test_d_derived_action_cases(osc12, aff1):
    x0 = lc.zero_vector(osc12.G_spec)
    v = lc.AlgebraVector.of(osc12.N_spec, [1.0, 1.0])
    assert lc.algebra_norm(sd.d_derived_action(osc12, x0, v)) == 0.0

    x1 = lc.AlgebraVector.of(osc12.G_spec, [1.0])
    dv = sd.d_derived_action(osc12, x1, v)
    assert np.allclose(dv.coords, [1j, 2j])

    xa = lc.AlgebraVector.of(aff1.G_spec, [2.0])
    va = lc.AlgebraVector.of(aff1.N_spec, [3.0])
    assert abs(sd.d_derived_action(aff1, xa, va).coords[0] - 6.0) < 1e-14


def test_d_derived_action_finite_difference_route(osc12):
    bare = sd.InstanceDescriptor(
        name="oscillator_bare",
        params=osc12.params,
        N_spec=osc12.N_spec,
        G_spec=osc12.G_spec,
        action=sd.ActionSpec(act=osc12.action.act, derived_act=osc12.action.derived_act),
    )
    x = lc.AlgebraVector.of(bare.G_spec, [0.5])
    v = lc.AlgebraVector.of(bare.N_spec, [1.0, -0.5j])
    numeric = sd.d_derived_action(bare, x, v)
    closed = osc12.action.generator(x, v)
    assert lc.algebra_norm(numeric - closed) < 1e-8


def test_h_bracket_cases(osc1):
    w = sd.vector(osc1, [0.4 + 0.1j], [0.3])
    br = sd.h_bracket(osc1, w, w)
    assert lc.algebra_norm(br.v) < 1e-15 and lc.algebra_norm(br.x) < 1e-15

    w1 = sd.vector(osc1, [1.0], [0.0])
    w2 = sd.vector(osc1, [0.0], [1.0])
    br = sd.h_bracket(osc1, w1, w2)
    assert np.allclose(br.v.coords, [-1j])
    assert np.allclose(br.x.coords, [0.0])


def test_h_bracket_trivial_action_reduces_componentwise():
    inst = oscillator([0.0, 0.0])  # generator vanishes
    rng = np.random.default_rng(10)
    w1 = sd.vector(inst, rng.standard_normal(2), rng.standard_normal(1))
    w2 = sd.vector(inst, rng.standard_normal(2), rng.standard_normal(1))
    br = sd.h_bracket(inst, w1, w2)
    assert np.allclose(br.v.coords, 0.0)  # abelian fiber
    assert np.allclose(br.x.coords, 0.0)  # abelian base


def test_h_bracket_antisymmetry_bilinearity(osc12):
    rng = np.random.default_rng(11)
    for _ in range(30):
        w1 = sd.vector(osc12, rng.standard_normal(2) + 1j * rng.standard_normal(2), rng.standard_normal(1))
        w2 = sd.vector(osc12, rng.standard_normal(2) + 1j * rng.standard_normal(2), rng.standard_normal(1))
        b12 = sd.h_bracket(osc12, w1, w2)
        b21 = sd.h_bracket(osc12, w2, w1)
        assert lc.algebra_norm(b12.v + b21.v) < 1e-12
        c = 1.7
        scaled = sd.h_bracket(osc12, c * w1, w2)
        assert lc.algebra_norm(scaled.v - c * b12.v) < 1e-12


def test_h_bracket_refuses_non_c1(osc12):
    w1 = sd.vector(osc12, [1.0, 0.0], [0.0], fiber_c1=False)
    w2 = sd.vector(osc12, [0.0, 0.0], [1.0])
    with pytest.raises(PartialBracketUndefinedError):
        sd.h_bracket(osc12, w1, w2)


def test_seminorm_pk_cases():
    inst = oscillator([1.0, 2.0, 3.0])
    z = lc.zero_vector(inst.N_spec)
    assert sd.seminorm_pk(inst, z, 3) == 0.0

    v = lc.AlgebraVector.of(inst.N_spec, [1.0, 1.0, 1.0])
    assert abs(sd.seminorm_pk(inst, v, 2) - np.sqrt(98.0)) < 1e-12

    inst2 = oscillator([1.0, 2.0])
    v2 = lc.AlgebraVector.of(inst2.N_spec, [1.0, 0.0])
    for k in (1, 2, 5):
        assert abs(sd.seminorm_pk(inst2, v2, k) - 1.0) < 1e-13


def test_seminorm_matches_closed_form():
    inst = oscillator([1.0, 2.0, 3.0, 4.0])
    rng = np.random.default_rng(13)
    for _ in range(20):
        v = lc.AlgebraVector.of(
            inst.N_spec, rng.standard_normal(4) + 1j * rng.standard_normal(4)
        )
        for k in range(1, 6):
            assert abs(
                sd.seminorm_pk(inst, v, k) - inst.closed_forms["p_k"](v, k)
            ) < 1e-12 * max(1.0, inst.closed_forms["p_k"](v, k))


def test_ck_ladder_bounded():
    ladder = oscillator_ladder([4, 8, 16, 32, 64, 128, 256], 2.0, -3.0)
    verdict = sd.ck_vector_diagnostic(ladder, 1)
    assert verdict.kind == "bounded"


def test_ck_ladder_diverging():
    ladder = oscillator_ladder([4, 8, 16, 32, 64, 128, 256], 2.0, -1.4)
    verdict = sd.ck_vector_diagnostic(ladder, 1)
    assert verdict.kind == "diverging"
    assert 1.0 <= verdict.exponent <= 1.2


def test_ck_ladder_zero_and_short():
    insts = [oscillator(np.arange(1, d + 1.0) ** 2) for d in (4, 8, 16, 32)]
    zeros = [(inst, lc.zero_vector(inst.N_spec)) for inst in insts]
    assert sd.ck_vector_diagnostic(zeros, 1).kind == "bounded"
    with pytest.raises(ValueError):
        sd.ck_vector_diagnostic(zeros[:3], 1)
