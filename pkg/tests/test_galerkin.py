import numpy as np
import pytest

from nsf.constitutive import fluid_params
from nsf.errors import ConfigError, DomainError, PositivityFault
from nsf.galerkin import (GalerkinState, assemble_rhs, build_temperature_basis,
                          build_velocity_basis, evaluate_fields, quad_fields,
                          stress_at_quad)
from nsf.quadrature import QuadratureGrid, default_quad_order
from nsf.steady import constant_boundary, solve_steady_temperature

from conftest import build_setup


def test_mode_11_mass_closed_form(params_p2):
    quad, vb, _, _ = build_setup(params_p2, Mx=1, Kx=2)
    assert vb.M[0, 0] == pytest.approx(3 * np.pi**2 / 8, rel=1e-13)


def test_no_slip_on_boundary(params_p2):
    _, vb, _, _ = build_setup(params_p2, Mx=2, Kx=2)
    s = np.linspace(0.0, 1.0, 17)
    a = np.ones(vb.n_modes)
    for x, y in [(s, 0 * s), (s, 0 * s + 1), (0 * s, s), (0 * s + 1, s)]:
        v = vb.velocity_at(a, x, y)
        assert np.max(np.abs(v)) == 0.0


def test_divergence_free_pointwise(params_p2):
    _, vb, _, _ = build_setup(params_p2, Mx=3, Kx=2)
    rng = np.random.default_rng(5)
    pts = rng.uniform(0.02, 0.98, (100, 2))
    g = vb.gradient_at(rng.standard_normal(vb.n_modes), pts[:, 0], pts[:, 1])
    assert np.max(np.abs(g[..., 0, 0] + g[..., 1, 1])) <= 1e-13


def test_temperature_representation(params_p2):
    quad, vb, steady, tb = build_setup(params_p2, Mx=1, Kx=3)
    c = np.zeros(tb.n_modes)
    state = GalerkinState(0.0, np.zeros(vb.n_modes), c)
    f = quad_fields(state, vb, tb)
    np.testing.assert_allclose(f.theta, tb.theta_hat_q, rtol=0, atol=1e-14)

    # one sine mode of amplitude 1 over a unit steady field peaks at the center
    c[tb.modes.index((1, 1))] = 1.0
    state = GalerkinState(0.0, np.zeros(vb.n_modes), c)
    _, _, theta, _ = evaluate_fields(state, vb, tb, np.array([[0.5, 0.5]]))
    assert theta[0] == pytest.approx(2.0, rel=1e-13)


def test_boundary_data_attained(params_p2):
    _, vb, steady, tb = build_setup(params_p2, Mx=1, Kx=3)
    rng = np.random.default_rng(0)
    c = rng.standard_normal(tb.n_modes)
    s = np.linspace(0.0, 1.0, 9)
    edges = np.concatenate([
        np.stack([s, 0 * s], axis=1), np.stack([s, 0 * s + 1], axis=1),
        np.stack([0 * s, s], axis=1), np.stack([0 * s + 1, s], axis=1),
    ])
    state = GalerkinState(0.0, np.zeros(vb.n_modes), c)
    _, _, theta, _ = evaluate_fields(state, vb, tb, edges)
    bdata = steady.boundary.value(edges[:, 0], edges[:, 1])
    assert np.max(np.abs(theta - bdata)) <= 1e-12


def test_steady_pair_is_equilibrium(params_p18, setup_p18):
    quad, vb, steady, tb = setup_p18
    state = GalerkinState(0.0, np.zeros(vb.n_modes), np.zeros(tb.n_modes))
    F_v, F_t = assemble_rhs(state, vb, tb, params_p18)
    assert np.max(np.abs(F_v)) <= 1e-13
    assert np.max(np.abs(F_t)) <= 1e-13


def test_newtonian_single_mode_matches_stiffness(params_p2):
    quad, vb, steady, tb = build_setup(params_p2, Mx=1, Kx=2)
    a = np.array([0.37])
    state = GalerkinState(0.0, a, np.zeros(tb.n_modes))
    F_v, _ = assemble_rhs(state, vb, tb, params_p2)
    np.testing.assert_allclose(F_v, -vb.A2 @ a, rtol=1e-12, atol=1e-14)


def test_convection_energy_neutrality(params_p18, setup_p18):
    quad, vb, _, tb = setup_p18
    rng = np.random.default_rng(9)
    for _ in range(5):
        a = rng.standard_normal(vb.n_modes)
        state = GalerkinState(0.0, a, np.zeros(tb.n_modes))
        f = quad_fields(state, vb, tb)
        conv = np.einsum("p,pa,pb,jpab->j", quad.W2, f.v, f.v, vb.Gtab)
        assert abs(a @ conv) <= 1e-12 * max(1.0, np.sum(a * a) ** 1.5)


def test_temperature_convection_duality(params_p18, setup_p18):
    # int theta v . grad zeta  ==  - int zeta v . grad theta  (div v = 0)
    quad, vb, _, tb = setup_p18
    rng = np.random.default_rng(4)
    a = rng.standard_normal(vb.n_modes)
    c = 0.1 * rng.standard_normal(tb.n_modes)
    f = quad_fields(GalerkinState(0.0, a, c), vb, tb, check_positivity=False)
    direct = np.einsum("p,p,pc,jpc->j", quad.W2, f.theta, f.v, tb.Gztab)
    by_parts = -np.einsum("p,jp,pc,pc->j", quad.W2, tb.Ztab, f.v, f.grad_theta)
    assert np.max(np.abs(direct - by_parts)) <= 1e-11


def test_discrete_kinetic_identity(params_p18, setup_p18):
    # d/dt (a M a / 2) along the flow equals -int S:Dv (convection neutral)
    quad, vb, _, tb = setup_p18
    rng = np.random.default_rng(7)
    a = 0.3 * rng.standard_normal(vb.n_modes)
    state = GalerkinState(0.0, a, np.zeros(tb.n_modes))
    F_v, _ = assemble_rhs(state, vb, tb, params_p18)
    f = quad_fields(state, vb, tb)
    diss = quad.integrate(np.einsum("pab,pab->p",
                                    stress_at_quad(f, params_p18), f.D))
    assert a @ F_v == pytest.approx(-diss, rel=1e-11)


def test_mass_matrices_spd(params_p18, setup_p18):
    _, vb, _, tb = setup_p18
    np.linalg.cholesky(vb.M)
    np.linalg.cholesky(tb.M)
    assert vb.mass_condition_number < 1e3
    assert tb.mass_condition_number < 10.0


def test_evaluate_fields_basics(params_p18, setup_p18):
    _, vb, steady, tb = setup_p18
    state = GalerkinState(0.0, np.zeros(vb.n_modes), np.zeros(tb.n_modes))
    pts = np.array([[0.25, 0.5], [0.5, 0.5]])
    v, gv, theta, gth = evaluate_fields(state, vb, tb, pts)
    assert np.all(v == 0.0) and np.all(gv == 0.0)
    np.testing.assert_allclose(theta, steady.theta(pts[:, 0], pts[:, 1]),
                               rtol=1e-13)
    # stream mode (1,1) velocity vanishes at the center by symmetry
    a = np.zeros(vb.n_modes)
    a[vb.modes.index((1, 1))] = 1.0
    v, *_ = evaluate_fields(GalerkinState(0.0, a, state.c), vb, tb,
                            np.array([[0.5, 0.5]]))
    assert np.max(np.abs(v)) <= 1e-15


def test_evaluate_fields_domain_check(params_p18, setup_p18):
    _, vb, _, tb = setup_p18
    state = GalerkinState(0.0, np.zeros(vb.n_modes), np.zeros(tb.n_modes))
    with pytest.raises(DomainError):
        evaluate_fields(state, vb, tb, np.array([[1.2, 0.5]]))


def test_positivity_fault(params_p18, setup_p18):
    _, vb, _, tb = setup_p18
    c = np.zeros(tb.n_modes)
    c[0] = -10.0
    state = GalerkinState(0.0, np.zeros(vb.n_modes), c)
    with pytest.raises(PositivityFault):
        quad_fields(state, vb, tb)


def test_resolution_validation(params_p2):
    with pytest.raises(ConfigError):
        build_velocity_basis(0, 1)
    quad = QuadratureGrid(default_quad_order(2))
    steady = solve_steady_temperature(constant_boundary(1.0), params_p2, 2, 2, quad)
    with pytest.raises(ConfigError):
        build_temperature_basis(0, 2, steady, quad)


def test_quadrature_weights_sum_to_area():
    for q in (12, 20, 31):
        assert QuadratureGrid(q).W2.sum() == pytest.approx(1.0, rel=1e-14)
