import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsf.constitutive import (SamplePlan, conductivity_eval, dissipation,
                              fluid_params, make_material, stress_eval,
                              validate_constitutive)
from nsf.errors import ConfigError, DomainError


def prototype(p, delta, nu=1.0, kappa=1.0):
    return fluid_params(p, delta, nu, kappa)


def test_newtonian_identity():
    # p = 2 collapses to S = nu * D for any delta
    D = np.diag([1.0, -1.0])
    for delta in (0.0, 1.0, 3.7):
        S = stress_eval(1.0, D, prototype(2.0, delta))
        np.testing.assert_allclose(S, D, rtol=0, atol=1e-15)


def test_zero_strain_gives_zero_stress():
    for p, delta in [(1.5, 0.0), (1.5, 1.0), (2.1, 0.0)]:
        S = stress_eval(0.7, np.zeros((3, 3)), prototype(p, delta))
        assert np.all(S == 0.0)


def test_shear_thinning_closed_form():
    # |D| = sqrt(2) for diag(1, -1), so the factor is (1 + sqrt(2))^(-1/2)
    D = np.diag([1.0, -1.0])
    S = stress_eval(1.0, D, prototype(1.5, 1.0))
    np.testing.assert_allclose(S, (1.0 + np.sqrt(2.0)) ** -0.5 * D, rtol=1e-15)


def test_dissipation_by_hand():
    D = np.diag([1.0, -1.0])
    assert dissipation(1.0, D, prototype(2.0, 0.0)) == pytest.approx(2.0, abs=1e-14)
    assert dissipation(1.0, np.zeros((2, 2)), prototype(1.8, 0.0)) == 0.0


@given(theta=st.floats(0.05, 50.0),
       entries=st.lists(st.floats(-3, 3), min_size=3, max_size=3),
       p=st.sampled_from([1.5, 1.8, 2.0, 2.1]),
       delta=st.sampled_from([0.0, 1.0]))
@settings(max_examples=200, deadline=None)
def test_dissipation_consistent_with_stress_contraction(theta, entries, p, delta):
    a, b, c = entries
    D = np.array([[a, c], [c, b]])
    params = prototype(p, delta)
    S = stress_eval(theta, D, params)
    direct = dissipation(theta, D, params)
    assert abs(direct - np.sum(S * D)) <= 1e-14 * (1.0 + abs(direct))


@given(theta=st.floats(0.05, 50.0), scale=st.floats(0.1, 10.0))
@settings(max_examples=50, deadline=None)
def test_theta_independence_for_constant_nu(theta, scale):
    D = scale * np.diag([1.0, 2.0, -3.0])
    params = prototype(1.7, 0.5)
    S1 = stress_eval(theta, D, params)
    S2 = stress_eval(1.0, D, params)
    np.testing.assert_array_equal(S1, S2)


def test_domain_errors():
    params = prototype(1.8, 1.0)
    with pytest.raises(DomainError):
        stress_eval(0.0, np.eye(2), params)
    with pytest.raises(DomainError):
        stress_eval(-1.0, np.eye(2), params)
    with pytest.raises(DomainError):
        stress_eval(1.0, np.array([[0.0, 1.0], [0.0, 0.0]]), params)
    with pytest.raises(DomainError):
        conductivity_eval(0.0, params)


def test_p_window_enforced():
    with pytest.raises(ConfigError):
        fluid_params(1.1, 1.0, 1.0, 1.0)
    with pytest.raises(ConfigError):
        fluid_params(2.3, 1.0, 1.0, 1.0)


def test_conductivity_families():
    params = fluid_params(1.8, 1.0, 1.0,
                          {"family": "bounded_rational", "base": 1.0, "gain": 1.0})
    assert conductivity_eval(5.0, fluid_params(1.8, 1.0, 1.0, 1.0)) == 1.0
    assert conductivity_eval(1.0, params) == pytest.approx(1.5, rel=1e-15)
    assert conductivity_eval(1e6, params) < 2.0 == params.kappa_hi
    assert params.kappa_lo <= conductivity_eval(0.3, params) <= params.kappa_hi


def test_tabulated_material_primitive_matches_quadrature():
    mat = make_material({"family": "tabulated", "s": [0.5, 1.0, 2.0, 4.0],
                         "values": [1.0, 1.5, 1.2, 2.0]})
    from scipy.integrate import quad
    for s in (0.3, 0.8, 1.7, 3.5, 6.0):
        ref, _ = quad(lambda z: float(mat(z)), 0.0, s,
                      points=[p for p in (0.5, 1.0, 2.0, 4.0) if p < s], limit=200)
        assert mat.primitive(s) == pytest.approx(ref, rel=1e-10)


def test_unknown_family_names_registry():
    with pytest.raises(ConfigError, match="registry"):
        make_material({"family": "exotic"})


def test_validator_accepts_prototype_and_fits_growth():
    params = prototype(1.8, 1.0)
    report = validate_constitutive(params, SamplePlan(n_samples=20_000))
    assert report.passed
    assert report.check("monotonicity").worst_margin >= -1e-12
    assert report.fitted_growth_constant <= params.nu_hi + 1e-12


def test_validator_flags_sign_flipped_law():
    params = prototype(1.8, 1.0)

    def flipped(theta, D, prm):
        return -stress_eval(theta, D, prm) if np.any(D) else np.zeros_like(D)

    report = validate_constitutive(params, SamplePlan(n_samples=5_000), law=flipped)
    assert not report.passed
    assert not report.check("monotonicity").passed
    assert report.check("monotonicity").worst_margin < -1e-6


def test_monotonicity_inner_product_zero_for_equal_args():
    report = validate_constitutive(prototype(1.6, 0.0), SamplePlan(n_samples=2_000))
    assert report.check("monotonicity_equal_args").worst_margin == 0.0
