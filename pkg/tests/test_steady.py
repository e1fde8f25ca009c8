import numpy as np
import pytest
from scipy.optimize import brentq

from nsf.constitutive import fluid_params
from nsf.errors import ConfigError, DomainError
from nsf.quadrature import QuadratureGrid
from nsf.steady import (bilinear_boundary, constant_boundary, harmonic_boundary,
                        invert_G, kirchhoff_boundary, make_boundary,
                        solve_steady_temperature, verify_steady)

KAPPA_ONE = fluid_params(2.0, 1.0, 1.0, 1.0)
KAPPA_AFFINE = fluid_params(
    2.0, 1.0, 1.0, {"family": "affine", "intercept": 1.0, "slope": 1.0}
)


def test_constant_boundary_gives_constant_field():
    st = solve_steady_temperature(constant_boundary(1.4), KAPPA_ONE, 6, 6)
    rep = verify_steady(st, KAPPA_ONE)
    assert rep.worst_weak_residual <= 1e-13
    assert rep.min_theta == pytest.approx(1.4, abs=1e-13)
    assert rep.max_theta == pytest.approx(1.4, abs=1e-13)


def test_linear_harmonic_recovered_to_machine():
    st = solve_steady_temperature(bilinear_boundary(2.0, 1.0, -1.0), KAPPA_ONE, 8, 8)
    rep = verify_steady(st, KAPPA_ONE)
    assert rep.worst_weak_residual <= 1e-10
    x = np.linspace(0.05, 0.95, 7)
    y = np.linspace(0.05, 0.95, 7)
    X, Y = np.meshgrid(x, y)
    assert np.max(np.abs(st.theta(X, Y) - (2 + X - Y))) <= 1e-12


def test_invert_G_round_trips():
    for u in (0.1, 1.0, 2.7, 11.0):
        assert invert_G(u, KAPPA_ONE) == pytest.approx(u, rel=1e-14)
        s = invert_G(u, KAPPA_AFFINE)
        assert s + 0.5 * s * s == pytest.approx(u, rel=1e-12)


def test_invert_G_against_bisection_oracle():
    # root of s + s^2/2 = 4
    ref = brentq(lambda s: s + 0.5 * s * s - 4.0, 0.0, 4.0, xtol=1e-14)
    assert invert_G(4.0, KAPPA_AFFINE) == pytest.approx(ref, rel=1e-12)
    assert ref == pytest.approx(2.0, abs=1e-12)


def test_invert_G_rejects_out_of_range():
    with pytest.raises(DomainError):
        invert_G(-0.5, KAPPA_ONE)


def test_kirchhoff_oracle_exact_solution():
    # theta = G^{-1}(h) with h harmonic is the exact steady field
    coeffs = {"1": 3.0, "x2-y2": 0.5, "xy": 0.4, "x3-3xy2": 0.2}
    bd = kirchhoff_boundary(coeffs, KAPPA_AFFINE)
    st = solve_steady_temperature(bd, KAPPA_AFFINE, 16, 16)
    rep = verify_steady(st, KAPPA_AFFINE)
    assert rep.worst_weak_residual <= 1e-10

    quad = QuadratureGrid(40)
    h = (3.0 + 0.5 * (quad.X**2 - quad.Y**2) + 0.4 * quad.X * quad.Y
         + 0.2 * (quad.X**3 - 3 * quad.X * quad.Y**2))
    exact = invert_G(h, KAPPA_AFFINE)
    err = np.sqrt(quad.integrate((st.theta(quad.X, quad.Y) - exact) ** 2))
    assert err <= 1e-8


def test_quartic_harmonic_converges_with_modes():
    # Re(z^4) is not reproduced by the bilinear blend; the sine correction
    # must pick up the interior part, so the error decays with resolution
    bd = harmonic_boundary({"1": 4.0, "x4-6x2y2+y4": 0.3})
    quad = QuadratureGrid(48)
    h = 4.0 + 0.3 * (quad.X**4 - 6 * quad.X**2 * quad.Y**2 + quad.Y**4)
    errs = []
    for K in (4, 8, 16):
        st = solve_steady_temperature(bd, KAPPA_ONE, K, K)
        errs.append(np.sqrt(quad.integrate((st.theta(quad.X, quad.Y) - h) ** 2)))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-4


def test_bounds_follow_boundary_extremes():
    st = solve_steady_temperature(bilinear_boundary(1.0, 0.5, 0.25), KAPPA_ONE, 8, 8)
    rep = verify_steady(st, KAPPA_ONE)
    assert rep.theta_lo == pytest.approx(1.0, abs=1e-12)
    assert rep.theta_hi == pytest.approx(1.75, abs=1e-12)
    assert rep.min_theta >= rep.theta_lo - 1e-8
    assert rep.max_theta <= rep.theta_hi + 1e-8


def test_perturbed_field_shows_residual():
    st = solve_steady_temperature(constant_boundary(1.0), KAPPA_ONE, 4, 4)
    st.coeffs = st.coeffs.copy()
    st.coeffs[0] += 0.1  # inject a bubble mode
    rep = verify_steady(st, KAPPA_ONE)
    assert rep.worst_weak_residual > 1e-3


def test_positive_boundary_required():
    with pytest.raises((DomainError, ConfigError)):
        solve_steady_temperature(bilinear_boundary(0.5, -1.0), KAPPA_ONE, 4, 4)


def test_boundary_registry():
    assert make_boundary({"family": "constant", "value": 2.0}, KAPPA_ONE).name \
        == "constant"
    with pytest.raises(ConfigError, match="registry"):
        make_boundary({"family": "mystery"}, KAPPA_ONE)
    with pytest.raises(ConfigError):
        make_boundary({"family": "harmonic", "coeffs": {"x9": 1.0}}, KAPPA_ONE)
