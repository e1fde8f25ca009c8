import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from nsf.constitutive import fluid_params
from nsf.errors import ConfigError, DomainError
from nsf.lyapunov import (ConvexitySamplePlan, LyapunovParams, G_eval,
                          H_alpha_eval, check_f_convexity, d1_f_alpha,
                          f_alpha_eval, lyapunov_density)

KAPPA_ONE = fluid_params(1.8, 1.0, 1.0, 1.0)
KAPPA_RATIONAL = fluid_params(
    1.8, 1.0, 1.0, {"family": "bounded_rational", "base": 1.0, "gain": 1.0}
)


def test_G_identity_conductivity():
    assert G_eval(2.0, KAPPA_ONE) == 2.0
    assert G_eval(0.0, KAPPA_ONE) == 0.0


def test_G_rational_closed_form():
    # integral of 1 + s/(1+s) from 0 to 1 is 2 - ln 2
    assert G_eval(1.0, KAPPA_RATIONAL) == pytest.approx(2.0 - np.log(2.0), rel=1e-14)


@given(s=st.floats(0.0, 100.0))
@settings(max_examples=200, deadline=None)
def test_G_bounds(s):
    g = float(G_eval(s, KAPPA_RATIONAL))
    assert KAPPA_RATIONAL.kappa_lo * s - 1e-12 <= g <= KAPPA_RATIONAL.kappa_hi * s + 1e-12


def test_G_rejects_negative():
    with pytest.raises(DomainError):
        G_eval(-1.0, KAPPA_ONE)


def test_H_closed_forms():
    assert H_alpha_eval(1.0, 0.5, KAPPA_ONE) == 0.0
    assert H_alpha_eval(4.0, 0.5, KAPPA_ONE) == pytest.approx(2.0, rel=1e-14)
    assert H_alpha_eval(0.25, 0.5, KAPPA_ONE) == pytest.approx(-1.0, rel=1e-14)


@pytest.mark.parametrize("s", [0.3, 0.9, 2.5, 7.0])
@pytest.mark.parametrize("alpha", [0.55, 0.66])
def test_H_quadrature_against_scipy(s, alpha):
    ref, _ = quad(lambda z: float(G_eval(z, KAPPA_RATIONAL)) ** -alpha, 1.0, s)
    assert H_alpha_eval(s, alpha, KAPPA_RATIONAL) == pytest.approx(ref, rel=1e-12)


def test_f_examples():
    assert f_alpha_eval(1.7, 1.7, 0.5, KAPPA_ONE) == 0.0
    # kappa = 1, alpha = 1/2: f(4, 1) = 4 - 1 - (2 - 0) * 1 = 1
    assert f_alpha_eval(4.0, 1.0, 0.5, KAPPA_ONE) == pytest.approx(1.0, rel=1e-14)


@given(s=st.floats(0.5, 10.0), t=st.floats(0.5, 10.0),
       alpha=st.sampled_from([0.5, 0.6, 0.66]))
@settings(max_examples=300, deadline=None)
def test_f_nonnegative(s, t, alpha):
    assert f_alpha_eval(s, t, alpha, KAPPA_RATIONAL) >= -1e-12


def test_d1_f_matches_finite_differences():
    rng = np.random.default_rng(1)
    s = rng.uniform(0.6, 8.0, 50)
    t = rng.uniform(0.6, 8.0, 50)
    h = 1e-6
    fd = (f_alpha_eval(s + h, t, 0.6, KAPPA_RATIONAL)
          - f_alpha_eval(s - h, t, 0.6, KAPPA_RATIONAL)) / (2 * h)
    exact = d1_f_alpha(s, t, 0.6, KAPPA_RATIONAL)
    assert np.max(np.abs(fd - exact) / (1e-10 + np.abs(exact))) < 1e-6


def test_lyapunov_density_examples():
    lp = LyapunovParams(0.5, 2.0)
    assert lyapunov_density(np.zeros(2), 1.3, 1.3, lp, KAPPA_ONE) == 0.0
    assert lyapunov_density(np.array([1.0, 0.0]), 1.3, 1.3, lp, KAPPA_ONE) \
        == pytest.approx(2.0, rel=1e-15)
    assert lyapunov_density(np.zeros(2), 4.0, 1.0, lp, KAPPA_ONE) \
        == pytest.approx(1.0, rel=1e-14)


@given(v1=st.floats(-2, 2), v2=st.floats(-2, 2), th1=st.floats(0.5, 8),
       th2=st.floats(0.5, 8))
@settings(max_examples=200, deadline=None)
def test_density_midpoint_convexity(v1, v2, th1, th2):
    lp = LyapunovParams(0.6, 1.5)
    th_hat = 1.2
    va = np.array([v1, 0.0])
    vb = np.array([v2, 0.0])
    mid_v = lyapunov_density(0.5 * (va + vb), th_hat, th_hat, lp, KAPPA_ONE)
    avg_v = 0.5 * (lyapunov_density(va, th_hat, th_hat, lp, KAPPA_ONE)
                   + lyapunov_density(vb, th_hat, th_hat, lp, KAPPA_ONE))
    assert mid_v <= avg_v + 1e-12
    mid_t = lyapunov_density(np.zeros(2), 0.5 * (th1 + th2), th_hat, lp, KAPPA_ONE)
    avg_t = 0.5 * (lyapunov_density(np.zeros(2), th1, th_hat, lp, KAPPA_ONE)
                   + lyapunov_density(np.zeros(2), th2, th_hat, lp, KAPPA_ONE))
    assert mid_t <= avg_t + 1e-12


def test_params_validation():
    with pytest.raises(ConfigError):
        LyapunovParams(1.5, 1.0)
    with pytest.raises(ConfigError):
        LyapunovParams(0.6, 0.0)


def test_convexity_zero_at_equal_arguments():
    # s = r makes the defect vanish identically
    rng = np.random.default_rng(0)
    for _ in range(20):
        s = r = rng.uniform(0.5, 5.0)
        t = rng.uniform(0.5, 5.0)
        val = (f_alpha_eval(s**2, t, 0.6, KAPPA_ONE)
               - f_alpha_eval(r**2, t, 0.6, KAPPA_ONE)
               - 2 * r * d1_f_alpha(r**2, t, 0.6, KAPPA_ONE) * (s - r)
               - (s - r) ** 2)
        assert abs(val) <= 1e-12


def test_convexity_sampler_passes_above_half():
    report = check_f_convexity(0.6, KAPPA_ONE, ConvexitySamplePlan(n_samples=30_000))
    assert report.passed and report.n_violations == 0


def test_convexity_sampler_finds_violations_below_half():
    report = check_f_convexity(0.4, KAPPA_ONE, ConvexitySamplePlan(n_samples=30_000))
    assert not report.passed
    assert report.n_violations > 0
    assert report.violations_head
