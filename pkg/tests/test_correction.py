import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsf.correction import (CorrectionFn, GridSpec, B_eval, b_eval, d1b_eval,
                            d2b_eval, prototype_correction, validate_correction)
from nsf.errors import DomainError


@pytest.fixture(scope="module")
def proto():
    return prototype_correction(0.5, theta_lo=1.0, theta_hi=2.0)


def test_prototype_point_values(proto):
    assert b_eval(proto, 4.0, 1.0) == pytest.approx(0.5, rel=1e-15)
    assert B_eval(proto, 4.0, 1.0) == pytest.approx(2.0, rel=1e-15)  # 2(sqrt4 - sqrt1)
    assert d1b_eval(proto, 4.0, 1.0) == pytest.approx(-0.0625, rel=1e-15)


def test_diagonal_is_exactly_one(proto):
    for st_ in (1.0, 1.5, 2.0):
        assert b_eval(proto, st_, st_) == 1.0


def test_d2b_on_diagonal_is_alpha_over_s(proto):
    for st_ in (1.0, 1.3, 2.0):
        assert d2b_eval(proto, st_, st_) == pytest.approx(0.5 / st_, rel=1e-14)


def test_B_vanishes_at_lower_limit(proto):
    for st_ in (1.0, 1.5, 2.0):
        assert B_eval(proto, 1.0, st_) == 0.0


def test_gamma_is_minus_alpha():
    fn = prototype_correction(0.37, 1.0, 2.0)
    assert fn.gamma == -0.37


def test_alpha_domain():
    with pytest.raises(DomainError):
        prototype_correction(1.0, 1.0, 2.0)
    with pytest.raises(DomainError):
        prototype_correction(0.0, 1.0, 2.0)


def test_arguments_below_theta_lo_rejected(proto):
    with pytest.raises(DomainError):
        b_eval(proto, 0.5, 1.5)
    with pytest.raises(DomainError):
        B_eval(proto, 2.0, 0.5)


@given(s1=st.floats(1.0, 20.0), ds=st.floats(0.0, 10.0), st_=st.floats(1.0, 2.0))
@settings(max_examples=200, deadline=None)
def test_monotone_decay_in_first_argument(proto, s1, ds, st_):
    assert b_eval(proto, s1 + ds, st_) <= b_eval(proto, s1, st_) + 1e-15


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.66, 0.9])
def test_validator_accepts_prototype(alpha):
    fn = prototype_correction(alpha, 1.0, 2.0)
    report = validate_correction(fn, GridSpec())
    assert report.passed, [c.name for c in report.checks if not c.passed]
    assert np.isfinite(report.fitted_C) and report.fitted_C > 0


def _mutant_increasing(alpha=0.5, lo=1.0, hi=2.0):
    base = prototype_correction(alpha, lo, hi)
    # b increasing in s: flips the sign condition on the first derivative
    return CorrectionFn(
        gamma=base.gamma, theta_lo=lo, theta_hi=hi,
        b=lambda s, t: (np.asarray(s) / np.asarray(t)) ** alpha * 0.0
        + (np.minimum(s, 10 * hi) / hi) ** alpha,
        d1b=lambda s, t: alpha * np.asarray(s) ** (alpha - 1) / hi**alpha,
        d2b=base.d2b, B=base.B, d2B=base.d2B, name="mutant-increasing",
    )


def _mutant_diagonal_two(alpha=0.5, lo=1.0, hi=2.0):
    base = prototype_correction(alpha, lo, hi)
    return CorrectionFn(
        gamma=base.gamma, theta_lo=lo, theta_hi=hi,
        b=lambda s, t: 2.0 * base.b(s, t),
        d1b=lambda s, t: 2.0 * base.d1b(s, t),
        d2b=lambda s, t: 2.0 * base.d2b(s, t),
        B=lambda s, t: 2.0 * base.B(s, t),
        d2B=lambda s, t: 2.0 * base.d2B(s, t),
        name="mutant-diagonal",
    )


def test_validator_flags_increasing_mutant():
    report = validate_correction(_mutant_increasing(), GridSpec())
    assert not report.passed
    assert not report.check("d1b_nonpositive").passed


def test_validator_flags_wrong_diagonal_mutant():
    report = validate_correction(_mutant_diagonal_two(), GridSpec())
    assert not report.passed
    assert not report.check("b_diagonal_is_one").passed


@given(s=st.floats(1.0, 15.0), st_=st.floats(1.0, 2.0))
@settings(max_examples=100, deadline=None)
def test_quadrature_duality(proto, s, st_):
    from nsf.correction import _quad_B
    B = B_eval(proto, s, st_)
    Bq = _quad_B(proto, np.asarray(s), np.asarray(st_))
    assert abs(B - Bq) <= 1e-8 * (1.0 + abs(B))
