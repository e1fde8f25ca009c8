"""Correction weights b(s, s_tilde) and their primitives B.

A correction weight with decay exponent gamma in (-1, 0) multiplies the
temperature balance so that, after adding the kinetic energy balance, all
boundary fluxes cancel (b = 1 where the temperature equals its boundary
value). The family must satisfy sign and growth conditions; this module
provides the prototype power family, a tabulated custom family, and a
validator that fits the growth constant and checks every condition on a grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import ConfigError, DomainError

# numerical slack on the lower temperature limit: solver trajectories may
# undershoot theta_lo by discretization noise and must still be auditable
_DOMAIN_RTOL = 1e-3


@dataclass(frozen=True)
class CorrectionFn:
    """Evaluators for b, d1 b, d2 b, B, d2 B on [theta_lo, inf) x [theta_lo, theta_hi]."""

    gamma: float
    theta_lo: float
    theta_hi: float
    b: Callable
    d1b: Callable
    d2b: Callable
    B: Callable
    d2B: Callable
    C: float | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (-1.0 < self.gamma < 0.0):
            raise ConfigError(f"gamma must lie in (-1, 0), got {self.gamma}")
        if not (0 < self.theta_lo <= self.theta_hi):
            raise ConfigError("correction bounds must satisfy 0 < theta_lo <= theta_hi")

    def _check_domain(self, s, s_tilde):
        s = np.asarray(s, dtype=float)
        s_tilde = np.asarray(s_tilde, dtype=float)
        lo = self.theta_lo * (1.0 - _DOMAIN_RTOL)
        if np.any(s < lo):
            raise DomainError(
                f"first argument below theta_lo={self.theta_lo}: min={s.min()}"
            )
        if np.any(s_tilde < lo) or np.any(s_tilde > self.theta_hi * (1 + _DOMAIN_RTOL)):
            raise DomainError(
                f"second argument outside [{self.theta_lo}, {self.theta_hi}]"
            )
        return s, s_tilde


def b_eval(fn: CorrectionFn, s, s_tilde):
    s, s_tilde = fn._check_domain(s, s_tilde)
    return fn.b(s, s_tilde)


def B_eval(fn: CorrectionFn, s, s_tilde):
    s, s_tilde = fn._check_domain(s, s_tilde)
    return fn.B(s, s_tilde)


def d1b_eval(fn: CorrectionFn, s, s_tilde):
    s, s_tilde = fn._check_domain(s, s_tilde)
    return fn.d1b(s, s_tilde)


def d2b_eval(fn: CorrectionFn, s, s_tilde):
    s, s_tilde = fn._check_domain(s, s_tilde)
    return fn.d2b(s, s_tilde)


def d2B_eval(fn: CorrectionFn, s, s_tilde):
    s, s_tilde = fn._check_domain(s, s_tilde)
    return fn.d2B(s, s_tilde)


# ---------------------------------------------------------------------------
# prototype family
# ---------------------------------------------------------------------------

def prototype_correction(alpha: float, theta_lo: float, theta_hi: float) -> CorrectionFn:
    """Power-law prototype b = (s_tilde/s)**alpha with gamma = -alpha.

    The primitive in the first argument is closed form:
    B(s, s_tilde) = s_tilde**alpha * (s**(1-alpha) - theta_lo**(1-alpha)) / (1-alpha).
    """
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    a = float(alpha)
    lo = float(theta_lo)

    def b(s, st):
        return (st / s) ** a

    def d1b(s, st):
        return -a * st**a * s ** (-a - 1.0)

    def d2b(s, st):
        return a * st ** (a - 1.0) * s ** (-a)

    def B(s, st):
        return st**a * (s ** (1.0 - a) - lo ** (1.0 - a)) / (1.0 - a)

    def d2B(s, st):
        return a * st ** (a - 1.0) * (s ** (1.0 - a) - lo ** (1.0 - a)) / (1.0 - a)

    return CorrectionFn(
        gamma=-a,
        theta_lo=lo,
        theta_hi=float(theta_hi),
        b=b,
        d1b=d1b,
        d2b=d2b,
        B=B,
        d2B=d2B,
        name="prototype",
        params={"alpha": a},
    )


def correction_from_table(alpha_like_gamma, theta_lo, theta_hi, s_grid, st_grid,
                          b_values) -> CorrectionFn:
    """Custom family from tabulated b samples (bilinear interpolation).

    Derivatives are central differences of the interpolant and B is computed
    by Gauss-Legendre quadrature from theta_lo, cached per second argument.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    st_grid = np.asarray(st_grid, dtype=float)
    b_values = np.asarray(b_values, dtype=float)
    if b_values.shape != (s_grid.size, st_grid.size):
        raise ConfigError("b_values must have shape (len(s_grid), len(st_grid))")

    def interp(s, st):
        s = np.asarray(s, dtype=float)
        st = np.asarray(st, dtype=float)
        # bilinear on the tensor grid, clamped
        si = np.clip(np.searchsorted(s_grid, s) - 1, 0, s_grid.size - 2)
        ti = np.clip(np.searchsorted(st_grid, st) - 1, 0, st_grid.size - 2)
        fs = np.clip((s - s_grid[si]) / (s_grid[si + 1] - s_grid[si]), 0, 1)
        ft = np.clip((st - st_grid[ti]) / (st_grid[ti + 1] - st_grid[ti]), 0, 1)
        v00 = b_values[si, ti]
        v10 = b_values[si + 1, ti]
        v01 = b_values[si, ti + 1]
        v11 = b_values[si + 1, ti + 1]
        return (v00 * (1 - fs) * (1 - ft) + v10 * fs * (1 - ft)
                + v01 * (1 - fs) * ft + v11 * fs * ft)

    hs = 1e-5 * max(1.0, float(theta_hi))

    def d1b(s, st):
        return (interp(s + hs, st) - interp(np.maximum(s - hs, theta_lo), st)) / (
            s + hs - np.maximum(s - hs, theta_lo)
        )

    def d2b(s, st):
        lo_c = np.maximum(st - hs, theta_lo)
        hi_c = np.minimum(st + hs, theta_hi)
        return (interp(s, hi_c) - interp(s, lo_c)) / (hi_c - lo_c)

    nodes, weights = leggauss(64)

    def B(s, st):
        s = np.asarray(s, dtype=float)
        st = np.asarray(st, dtype=float)
        half = 0.5 * (s - theta_lo)
        mid = 0.5 * (s + theta_lo)
        sig = mid[..., None] + half[..., None] * nodes
        stt = np.broadcast_to(st[..., None], sig.shape)
        return half * np.einsum("...q,q->...", interp(sig, stt), weights)

    def d2B(s, st):
        lo_c = np.maximum(st - hs, theta_lo)
        hi_c = np.minimum(st + hs, theta_hi)
        return (B(s, hi_c) - B(s, lo_c)) / (hi_c - lo_c)

    return CorrectionFn(
        gamma=float(alpha_like_gamma),
        theta_lo=float(theta_lo),
        theta_hi=float(theta_hi),
        b=interp,
        d1b=d1b,
        d2b=d2b,
        B=B,
        d2B=d2B,
        name="custom",
    )


def make_correction(spec, theta_lo, theta_hi) -> CorrectionFn:
    if isinstance(spec, CorrectionFn):
        return spec
    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError(f"correction spec must name a family, got {spec!r}")
    if spec["family"] == "prototype":
        return prototype_correction(spec["alpha"], theta_lo, theta_hi)
    if spec["family"] == "custom":
        return correction_from_table(
            spec["gamma"], theta_lo, theta_hi, spec["s_grid"], spec["st_grid"],
            spec["b_values"],
        )
    raise ConfigError(
        f"unknown correction family {spec['family']!r}; registry: ['prototype', 'custom']"
    )


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    n_s: int = 200
    n_st: int = 20
    s_max: float | None = None  # default: 10 * theta_hi


@dataclass
class CorrectionCheck:
    name: str
    worst: float
    threshold: float
    passed: bool


@dataclass
class CorrectionReport:
    checks: list
    fitted_C: float
    grid_shape: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


SIGN_TOL = 1e-12
FD_RTOL = 1e-6
QUAD_DUALITY_TOL = 1e-8

_GL_NODES, _GL_WEIGHTS = leggauss(64)


def _quad_B(fn: CorrectionFn, s, st):
    """Gauss-Legendre quadrature of b from theta_lo to s (vectorized)."""
    s = np.asarray(s, dtype=float)
    st = np.asarray(st, dtype=float)
    half = 0.5 * (s - fn.theta_lo)
    mid = 0.5 * (s + fn.theta_lo)
    sig = mid[..., None] + half[..., None] * _GL_NODES
    stt = np.broadcast_to(st[..., None], sig.shape)
    return half * np.einsum("...q,q->...", fn.b(sig, stt), _GL_WEIGHTS)


def validate_correction(fn: CorrectionFn, grid: GridSpec = GridSpec()) -> CorrectionReport:
    """Check every defining inequality of the correction family on a grid.

    The growth constant C is fitted (smallest constant making all growth
    bounds hold on the grid) and reported; sign and identity conditions and
    derivative consistency decide pass/fail.
    """
    s_max = grid.s_max if grid.s_max is not None else 10.0 * fn.theta_hi
    s = np.linspace(fn.theta_lo, s_max, grid.n_s)
    st = np.linspace(fn.theta_lo, fn.theta_hi, grid.n_st)
    S, ST = np.meshgrid(s, st, indexing="ij")

    bv = fn.b(S, ST)
    d1 = fn.d1b(S, ST)
    d2 = fn.d2b(S, ST)
    Bv = fn.B(S, ST)
    d2Bv = fn.d2B(S, ST)

    checks = []

    def add(name, worst, threshold, ok):
        checks.append(CorrectionCheck(name, float(worst), threshold, bool(ok)))

    # sign / identity conditions
    add("b_nonnegative", bv.min(), -SIGN_TOL, bv.min() >= -SIGN_TOL)
    diag = np.abs(fn.b(st, st) - 1.0).max()
    add("b_diagonal_is_one", diag, SIGN_TOL, diag <= SIGN_TOL)
    add("d1b_nonpositive", d1.max(), SIGN_TOL, d1.max() <= SIGN_TOL)
    b_lo = np.abs(fn.B(np.full_like(st, fn.theta_lo), st)).max()
    add("B_at_theta_lo_is_zero", b_lo, SIGN_TOL, b_lo <= SIGN_TOL)

    # fitted growth constant over all five growth bounds
    g = fn.gamma
    ratios = [
        np.max(bv / S**g),
        np.max(np.abs(d2) / S**g),
        np.max(np.abs(d1) / S ** (g - 1.0)),
        np.max(np.abs(Bv) / S ** (1.0 + g)),
        np.max(np.abs(d2Bv) / S ** (1.0 + g)),
    ]
    c_fit = float(max(ratios))
    add("growth_constant_finite", c_fit, np.inf, np.isfinite(c_fit))

    # derivative consistency against central differences; the comparison
    # points are clamped one step inside the domain so the stencil stays
    # centered (one-sided differences would cost an order of accuracy)
    h1 = 1e-6 * max(1.0, s_max)
    h2 = 1e-6 * max(1.0, fn.theta_hi)
    S_fd = np.maximum(S, fn.theta_lo + h1)
    ST_fd = np.clip(ST, fn.theta_lo + h2, fn.theta_hi - h2)

    fd1 = (fn.b(S_fd + h1, ST) - fn.b(S_fd - h1, ST)) / (2 * h1)
    d1_fd = fn.d1b(S_fd, ST)
    rel1 = np.max(np.abs(fd1 - d1_fd) / (1e-10 + np.abs(d1_fd)))
    add("d1b_matches_fd", rel1, FD_RTOL, rel1 <= FD_RTOL)

    fd2 = (fn.b(S, ST_fd + h2) - fn.b(S, ST_fd - h2)) / (2 * h2)
    d2_fd = fn.d2b(S, ST_fd)
    rel2 = np.max(np.abs(fd2 - d2_fd) / (1e-10 + np.abs(d2_fd)))
    add("d2b_matches_fd", rel2, FD_RTOL, rel2 <= FD_RTOL)

    # dB/ds must reproduce b itself
    fdB = (fn.B(S_fd + h1, ST) - fn.B(S_fd - h1, ST)) / (2 * h1)
    b_fd = fn.b(S_fd, ST)
    relB = np.max(np.abs(fdB - b_fd) / (1e-10 + np.abs(b_fd)))
    add("dB_ds_matches_b", relB, FD_RTOL, relB <= FD_RTOL)

    fd2B = (fn.B(S, ST_fd + h2) - fn.B(S, ST_fd - h2)) / (2 * h2)
    d2B_fd = fn.d2B(S, ST_fd)
    rel2B = np.max(np.abs(fd2B - d2B_fd) / (1e-10 + np.abs(d2B_fd)))
    add("d2B_matches_fd", rel2B, FD_RTOL, rel2B <= FD_RTOL)

    # quadrature duality: B equals the integral of b from theta_lo
    Bq = _quad_B(fn, S, ST)
    dual = np.max(np.abs(Bv - Bq) / (1.0 + np.abs(Bv)))
    add("B_matches_quadrature_of_b", dual, QUAD_DUALITY_TOL,
        dual <= QUAD_DUALITY_TOL)

    return CorrectionReport(checks=checks, fitted_C=c_fit, grid_shape=S.shape)
