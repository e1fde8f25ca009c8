"""Auxiliary functions G, H^alpha, f_alpha and the Lyapunov density.

G is the primitive of the conductivity (the Kirchhoff variable), H^alpha its
alpha-weighted inverse-power primitive from 1, and

    f_alpha(s, t) = s - t - (H^alpha(s) - H^alpha(t)) * G(t)**alpha

is a nonnegative convexity-based distance with f_alpha(t, t) = 0. The
Lyapunov density beta*|v|^2 + f_alpha(theta, theta_hat) measures the distance
of a state from the steady pair (0, theta_hat).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .constitutive import FluidParams
from .errors import ConfigError, DomainError

_GL_NODES, _GL_WEIGHTS = leggauss(80)


@dataclass(frozen=True)
class LyapunovParams:
    """Exponent alpha in (0, 1) (decay theory wants (1/2, 2/3]) and kinetic weight beta."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.beta > 0:
            raise ConfigError(f"beta must be positive, got {self.beta}")


def G_eval(s, params: FluidParams):
    """Primitive of the conductivity from 0; increasing, kappa_lo*s <= G <= kappa_hi*s."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise DomainError("G is defined for s >= 0")
    return params.kappa.primitive(s)


def H_alpha_eval(s, alpha, params: FluidParams):
    """Integral of G(z)**(-alpha) from 1 to s; H(1) = 0, strictly increasing."""
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise DomainError("H is defined for s > 0")
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if params.kappa.name == "constant":
        k = params.kappa.lo
        return k ** (-alpha) * (s ** (1.0 - alpha) - 1.0) / (1.0 - alpha)
    # smooth integrand away from 0, so one fixed high-order rule suffices
    half = 0.5 * (s - 1.0)
    mid = 0.5 * (s + 1.0)
    z = mid[..., None] + half[..., None] * _GL_NODES
    vals = G_eval(z, params) ** (-alpha)
    return half * np.einsum("...q,q->...", vals, _GL_WEIGHTS)


def f_alpha_eval(s, t, alpha, params: FluidParams):
    """f_alpha(s, t) >= 0 with equality iff s = t."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s <= 0) or np.any(t <= 0):
        raise DomainError("f_alpha is defined for s, t > 0")
    H_s = H_alpha_eval(s, alpha, params)
    H_t = H_alpha_eval(t, alpha, params)
    return s - t - (H_s - H_t) * G_eval(t, params) ** alpha


def d1_f_alpha(s, t, alpha, params: FluidParams):
    """Partial derivative of f_alpha in the first argument: 1 - (G(t)/G(s))**alpha."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    return 1.0 - (G_eval(t, params) / G_eval(s, params)) ** alpha


def lyapunov_density(v, theta, theta_hat, lp: LyapunovParams, params: FluidParams):
    """beta*|v|^2 + f_alpha(theta, theta_hat); zero iff v = 0 and theta = theta_hat."""
    v = np.asarray(v, dtype=float)
    vsq = np.sum(v * v, axis=-1) if v.ndim else v * v
    return lp.beta * vsq + f_alpha_eval(theta, theta_hat, lp.alpha, params)


@dataclass(frozen=True)
class ConvexitySamplePlan:
    n_samples: int = 100_000
    seed: int = 7
    lo: float = 0.5
    hi: float = 10.0


@dataclass
class ConvexityReport:
    alpha: float
    min_value: float
    argmin: tuple
    n_violations: int
    violations_head: list
    n_samples: int
    tol: float = -1e-10

    @property
    def passed(self) -> bool:
        return self.min_value >= self.tol


def check_f_convexity(alpha, params: FluidParams,
                      plan: ConvexitySamplePlan = ConvexitySamplePlan()) -> ConvexityReport:
    """Sample the square-root convexity defect of f_alpha.

    Evaluates f(s^2,t) - f(r^2,t) - 2 r d1f(r^2,t) (s-r) - (s-r)^2 at random
    (s, t, r) and reports the minimum. The sufficient condition for
    nonnegativity is alpha >= kappa_hi / (2 kappa_lo); smaller alpha may and
    typically does produce violations, which the report records.
    """
    rng = np.random.default_rng(plan.seed)
    s = rng.uniform(plan.lo, plan.hi, plan.n_samples)
    t = rng.uniform(plan.lo, plan.hi, plan.n_samples)
    r = rng.uniform(plan.lo, plan.hi, plan.n_samples)

    expr = (
        f_alpha_eval(s**2, t, alpha, params)
        - f_alpha_eval(r**2, t, alpha, params)
        - 2.0 * r * d1_f_alpha(r**2, t, alpha, params) * (s - r)
        - (s - r) ** 2
    )
    i_min = int(np.argmin(expr))
    bad = np.flatnonzero(expr < -1e-10)
    head = [
        {"s": float(s[i]), "t": float(t[i]), "r": float(r[i]), "value": float(expr[i])}
        for i in bad[:5]
    ]
    return ConvexityReport(
        alpha=float(alpha),
        min_value=float(expr[i_min]),
        argmin=(float(s[i_min]), float(t[i_min]), float(r[i_min])),
        n_violations=int(bad.size),
        violations_head=head,
        n_samples=plan.n_samples,
    )
