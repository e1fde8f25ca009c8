"""Power-law Cauchy stress, bounded heat conductivity, and their validators.

The stress law is the shear-dependent prototype

    S(theta, D) = nu(theta) * (delta + |D|)**(p-2) * D,

with |D| the Frobenius norm of the symmetric velocity gradient. The scalar
material functions nu and kappa come from a small registry of closed-form
families so that configurations stay declarative and the validators can fit
tight bounds.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, DomainError


# ---------------------------------------------------------------------------
# scalar material functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MaterialFn:
    """A positive scalar function of temperature with known bounds.

    ``antiderivative`` is the exact primitive from 0, used by the Kirchhoff
    transform; ``lo``/``hi`` bound the function on its operating range.
    """

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    antiderivative: Callable[[np.ndarray], np.ndarray]
    lo: float
    hi: float
    params: dict = field(default_factory=dict)

    def __call__(self, s):
        return self.fn(np.asarray(s, dtype=float))

    def primitive(self, s):
        return self.antiderivative(np.asarray(s, dtype=float))


def constant_material(value: float) -> MaterialFn:
    if value <= 0:
        raise ConfigError(f"constant material value must be positive, got {value}")
    v = float(value)
    return MaterialFn(
        name="constant",
        fn=lambda s: np.full_like(np.asarray(s, dtype=float), v),
        antiderivative=lambda s: v * np.asarray(s, dtype=float),
        lo=v,
        hi=v,
        params={"value": v},
    )


def bounded_rational_material(base: float, gain: float) -> MaterialFn:
    """s -> base + gain*s/(1+s); bounded between base and base+gain."""
    if base <= 0 or gain < 0:
        raise ConfigError("bounded_rational needs base > 0 and gain >= 0")
    b, g = float(base), float(gain)
    return MaterialFn(
        name="bounded_rational",
        fn=lambda s: b + g * s / (1.0 + s),
        antiderivative=lambda s: b * s + g * (s - np.log1p(s)),
        lo=b,
        hi=b + g,
        params={"base": b, "gain": g},
    )


def affine_material(intercept: float, slope: float, s_max: float = 50.0) -> MaterialFn:
    """s -> intercept + slope*s on the declared operating range [0, s_max].

    Unbounded on (0, inf); the registry admits it for Kirchhoff-transform
    oracles where an exact quadratic primitive is wanted, with bounds declared
    on the operating range only.
    """
    if intercept <= 0 or slope < 0:
        raise ConfigError("affine needs intercept > 0 and slope >= 0")
    a, b = float(intercept), float(slope)
    return MaterialFn(
        name="affine",
        fn=lambda s: a + b * s,
        antiderivative=lambda s: a * s + 0.5 * b * s * s,
        lo=a,
        hi=a + b * float(s_max),
        params={"intercept": a, "slope": b, "s_max": float(s_max)},
    )


def tabulated_material(s_points, values) -> MaterialFn:
    """Piecewise-linear interpolation of (s, value) samples, clamped at ends."""
    s_points = np.asarray(s_points, dtype=float)
    values = np.asarray(values, dtype=float)
    if s_points.ndim != 1 or s_points.shape != values.shape or s_points.size < 2:
        raise ConfigError("tabulated material needs matching 1-d sample arrays")
    if np.any(np.diff(s_points) <= 0):
        raise ConfigError("tabulated material sample points must be increasing")
    if np.any(values <= 0):
        raise ConfigError("tabulated material values must be positive")

    # cumulative exact integral of the clamped piecewise-linear interpolant
    seg = 0.5 * (values[1:] + values[:-1]) * np.diff(s_points)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    s0, sN = s_points[0], s_points[-1]
    v0, vN = values[0], values[-1]

    def fn(s):
        return np.interp(s, s_points, values)

    def primitive(s):
        # \int_0^s with the clamped-extension convention at both ends;
        # interp of `cum` is exact only at the sample points, so refine the
        # in-range part with the local trapezoid correction
        s = np.asarray(s, dtype=float)
        sc = np.clip(s, s0, sN)
        idx = np.clip(np.searchsorted(s_points, sc, side="right") - 1, 0,
                      s_points.size - 2)
        ds = sc - s_points[idx]
        slope = (values[idx + 1] - values[idx]) / (s_points[idx + 1] - s_points[idx])
        mid = cum[idx] + values[idx] * ds + 0.5 * slope * ds * ds
        return v0 * np.minimum(s, s0) + mid + vN * np.maximum(s - sN, 0.0)

    return MaterialFn(
        name="tabulated",
        fn=fn,
        antiderivative=primitive,
        lo=float(values.min()),
        hi=float(values.max()),
        params={"s": s_points.tolist(), "values": values.tolist()},
    )


_MATERIAL_FAMILIES = {
    "constant": lambda spec: constant_material(spec["value"]),
    "bounded_rational": lambda spec: bounded_rational_material(
        spec["base"], spec["gain"]
    ),
    "affine": lambda spec: affine_material(
        spec["intercept"], spec["slope"], spec.get("s_max", 50.0)
    ),
    "tabulated": lambda spec: tabulated_material(spec["s"], spec["values"]),
}


def make_material(spec) -> MaterialFn:
    """Build a MaterialFn from a config mapping {"family": ..., params...}."""
    if isinstance(spec, MaterialFn):
        return spec
    if isinstance(spec, (int, float)):
        return constant_material(float(spec))
    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError(f"material spec must name a family, got {spec!r}")
    family = spec["family"]
    if family not in _MATERIAL_FAMILIES:
        raise ConfigError(
            f"unknown material family {family!r}; registry: "
            f"{sorted(_MATERIAL_FAMILIES)}"
        )
    try:
        return _MATERIAL_FAMILIES[family](spec)
    except KeyError as exc:
        raise ConfigError(f"material family {family!r} missing parameter {exc}") from exc


# ---------------------------------------------------------------------------
# fluid parameters
# ---------------------------------------------------------------------------

P_WINDOW = (6.0 / 5.0, 11.0 / 5.0)


@dataclass(frozen=True)
class FluidParams:
    """Constitutive data: exponent p, offset delta, nu(theta), kappa(theta)."""

    p: float
    delta: float
    nu: MaterialFn
    kappa: MaterialFn
    kappa_lo: float
    kappa_hi: float
    nu_lo: float
    nu_hi: float

    def __post_init__(self):
        if not (P_WINDOW[0] < self.p < P_WINDOW[1]):
            raise ConfigError(
                f"exponent p={self.p} outside admissible window "
                f"({P_WINDOW[0]:.2f}, {P_WINDOW[1]:.2f})"
            )
        if self.delta < 0:
            raise ConfigError(f"offset delta must be >= 0, got {self.delta}")
        if not (0 < self.kappa_lo <= self.kappa_hi):
            raise ConfigError("conductivity bounds must satisfy 0 < lo <= hi")
        if not (0 < self.nu_lo <= self.nu_hi):
            raise ConfigError("viscosity bounds must satisfy 0 < lo <= hi")


def fluid_params(p, delta, nu, kappa) -> FluidParams:
    """Assemble FluidParams, taking bounds from the material registry."""
    nu = make_material(nu)
    kappa = make_material(kappa)
    return FluidParams(
        p=float(p),
        delta=float(delta),
        nu=nu,
        kappa=kappa,
        kappa_lo=kappa.lo,
        kappa_hi=kappa.hi,
        nu_lo=nu.lo,
        nu_hi=nu.hi,
    )


# ---------------------------------------------------------------------------
# stress law evaluation
# ---------------------------------------------------------------------------

def _require_symmetric(D: np.ndarray) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1] or D.shape[0] not in (2, 3):
        raise DomainError(f"D must be a 2x2 or 3x3 matrix, got shape {D.shape}")
    if not np.array_equal(D, D.T):
        raise DomainError("D must be exactly symmetric")
    return D


def _require_positive_theta(theta) -> float:
    theta = float(theta)
    if not theta > 0:
        raise DomainError(f"temperature must be positive, got {theta}")
    return theta


def stress_factor(theta, norm_d, params: FluidParams):
    """nu(theta)*(delta+|D|)**(p-2), with the delta=0, D=0 case extended by 0.

    Vectorized over broadcastable ``theta`` and ``norm_d``; the returned
    factor is meant to multiply D, so a zero at |D|=0 gives S=0.
    """
    theta = np.asarray(theta, dtype=float)
    norm_d = np.asarray(norm_d, dtype=float)
    base = params.delta + norm_d
    safe = np.where(base > 0, base, 1.0)
    fac = params.nu(theta) * safe ** (params.p - 2.0)
    return np.where(norm_d > 0, fac, np.where(base > 0, fac, 0.0))


def stress_eval(theta, D, params: FluidParams) -> np.ndarray:
    """Cauchy stress S(theta, D) for a single symmetric tensor D."""
    theta = _require_positive_theta(theta)
    D = _require_symmetric(D)
    norm_d = float(np.sqrt(np.sum(D * D)))
    if norm_d == 0.0:
        return np.zeros_like(D)
    return float(stress_factor(theta, norm_d, params)) * D


def dissipation(theta, D, params: FluidParams) -> float:
    """S(theta, D):D, evaluated through the scalar closed form."""
    theta = _require_positive_theta(theta)
    D = _require_symmetric(D)
    norm_d = float(np.sqrt(np.sum(D * D)))
    if norm_d == 0.0:
        return 0.0
    return float(stress_factor(theta, norm_d, params)) * norm_d**2


def conductivity_eval(theta, params: FluidParams) -> float:
    theta = _require_positive_theta(theta)
    return float(params.kappa(theta))


# ---------------------------------------------------------------------------
# randomized structural validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SamplePlan:
    """Seeded sampling plan for the constitutive validator."""

    n_samples: int = 100_000
    seed: int = 2024
    theta_range: tuple = (0.1, 10.0)
    d_scale: float = 3.0
    dim: int = 3


@dataclass
class CheckResult:
    name: str
    worst_margin: float
    threshold: float
    passed: bool


@dataclass
class ConstitutiveReport:
    checks: list
    fitted_growth_constant: float
    n_samples: int
    seed: int

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _random_symmetric(rng, n, dim, scale):
    A = rng.standard_normal((n, dim, dim))
    D = 0.5 * (A + np.transpose(A, (0, 2, 1)))
    # spread magnitudes over several decades to probe both branches of the
    # power law
    mag = 10.0 ** rng.uniform(-3, np.log10(scale), size=(n, 1, 1))
    return D * mag


def _law_batch(law, theta, D, params):
    if law is not None:
        return np.stack([law(t, d, params) for t, d in zip(theta, D)])
    norm_d = np.sqrt(np.einsum("nij,nij->n", D, D))
    fac = stress_factor(theta, norm_d, params)
    return fac[:, None, None] * D


VIOLATION_TOL = -1e-12


def validate_constitutive(params: FluidParams, plan: SamplePlan = SamplePlan(),
                          law=None) -> ConstitutiveReport:
    """Sample the structural conditions on the stress law and report margins.

    Checks: zero stress at D=0, coercivity with constant nu_lo, monotonicity
    in D, and the growth bound with a fitted constant (compared against
    nu_hi). ``law`` overrides the prototype, e.g. to probe broken laws.
    """
    rng = np.random.default_rng(plan.seed)
    n = plan.n_samples
    theta = rng.uniform(*plan.theta_range, size=n)
    D1 = _random_symmetric(rng, n, plan.dim, plan.d_scale)
    D2 = _random_symmetric(rng, n, plan.dim, plan.d_scale)

    S1 = _law_batch(law, theta, D1, params)
    S2 = _law_batch(law, theta, D2, params)
    nd1 = np.sqrt(np.einsum("nij,nij->n", D1, D1))

    checks = []

    # |S(theta, 0)| = 0
    zeroS = _law_batch(law, theta[:64], np.zeros((64, plan.dim, plan.dim)), params)
    zero_margin = float(np.max(np.sqrt(np.einsum("nij,nij->n", zeroS, zeroS))))
    checks.append(CheckResult("zero_at_zero", zero_margin, 1e-14,
                              zero_margin <= 1e-14))

    # coercivity: S:D >= nu_lo*(delta+|D|)^(p-2)*|D|^2
    sd = np.einsum("nij,nij->n", S1, D1)
    lower = params.nu_lo * (params.delta + nd1) ** (params.p - 2.0) * nd1**2
    coer_margin = float(np.min(sd - lower))
    checks.append(CheckResult("coercivity", coer_margin, VIOLATION_TOL,
                              coer_margin >= VIOLATION_TOL))

    # monotonicity: (S1-S2):(D1-D2) >= 0
    mono = np.einsum("nij,nij->n", S1 - S2, D1 - D2)
    mono_margin = float(np.min(mono))
    checks.append(CheckResult("monotonicity", mono_margin, VIOLATION_TOL,
                              mono_margin >= VIOLATION_TOL))

    # equal arguments give exactly zero
    Sd = _law_batch(law, theta[:64], D1[:64], params)
    mono0 = float(np.max(np.abs(np.einsum("nij,nij->n", Sd - Sd, D1[:64] - D1[:64]))))
    checks.append(CheckResult("monotonicity_equal_args", mono0, 0.0, mono0 == 0.0))

    # growth: fit the smallest constant with |S| <= C*(delta+|D|)^(p-1)
    normS = np.sqrt(np.einsum("nij,nij->n", S1, S1))
    denom = (params.delta + nd1) ** (params.p - 1.0)
    c_fit = float(np.max(normS / denom))
    growth_margin = params.nu_hi - c_fit
    checks.append(CheckResult("growth_constant_vs_nu_hi", growth_margin,
                              VIOLATION_TOL, growth_margin >= VIOLATION_TOL))

    return ConstitutiveReport(checks=checks, fitted_growth_constant=c_fit,
                              n_samples=n, seed=plan.seed)
