"""Steady temperature solve on the unit square via the Kirchhoff transform.

The steady field solves div(kappa(theta) grad theta) = 0 weakly with Dirichlet
data. Substituting u = G(theta), with G the primitive of kappa, turns this
into the Laplace equation for u with boundary data G(g). The solve uses a
bilinear-blend (Coons) lifting of the transformed boundary data plus a
Galerkin correction in the tensor sine basis, then inverts G pointwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .constitutive import FluidParams
from .errors import ConfigError, DomainError, SolverError
from .lyapunov import G_eval
from .quadrature import QuadratureGrid, default_quad_order


# ---------------------------------------------------------------------------
# boundary data families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryData:
    """Continuous boundary temperature, given as a globally defined field."""

    name: str
    value: Callable
    grad: Callable
    params: dict = field(default_factory=dict)


def constant_boundary(value: float) -> BoundaryData:
    v = float(value)
    if v <= 0:
        raise ConfigError("boundary temperature must be positive")
    return BoundaryData(
        "constant",
        lambda x, y: np.full_like(np.asarray(x, dtype=float), v),
        lambda x, y: np.zeros(np.shape(x) + (2,)),
        {"value": v},
    )


def bilinear_boundary(a, b=0.0, c=0.0, d=0.0) -> BoundaryData:
    """Trace of a + b*x + c*y + d*x*y."""
    a, b, c, d = map(float, (a, b, c, d))

    def value(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return a + b * x + c * y + d * x * y

    def grad(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.stack([b + d * y, c + d * x], axis=-1)

    return BoundaryData("bilinear", value, grad, {"a": a, "b": b, "c": c, "d": d})


# harmonic polynomial basis: real/imaginary parts of (x + i y)^k, k = 0..4
_HARMONIC_TERMS = {
    "1": (lambda x, y: np.ones_like(x), lambda x, y: (0 * x, 0 * x)),
    "x": (lambda x, y: x, lambda x, y: (np.ones_like(x), 0 * x)),
    "y": (lambda x, y: y, lambda x, y: (0 * x, np.ones_like(x))),
    "x2-y2": (lambda x, y: x * x - y * y, lambda x, y: (2 * x, -2 * y)),
    "xy": (lambda x, y: x * y, lambda x, y: (y, x)),
    "x3-3xy2": (
        lambda x, y: x**3 - 3 * x * y * y,
        lambda x, y: (3 * x * x - 3 * y * y, -6 * x * y),
    ),
    "3x2y-y3": (
        lambda x, y: 3 * x * x * y - y**3,
        lambda x, y: (6 * x * y, 3 * x * x - 3 * y * y),
    ),
    "x4-6x2y2+y4": (
        lambda x, y: x**4 - 6 * x * x * y * y + y**4,
        lambda x, y: (4 * x**3 - 12 * x * y * y, -12 * x * x * y + 4 * y**3),
    ),
    "4x3y-4xy3": (
        lambda x, y: 4 * x**3 * y - 4 * x * y**3,
        lambda x, y: (12 * x * x * y - 4 * y**3, 4 * x**3 - 12 * x * y * y),
    ),
}


def _harmonic_field(coeffs: dict):
    for key in coeffs:
        if key not in _HARMONIC_TERMS:
            raise ConfigError(
                f"unknown harmonic term {key!r}; available: {sorted(_HARMONIC_TERMS)}"
            )

    def value(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(x)
        for key, c in coeffs.items():
            out = out + c * _HARMONIC_TERMS[key][0](x, y)
        return out

    def grad(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        gx = np.zeros_like(x)
        gy = np.zeros_like(x)
        for key, c in coeffs.items():
            tx, ty = _HARMONIC_TERMS[key][1](x, y)
            gx = gx + c * tx
            gy = gy + c * ty
        return np.stack([gx, gy], axis=-1)

    return value, grad


def harmonic_boundary(coeffs: dict) -> BoundaryData:
    """Trace of a harmonic polynomial (coefficients over a fixed term basis)."""
    value, grad = _harmonic_field(dict(coeffs))
    return BoundaryData("harmonic", value, grad, {"coeffs": dict(coeffs)})


def kirchhoff_boundary(coeffs: dict, params: FluidParams) -> BoundaryData:
    """Trace of G^{-1}(h) for a harmonic polynomial h: an exact steady field."""
    h_val, h_grad = _harmonic_field(dict(coeffs))

    def value(x, y):
        return invert_G(h_val(x, y), params)

    def grad(x, y):
        theta = value(x, y)
        return h_grad(x, y) / params.kappa(theta)[..., None]

    return BoundaryData("kirchhoff", value, grad, {"coeffs": dict(coeffs)})


def make_boundary(spec, params: FluidParams) -> BoundaryData:
    if isinstance(spec, BoundaryData):
        return spec
    if isinstance(spec, (int, float)):
        return constant_boundary(spec)
    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError(f"boundary spec must name a family, got {spec!r}")
    family = spec["family"]
    if family == "constant":
        return constant_boundary(spec["value"])
    if family == "bilinear":
        return bilinear_boundary(
            spec["a"], spec.get("b", 0.0), spec.get("c", 0.0), spec.get("d", 0.0)
        )
    if family == "harmonic":
        return harmonic_boundary(spec["coeffs"])
    if family == "kirchhoff":
        return kirchhoff_boundary(spec["coeffs"], params)
    raise ConfigError(
        f"unknown boundary family {family!r}; registry: "
        "['constant', 'bilinear', 'harmonic', 'kirchhoff']"
    )


# ---------------------------------------------------------------------------
# G inversion
# ---------------------------------------------------------------------------

def invert_G(u, params: FluidParams, rtol: float = 1e-14, max_iter: int = 100):
    """Solve G(theta) = u for theta > 0 (vectorized safeguarded Newton).

    The bracket [0, u/kappa_lo] follows from kappa_lo*s <= G(s). Exact for
    constant conductivity.
    """
    u = np.asarray(u, dtype=float)
    scalar = u.ndim == 0
    u = np.atleast_1d(u).astype(float)
    if np.any(u < 0):
        raise DomainError("invert_G needs u >= 0 (range of G on [0, inf))")
    if params.kappa.name == "constant":
        out = u / params.kappa.lo
        return float(out[0]) if scalar else out

    lo = np.zeros_like(u)
    hi = u / params.kappa.lo + 1e-30
    s = u / np.maximum(params.kappa(u / np.maximum(params.kappa_lo, 1e-30)), 1e-30)
    s = np.clip(s, lo, hi)
    for _ in range(max_iter):
        g = params.kappa.primitive(s) - u
        lo = np.where(g < 0, s, lo)
        hi = np.where(g > 0, s, hi)
        step = g / params.kappa(np.maximum(s, 1e-300))
        s_new = s - step
        outside = (s_new <= lo) | (s_new >= hi)
        s_new = np.where(outside, 0.5 * (lo + hi), s_new)
        if np.all(np.abs(s_new - s) <= rtol * (1.0 + np.abs(s_new))):
            s = s_new
            break
        s = s_new
    else:
        raise SolverError("invert_G did not converge")
    return float(s[0]) if scalar else s


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def _sine_modes(Kx, Ky):
    return [(k, l) for k in range(1, Kx + 1) for l in range(1, Ky + 1)]


def _sine_tables(modes, x, y):
    """Values and gradients of sin(k pi x) sin(l pi y) at the given points."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    n = len(modes)
    Z = np.empty((n, x.size))
    Gz = np.empty((n, x.size, 2))
    for i, (k, l) in enumerate(modes):
        sx, cx = np.sin(k * np.pi * x), np.cos(k * np.pi * x)
        sy, cy = np.sin(l * np.pi * y), np.cos(l * np.pi * y)
        Z[i] = sx * sy
        Gz[i, :, 0] = k * np.pi * cx * sy
        Gz[i, :, 1] = l * np.pi * sx * cy
    return Z, Gz


class _CoonsBlend:
    """Bilinear-blend interpolant of edge data of a globally defined field."""

    def __init__(self, value, grad):
        self._value = value
        self._grad = grad
        self._corners = np.array(
            [value(0.0, 0.0), value(1.0, 0.0), value(0.0, 1.0), value(1.0, 1.0)],
            dtype=float,
        )

    def value(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        fB = self._value(x, np.zeros_like(y))
        fT = self._value(x, np.ones_like(y))
        fL = self._value(np.zeros_like(x), y)
        fR = self._value(np.ones_like(x), y)
        u00, u10, u01, u11 = self._corners
        Q = ((1 - x) * (1 - y) * u00 + x * (1 - y) * u10
             + (1 - x) * y * u01 + x * y * u11)
        return (1 - x) * fL + x * fR + (1 - y) * fB + y * fT - Q

    def grad(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        zeros = np.zeros_like(x)
        ones = np.ones_like(x)
        fB = self._value(x, zeros)
        fT = self._value(x, ones)
        fL = self._value(zeros, y)
        fR = self._value(ones, y)
        dB = self._grad(x, zeros)[..., 0]
        dT = self._grad(x, ones)[..., 0]
        dL = self._grad(zeros, y)[..., 1]
        dR = self._grad(ones, y)[..., 1]
        u00, u10, u01, u11 = self._corners
        dQx = -(1 - y) * u00 + (1 - y) * u10 - y * u01 + y * u11
        dQy = -(1 - x) * u00 - x * u10 + (1 - x) * u01 + x * u11
        gx = -fL + fR + (1 - y) * dB + y * dT - dQx
        gy = -fB + fT + (1 - x) * dL + x * dR - dQy
        return np.stack([gx, gy], axis=-1)


@dataclass
class SteadyTemperature:
    """Solved steady field: sine-mode correction coefficients over a Coons lift."""

    modes: list
    coeffs: np.ndarray
    boundary: BoundaryData
    params: FluidParams
    theta_lo: float
    theta_hi: float
    _blend: _CoonsBlend = field(repr=False, default=None)

    def kirchhoff_value(self, x, y):
        Z, _ = _sine_tables(self.modes, x, y)
        u = self._blend.value(np.asarray(x, float).ravel(),
                              np.asarray(y, float).ravel())
        return u + self.coeffs @ Z

    def theta(self, x, y):
        shape = np.shape(np.asarray(x, dtype=float))
        out = invert_G(self.kirchhoff_value(x, y), self.params)
        return np.reshape(out, shape) if shape else float(np.asarray(out).ravel()[0])

    def grad_theta(self, x, y):
        xf = np.asarray(x, dtype=float).ravel()
        yf = np.asarray(y, dtype=float).ravel()
        _, Gz = _sine_tables(self.modes, xf, yf)
        gu = self._blend.grad(xf, yf) + np.einsum("j,jpc->pc", self.coeffs, Gz)
        th = invert_G(self.kirchhoff_value(xf, yf), self.params)
        g = gu / self.params.kappa(th)[:, None]
        shape = np.shape(np.asarray(x, dtype=float))
        return g.reshape(shape + (2,)) if shape else g[0]


def solve_steady_temperature(boundary, params: FluidParams, Kx: int, Ky: int,
                             quad: QuadratureGrid | None = None) -> SteadyTemperature:
    """Solve the steady weak problem with Dirichlet data ``boundary``.

    Boundary values must be positive; the returned field satisfies
    theta_lo <= theta <= theta_hi up to the discrete maximum-principle
    surrogate, where the bounds are the boundary-data extremes.
    """
    boundary = make_boundary(boundary, params)
    if Kx < 1 or Ky < 1:
        raise ConfigError("steady solve needs at least one sine mode per direction")
    if quad is None:
        quad = QuadratureGrid(default_quad_order(max(Kx, Ky)))

    # boundary extremes sampled along the four edges
    edge = np.linspace(0.0, 1.0, 4 * quad.q + 1)
    zeros, ones = np.zeros_like(edge), np.ones_like(edge)
    g_edge = np.concatenate([
        boundary.value(edge, zeros), boundary.value(edge, ones),
        boundary.value(zeros, edge), boundary.value(ones, edge),
    ])
    theta_lo, theta_hi = float(g_edge.min()), float(g_edge.max())
    if theta_lo <= 0:
        raise DomainError("boundary temperature must be positive on the boundary")

    def u_value(x, y):
        return G_eval(boundary.value(x, y), params)

    def u_grad(x, y):
        th = boundary.value(x, y)
        return params.kappa(th)[..., None] * boundary.grad(x, y)

    blend = _CoonsBlend(u_value, u_grad)
    modes = _sine_modes(Kx, Ky)
    Z, Gz = _sine_tables(modes, quad.X, quad.Y)

    K = np.einsum("p,ipc,jpc->ij", quad.W2, Gz, Gz)
    rhs = -np.einsum("p,pc,jpc->j", quad.W2, blend.grad(quad.X, quad.Y), Gz)
    try:
        coeffs = scipy.linalg.solve(K, rhs, assume_a="pos")
    except scipy.linalg.LinAlgError as exc:
        raise SolverError(f"steady linear solve failed: {exc}") from exc

    return SteadyTemperature(
        modes=modes,
        coeffs=coeffs,
        boundary=boundary,
        params=params,
        theta_lo=theta_lo,
        theta_hi=theta_hi,
        _blend=blend,
    )


@dataclass
class SteadyReport:
    min_theta: float
    max_theta: float
    worst_weak_residual: float
    grad_l2_norm: float
    theta_lo: float
    theta_hi: float

    @property
    def bounds_margin(self) -> float:
        return max(self.theta_lo - self.min_theta, self.max_theta - self.theta_hi)


def verify_steady(st: SteadyTemperature, params: FluidParams,
                  quad: QuadratureGrid | None = None) -> SteadyReport:
    """Report bounds, the worst weak residual over the sine test space, and |grad|_2."""
    if quad is None:
        Kx = max(k for k, _ in st.modes)
        Ky = max(l for _, l in st.modes)
        quad = QuadratureGrid(default_quad_order(max(Kx, Ky)))
    th = st.theta(quad.X, quad.Y)
    gth = st.grad_theta(quad.X, quad.Y)
    flux = params.kappa(th)[:, None] * gth
    _, Gz = _sine_tables(st.modes, quad.X, quad.Y)
    residuals = np.einsum("p,pc,jpc->j", quad.W2, flux, Gz)
    grad_norm = np.sqrt(quad.integrate(np.sum(gth * gth, axis=-1)))
    return SteadyReport(
        min_theta=float(th.min()),
        max_theta=float(th.max()),
        worst_weak_residual=float(np.max(np.abs(residuals))),
        grad_l2_norm=float(grad_norm),
        theta_lo=st.theta_lo,
        theta_hi=st.theta_hi,
    )
