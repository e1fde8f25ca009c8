"""Divergence-free velocity basis, lifted temperature basis, and weak-form assembly.

Velocity modes are curls of the stream functions sin^2(m pi x) sin^2(n pi y):
exactly solenoidal and no-slip, at the price of a non-identity mass matrix.
Temperature is expanded in Dirichlet sine modes over a lifting by the steady
field, so represented fields attain the boundary data exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .constitutive import FluidParams, stress_factor
from .errors import ConfigError, DomainError, PositivityFault
from .quadrature import QuadratureGrid, default_quad_order
from .steady import SteadyTemperature, _sine_tables


@dataclass(frozen=True)
class GalerkinState:
    """Time plus velocity and temperature coefficients."""

    t: float
    a: np.ndarray
    c: np.ndarray

    def copy_with(self, **kw):
        return replace(self, **kw)


def _stream_mode_tables(m, n, x, y):
    """Velocity and gradient of the (m, n) stream mode at points (x, y).

    Returns (w, grad_w) with w[..., c] and grad_w[..., a, c] = d_a w_c. The
    mixed entries share one float so the discrete divergence vanishes exactly.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    mpi, npi = m * np.pi, n * np.pi
    sx2 = np.sin(mpi * x) ** 2
    sy2 = np.sin(npi * y) ** 2
    s2x = np.sin(2 * mpi * x)
    s2y = np.sin(2 * npi * y)
    c2x = np.cos(2 * mpi * x)
    c2y = np.cos(2 * npi * y)

    w = np.stack([npi * sx2 * s2y, -mpi * s2x * sy2], axis=-1)
    cross = mpi * npi * s2x * s2y
    grad = np.empty(x.shape + (2, 2))
    grad[..., 0, 0] = cross
    grad[..., 0, 1] = -2 * mpi**2 * c2x * sy2
    grad[..., 1, 0] = 2 * npi**2 * sx2 * c2y
    grad[..., 1, 1] = -cross
    return w, grad


@dataclass
class VelocityBasis:
    """Stream-function velocity modes with precomputed quadrature tables."""

    modes: list
    quad: QuadratureGrid
    Wtab: np.ndarray = field(repr=False, default=None)   # (Nv, nq, 2)
    Gtab: np.ndarray = field(repr=False, default=None)   # (Nv, nq, 2, 2)
    Dtab: np.ndarray = field(repr=False, default=None)   # (Nv, nq, 2, 2)
    M: np.ndarray = field(repr=False, default=None)      # mass
    A2: np.ndarray = field(repr=False, default=None)     # p=2 stiffness

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def mass_condition_number(self) -> float:
        return float(np.linalg.cond(self.M))

    def velocity_at(self, a, x, y):
        w = np.stack([_stream_mode_tables(m, n, x, y)[0] for m, n in self.modes])
        return np.einsum("j,j...c->...c", np.asarray(a, float), w)

    def gradient_at(self, a, x, y):
        g = np.stack([_stream_mode_tables(m, n, x, y)[1] for m, n in self.modes])
        return np.einsum("j,j...ac->...ac", np.asarray(a, float), g)


def build_velocity_basis(Mx: int, My: int, quad: QuadratureGrid | None = None) -> VelocityBasis:
    if Mx < 1 or My < 1:
        raise ConfigError("velocity basis needs at least one mode per direction")
    if quad is None:
        quad = QuadratureGrid(default_quad_order(2 * max(Mx, My)))
    modes = [(m, n) for m in range(1, Mx + 1) for n in range(1, My + 1)]
    nv, nq = len(modes), quad.n_points
    Wtab = np.empty((nv, nq, 2))
    Gtab = np.empty((nv, nq, 2, 2))
    for j, (m, n) in enumerate(modes):
        Wtab[j], Gtab[j] = _stream_mode_tables(m, n, quad.X, quad.Y)
    Dtab = 0.5 * (Gtab + np.swapaxes(Gtab, -1, -2))
    M = np.einsum("p,ipc,jpc->ij", quad.W2, Wtab, Wtab)
    A2 = np.einsum("p,ipab,jpab->ij", quad.W2, Dtab, Dtab)
    M = 0.5 * (M + M.T)
    A2 = 0.5 * (A2 + A2.T)
    return VelocityBasis(modes=modes, quad=quad, Wtab=Wtab, Gtab=Gtab, Dtab=Dtab,
                         M=M, A2=A2)


@dataclass
class TemperatureBasis:
    """Dirichlet sine modes plus a lifting by the steady temperature."""

    modes: list
    quad: QuadratureGrid
    steady: SteadyTemperature
    Ztab: np.ndarray = field(repr=False, default=None)     # (Nt, nq)
    Gztab: np.ndarray = field(repr=False, default=None)    # (Nt, nq, 2)
    M: np.ndarray = field(repr=False, default=None)
    theta_hat_q: np.ndarray = field(repr=False, default=None)
    grad_theta_hat_q: np.ndarray = field(repr=False, default=None)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def mass_condition_number(self) -> float:
        return float(np.linalg.cond(self.M))

    def theta_at(self, c, x, y):
        Z, _ = _sine_tables(self.modes, np.asarray(x, float).ravel(),
                            np.asarray(y, float).ravel())
        shape = np.shape(np.asarray(x, dtype=float))
        vals = self.steady.theta(np.asarray(x, float).ravel(),
                                 np.asarray(y, float).ravel())
        out = np.asarray(vals).ravel() + np.asarray(c, float) @ Z
        return out.reshape(shape) if shape else float(out[0])

    def grad_theta_at(self, c, x, y):
        xf = np.asarray(x, dtype=float).ravel()
        yf = np.asarray(y, dtype=float).ravel()
        _, Gz = _sine_tables(self.modes, xf, yf)
        g = self.steady.grad_theta(xf, yf) + np.einsum(
            "j,jpc->pc", np.asarray(c, float), Gz
        )
        shape = np.shape(np.asarray(x, dtype=float))
        return g.reshape(shape + (2,)) if shape else g[0]


def build_temperature_basis(Kx: int, Ky: int, steady: SteadyTemperature,
                            quad: QuadratureGrid) -> TemperatureBasis:
    if Kx < 1 or Ky < 1:
        raise ConfigError("temperature basis needs at least one mode per direction")
    modes = [(k, l) for k in range(1, Kx + 1) for l in range(1, Ky + 1)]
    Ztab, Gztab = _sine_tables(modes, quad.X, quad.Y)
    M = np.einsum("p,ip,jp->ij", quad.W2, Ztab, Ztab)
    M = 0.5 * (M + M.T)
    theta_hat_q = steady.theta(quad.X, quad.Y)
    grad_theta_hat_q = steady.grad_theta(quad.X, quad.Y)
    return TemperatureBasis(
        modes=modes, quad=quad, steady=steady, Ztab=Ztab, Gztab=Gztab, M=M,
        theta_hat_q=np.asarray(theta_hat_q, dtype=float).ravel(),
        grad_theta_hat_q=grad_theta_hat_q.reshape(-1, 2),
    )


# ---------------------------------------------------------------------------
# field evaluation and weak-form assembly
# ---------------------------------------------------------------------------

@dataclass
class QuadFields:
    """Fields of one state at the quadrature points."""

    v: np.ndarray          # (nq, 2)
    grad_v: np.ndarray     # (nq, 2, 2)
    D: np.ndarray          # (nq, 2, 2)
    theta: np.ndarray      # (nq,)
    grad_theta: np.ndarray # (nq, 2)


def quad_fields(state: GalerkinState, vb: VelocityBasis, tb: TemperatureBasis,
                check_positivity: bool = True) -> QuadFields:
    a = np.asarray(state.a, dtype=float)
    c = np.asarray(state.c, dtype=float)
    v = np.einsum("j,jpc->pc", a, vb.Wtab)
    grad_v = np.einsum("j,jpac->pac", a, vb.Gtab)
    D = np.einsum("j,jpac->pac", a, vb.Dtab)
    theta = tb.theta_hat_q + c @ tb.Ztab
    grad_theta = tb.grad_theta_hat_q + np.einsum("j,jpc->pc", c, tb.Gztab)
    if check_positivity and np.any(theta <= 0.0):
        raise PositivityFault(
            f"temperature nonpositive at a quadrature point (min={theta.min():.3e})"
        )
    return QuadFields(v=v, grad_v=grad_v, D=D, theta=theta, grad_theta=grad_theta)


def evaluate_fields(state: GalerkinState, vb: VelocityBasis, tb: TemperatureBasis,
                    points):
    """(v, grad v, theta, grad theta) at arbitrary points of the closed square."""
    pts = np.asarray(points, dtype=float)
    x, y = pts[..., 0], pts[..., 1]
    if np.any(x < 0) or np.any(x > 1) or np.any(y < 0) or np.any(y > 1):
        raise DomainError("evaluation points must lie in the closed unit square")
    v = vb.velocity_at(state.a, x, y)
    grad_v = vb.gradient_at(state.a, x, y)
    theta = tb.theta_at(state.c, x, y)
    grad_theta = tb.grad_theta_at(state.c, x, y)
    return v, grad_v, theta, grad_theta


def stress_at_quad(fields: QuadFields, params: FluidParams) -> np.ndarray:
    norm_d = np.sqrt(np.einsum("pab,pab->p", fields.D, fields.D))
    fac = stress_factor(fields.theta, norm_d, params)
    return fac[:, None, None] * fields.D


def assemble_rhs(state: GalerkinState, vb: VelocityBasis, tb: TemperatureBasis,
                 params: FluidParams):
    """Load vectors (F_v, F_theta) of the semi-discrete flow M xdot = F."""
    f = quad_fields(state, vb, tb)
    S = stress_at_quad(f, params)

    conv_v = np.einsum("p,pa,pb,jpab->j", vb.quad.W2, f.v, f.v, vb.Gtab)
    visc = np.einsum("p,pab,jpab->j", vb.quad.W2, S, vb.Dtab)
    F_v = conv_v - visc

    kappa = params.kappa(f.theta)
    heat = np.einsum("pab,pab->p", S, f.D)
    conv_t = np.einsum("p,p,pc,jpc->j", tb.quad.W2, f.theta, f.v, tb.Gztab)
    diff_t = np.einsum("p,p,pc,jpc->j", tb.quad.W2, kappa, f.grad_theta, tb.Gztab)
    source = np.einsum("p,p,jp->j", tb.quad.W2, heat, tb.Ztab)
    F_theta = conv_t - diff_t + source
    return F_v, F_theta
