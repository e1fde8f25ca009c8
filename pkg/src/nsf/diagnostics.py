"""Inequality audits along a trajectory, decay-rate fitting, and decay lemmas.

Each audit turns one defining inequality of the solution concept into a
residual series with an explicit sign convention:

  KINETIC          |v(t)|^2 + 2 int_0^t int S:Dv - |v(0)|^2         (ABS, O(dt))
  ENTROPY          weak entropy imbalance per space-time test pair   (GE, >= -tol)
  CORRECTED_TOTAL  corrected total-energy LHS per test pair          (LE, <= tol)
  L1_BOUND         |theta(t)|_1 minus the global heat bound          (LE, <= 0)
  MIN_PRINCIPLE    theta_floor - min_x theta(t)                      (LE, <= tol)
  ATTAINMENT       initial-data gaps at the first snapshot           (refinement)

Entropy uses eta = ln(theta) evaluated pointwise at quadrature nodes with
grad eta = grad theta / theta (exact chain rule at the samples).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .constitutive import FluidParams
from .correction import CorrectionFn
from .errors import DomainError, HypothesisError, PositivityFault, WindowError
from .galerkin import VelocityBasis, quad_fields, stress_at_quad
from .lyapunov import LyapunovParams, f_alpha_eval
from .timestepper import Trajectory

SIGN_LE = "LE"    # values must stay <= tol
SIGN_GE = "GE"    # values must stay >= -tol
SIGN_ABS = "ABS"  # |values| must stay <= tol

TAGS = ("KINETIC", "ENTROPY", "CORRECTED_TOTAL", "L1_BOUND", "MIN_PRINCIPLE",
        "ATTAINMENT")


@dataclass
class ResidualSeries:
    tag: str
    times: np.ndarray
    values: np.ndarray
    sign: str
    tol: float
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown tag {self.tag!r}")
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape:
            raise ValueError("times and values must align")

    @property
    def worst(self) -> float:
        if self.sign == SIGN_LE:
            return float(self.values.max())
        if self.sign == SIGN_GE:
            return float(self.values.min())
        return float(np.abs(self.values).max())

    @property
    def passed(self) -> bool:
        if self.values.size == 0:
            return True
        if self.sign == SIGN_LE:
            return bool(self.worst <= self.tol)
        if self.sign == SIGN_GE:
            return bool(self.worst >= -self.tol)
        return bool(self.worst <= self.tol)


@dataclass
class DecayFit:
    mu_fit: float
    r_squared: float
    window: tuple
    theoretical_mu: float | None = None


class MuEstimate(NamedTuple):
    value: float
    branch: str


# ---------------------------------------------------------------------------
# per-snapshot field cache
# ---------------------------------------------------------------------------

class FieldCache:
    """Quadrature-point fields, stress, and entropy for every snapshot."""

    def __init__(self, traj: Trajectory):
        self.traj = traj
        self.times = np.asarray(traj.times, dtype=float)
        vb, tb, params = traj.vb, traj.tb, traj.params
        self.W2 = vb.quad.W2
        n = len(traj.states)
        nq = vb.quad.n_points
        self.v = np.empty((n, nq, 2))
        self.theta = np.empty((n, nq))
        self.grad_theta = np.empty((n, nq, 2))
        self.S = np.empty((n, nq, 2, 2))
        self.diss = np.empty((n, nq))
        self.kappa = np.empty((n, nq))
        self.energy = np.empty(n)
        for i, state in enumerate(traj.states):
            f = quad_fields(state, vb, tb, check_positivity=False)
            if np.any(f.theta <= 0):
                raise PositivityFault(
                    f"snapshot {i}: temperature nonpositive, audits aborted"
                )
            S = stress_at_quad(f, params)
            self.v[i] = f.v
            self.theta[i] = f.theta
            self.grad_theta[i] = f.grad_theta
            self.S[i] = S
            self.diss[i] = np.einsum("pab,pab->p", S, f.D)
            self.kappa[i] = params.kappa(f.theta)
            a = np.asarray(state.a)
            self.energy[i] = float(a @ vb.M @ a)
        self.eta = np.log(self.theta)
        self.grad_eta = self.grad_theta / self.theta[..., None]
        self.theta_hat = tb.theta_hat_q
        self.grad_theta_hat = tb.grad_theta_hat_q

    def spatial(self, values) -> np.ndarray:
        """Quadrature over space for each snapshot; values has shape (n, nq)."""
        return values @ self.W2


def _cumtrapz(times, values):
    out = np.zeros_like(values)
    out[1:] = np.cumsum(0.5 * (values[1:] + values[:-1]) * np.diff(times))
    return out


# ---------------------------------------------------------------------------
# built-in test function families
# ---------------------------------------------------------------------------

_FACTORS = {
    "q1": (lambda x: x * (1 - x), lambda x: 1 - 2 * x, 0.25),
    "q2": (lambda x: x * x * (1 - x), lambda x: 2 * x - 3 * x * x, 4 / 27),
    "q3": (lambda x: x * (1 - x) ** 2, lambda x: (1 - x) * (1 - 3 * x), 4 / 27),
}

_SPACE_PAIRS = [("q1", "q1"), ("q2", "q1"), ("q1", "q2"), ("q3", "q1"),
                ("q1", "q3"), ("q2", "q3")]


@dataclass
class SpaceTestFn:
    name: str
    values: np.ndarray  # (nq,)
    grads: np.ndarray   # (nq, 2)


def interior_test_functions(quad) -> list:
    """Nonnegative polynomial bumps vanishing on the boundary (6 by default)."""
    out = []
    for fx, fy in _SPACE_PAIRS:
        vx, dx, mx = _FACTORS[fx]
        vy, dy, my = _FACTORS[fy]
        scale = 1.0 / (mx * my)
        vals = scale * vx(quad.X) * vy(quad.Y)
        grads = scale * np.stack(
            [dx(quad.X) * vy(quad.Y), vx(quad.X) * dy(quad.Y)], axis=-1
        )
        out.append(SpaceTestFn(f"{fx}*{fy}", vals, grads))
    return out


def boundary_one_weights(quad) -> list:
    """Nonnegative C1 weights equal to 1 on the boundary: 1 and two collar bumps."""
    out = [SpaceTestFn("one", np.ones(quad.n_points), np.zeros((quad.n_points, 2)))]
    vx, dx, _ = _FACTORS["q1"]
    for s in (1.0, 0.5):
        vals = 1.0 - 16.0 * s * vx(quad.X) * vx(quad.Y)
        grads = -16.0 * s * np.stack(
            [dx(quad.X) * vx(quad.Y), vx(quad.X) * dx(quad.Y)], axis=-1
        )
        out.append(SpaceTestFn(f"collar{s:g}", vals, grads))
    return out


@dataclass
class TimeWindowFn:
    """Hat function on snapshot times: up on [i0, im], down on [im, i1]."""

    i0: int
    im: int
    i1: int
    times: np.ndarray

    @property
    def center(self) -> float:
        return float(self.times[self.im])

    def psi(self) -> np.ndarray:
        t = self.times
        t0, tm, t1 = t[self.i0], t[self.im], t[self.i1]
        up = np.clip((t - t0) / (tm - t0), 0.0, 1.0)
        down = np.clip((t1 - t) / (t1 - tm), 0.0, 1.0)
        return np.minimum(up, down)

    def int_psi(self, series: np.ndarray) -> float:
        """Trapezoid of series(t) * psi(t)."""
        return float(np.trapezoid(series * self.psi(), self.times))

    def int_dpsi(self, series: np.ndarray) -> float:
        """Trapezoid of series(t) * psi'(t), split at the kink."""
        t = self.times
        t0, tm, t1 = t[self.i0], t[self.im], t[self.i1]
        up = np.trapezoid(series[self.i0: self.im + 1], t[self.i0: self.im + 1])
        down = np.trapezoid(series[self.im: self.i1 + 1], t[self.im: self.i1 + 1])
        return float(up / (tm - t0) - down / (t1 - tm))


def time_windows(times, n_windows: int = 4) -> list:
    """Hat windows with breakpoints snapped to snapshot indices."""
    times = np.asarray(times, dtype=float)
    n = times.size
    if n < 5:
        raise WindowError("need at least 5 snapshots for time test windows")
    specs = [(0.05, 0.30, 0.55), (0.25, 0.50, 0.75), (0.45, 0.70, 0.95),
             (0.70, 0.85, 1.00)][:n_windows]
    out = []
    for f0, fm, f1 in specs:
        i0 = int(round(f0 * (n - 1)))
        im = int(round(fm * (n - 1)))
        i1 = int(round(f1 * (n - 1)))
        im = min(max(im, i0 + 1), n - 2)
        i1 = max(min(i1, n - 1), im + 1)
        out.append(TimeWindowFn(i0, im, i1, times))
    return out


# ---------------------------------------------------------------------------
# audits
# ---------------------------------------------------------------------------

def kinetic_energy_audit(traj: Trajectory, params: FluidParams,
                         tol: float = 1e-3, cache: FieldCache | None = None
                         ) -> ResidualSeries:
    """Residual of the kinetic energy identity, plus its inequality form.

    residual(t) = |v(t)|_2^2 + 2 int_0^t int S:Dv - |v(0)|_2^2, with the time
    integral by trapezoid over snapshots; magnitude is O(dt).
    """
    cache = cache or FieldCache(traj)
    diss = cache.spatial(cache.diss)
    twice_work = 2.0 * _cumtrapz(cache.times, diss)
    residual = cache.energy + twice_work - cache.energy[0]
    return ResidualSeries(
        tag="KINETIC", times=cache.times, values=residual, sign=SIGN_ABS, tol=tol,
        extras={
            "dissipation": diss,
            "energy": cache.energy,
            "inequality": twice_work - cache.energy[0],  # must stay <= tol
        },
    )


def entropy_audit(traj: Trajectory, params: FluidParams, tol: float = 1e-4,
                  cache: FieldCache | None = None, n_windows: int = 4
                  ) -> ResidualSeries:
    """LHS - RHS of the weak entropy inequality for every built-in test pair.

    The semi-discrete temperature equation makes this an equality up to
    O(dt) + spatial truncation, so values should be small of either sign and
    in particular >= -tol.
    """
    cache = cache or FieldCache(traj)
    quad = traj.vb.quad
    phis = interior_test_functions(quad)
    windows = time_windows(cache.times, n_windows)

    centers, vals, phi_idx, psi_idx = [], [], [], []
    for ip, phi in enumerate(phis):
        I_eta = cache.spatial(cache.eta * phi.values)
        I_conv = cache.spatial(cache.eta * np.einsum("npc,pc->np", cache.v, phi.grads))
        I_diff = cache.spatial(
            cache.kappa * np.einsum("npc,pc->np", cache.grad_eta, phi.grads)
        )
        I_src = cache.spatial(cache.diss / cache.theta * phi.values)
        I_dis = cache.spatial(
            cache.kappa * np.einsum("npc,npc->np", cache.grad_eta, cache.grad_eta)
            * phi.values
        )
        for iw, w in enumerate(windows):
            lhs = -w.int_dpsi(I_eta) - w.int_psi(I_conv) + w.int_psi(I_diff)
            rhs = w.int_psi(I_src) + w.int_psi(I_dis)
            centers.append(w.center)
            vals.append(lhs - rhs)
            phi_idx.append(ip)
            psi_idx.append(iw)

    return ResidualSeries(
        tag="ENTROPY", times=np.array(centers), values=np.array(vals),
        sign=SIGN_GE, tol=tol,
        extras={"phi_index": np.array(phi_idx), "psi_index": np.array(psi_idx)},
    )


def corrected_total_energy_audit(traj: Trajectory, params: FluidParams,
                                 fn: CorrectionFn, tol: float = 1e-4,
                                 cache: FieldCache | None = None,
                                 n_windows: int = 4) -> ResidualSeries:
    """The corrected total-energy inequality for boundary-one weights.

    For each weight phi (=1 on the boundary) and each time window psi, the
    four-integral left-hand side must be <= tol. Extras carry the underlying
    equality residual (the inequality plus the sign-definite dissipation
    term, O(dt) + truncation) and the pointwise-in-time sign-definite term
    int (S:Dv b - kappa |grad theta|^2 d1b) phi, which is nonnegative by
    construction.
    """
    cache = cache or FieldCache(traj)
    quad = traj.vb.quad
    phis = boundary_one_weights(quad)
    windows = time_windows(cache.times, n_windows)

    theta_hat = np.broadcast_to(cache.theta_hat, cache.theta.shape)
    bv = fn.b(cache.theta, theta_hat)
    d1b = fn.d1b(cache.theta, theta_hat)
    d2b = fn.d2b(cache.theta, theta_hat)
    Bv = fn.B(cache.theta, theta_hat)
    grad_sq = np.einsum("npc,npc->np", cache.grad_theta, cache.grad_theta)
    vdotg = np.einsum("npc,npc->np", cache.v, cache.grad_theta)
    flux_hat = np.einsum("npc,pc->np", cache.grad_theta, cache.grad_theta_hat)
    half_speed = 0.5 * np.einsum("npc,npc->np", cache.v, cache.v)

    centers, vals, eq28, phi_idx, psi_idx = [], [], [], [], []
    signdef_rows = []
    for ip, phi in enumerate(phis):
        I_E = cache.spatial(half_speed + cache.theta - Bv * phi.values)
        I_conv = cache.spatial(vdotg * bv * phi.values)
        I_kflux = cache.spatial(
            cache.kappa * bv
            * np.einsum("npc,pc->np", cache.grad_theta, phi.grads)
        )
        I_d2 = cache.spatial(cache.kappa * flux_hat * d2b * phi.values)
        I_sign = cache.spatial(
            (cache.diss * bv - cache.kappa * grad_sq * d1b) * phi.values
        )
        signdef_rows.append(I_sign)
        for iw, w in enumerate(windows):
            lhs = (-w.int_dpsi(I_E) - w.int_psi(I_conv) - w.int_psi(I_kflux)
                   - w.int_psi(I_d2))
            centers.append(w.center)
            vals.append(lhs)
            eq28.append(lhs + w.int_psi(I_sign))
            phi_idx.append(ip)
            psi_idx.append(iw)

    return ResidualSeries(
        tag="CORRECTED_TOTAL", times=np.array(centers), values=np.array(vals),
        sign=SIGN_LE, tol=tol,
        extras={
            "phi_index": np.array(phi_idx),
            "psi_index": np.array(psi_idx),
            "eq_residual": np.array(eq28),
            "signdef_times": cache.times,
            "signdef_min": np.min(np.stack(signdef_rows), axis=0),
        },
    )


def l1_bound_audit(traj: Trajectory, params: FluidParams, tol: float = 0.0,
                   cache: FieldCache | None = None) -> ResidualSeries:
    """|theta(t)|_1 against the global bound int(|v0|^2/2 + max(theta_hi, theta0))."""
    cache = cache or FieldCache(traj)
    theta_hi = traj.tb.steady.theta_hi
    bound = float(
        np.dot(cache.W2, 0.5 * np.einsum("pc,pc->p", cache.v[0], cache.v[0])
               + np.maximum(theta_hi, cache.theta[0]))
    )
    l1 = cache.spatial(np.abs(cache.theta))
    return ResidualSeries(
        tag="L1_BOUND", times=cache.times, values=l1 - bound, sign=SIGN_LE,
        tol=tol, extras={"bound": np.full_like(l1, bound), "l1_norm": l1},
    )


def min_principle_audit(traj: Trajectory, theta_lo: float, tol: float = 1e-6,
                        cache: FieldCache | None = None) -> ResidualSeries:
    """theta_lo - min over quadrature points of theta(t); expected <= tol."""
    cache = cache or FieldCache(traj)
    residual = theta_lo - cache.theta.min(axis=1)
    return ResidualSeries(
        tag="MIN_PRINCIPLE", times=cache.times, values=residual, sign=SIGN_LE,
        tol=tol, extras={"theta_min": cache.theta.min(axis=1)},
    )


class AttainmentResult(NamedTuple):
    t_first: float
    velocity_gap: float      # |v(t1) - v0|_2^2
    temperature_gap: float   # |theta(t1) - theta0|_1


def attainment_audit(traj: Trajectory, ic=None,
                     cache: FieldCache | None = None) -> AttainmentResult:
    """Initial-data gaps at the first positive snapshot time."""
    cache = cache or FieldCache(traj)
    if cache.times.size < 2:
        return AttainmentResult(0.0, 0.0, 0.0)
    vb = traj.vb
    a0 = np.asarray(ic.a) if ic is not None else np.asarray(traj.states[0].a)
    da = np.asarray(traj.states[1].a) - a0
    v_gap = float(da @ vb.M @ da)
    if ic is not None:
        f0 = quad_fields(ic, traj.vb, traj.tb, check_positivity=False)
        theta0 = f0.theta
    else:
        theta0 = cache.theta[0]
    t_gap = float(np.dot(cache.W2, np.abs(cache.theta[1] - theta0)))
    return AttainmentResult(float(cache.times[1]), v_gap, t_gap)


def lyapunov_series(traj: Trajectory, lp: LyapunovParams, params: FluidParams,
                    cache: FieldCache | None = None):
    """t -> int of beta|v|^2 + f_alpha(theta, theta_hat) by quadrature."""
    cache = cache or FieldCache(traj)
    theta_hat = np.broadcast_to(cache.theta_hat, cache.theta.shape)
    f = f_alpha_eval(cache.theta, theta_hat, lp.alpha, params)
    vsq = np.einsum("npc,npc->np", cache.v, cache.v)
    values = cache.spatial(lp.beta * vsq + f)
    return cache.times.copy(), values


# ---------------------------------------------------------------------------
# decay fitting and lemma checks
# ---------------------------------------------------------------------------

def fit_exponential_rate(times, values, window=None) -> DecayFit:
    """Least-squares line on (t, log value); mu_fit is the slope magnitude."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if window is None:
        window = (float(times[0]), float(times[-1]))
    ta, tb = window
    mask = (times >= ta) & (times <= tb)
    if mask.sum() < 3:
        raise WindowError(f"window {window} selects fewer than 3 samples")
    if np.any(values[mask] <= 0):
        raise WindowError("values must be positive inside the fitting window")
    t = times[mask]
    y = np.log(values[mask])
    A = np.stack([t, np.ones_like(t)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope = coef[0]
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - A @ coef) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return DecayFit(mu_fit=float(-slope), r_squared=float(r2),
                    window=(float(ta), float(tb)))


def theoretical_mu_estimate(vb: VelocityBasis, params: FluidParams) -> MuEstimate:
    """Discrete decay-rate surrogate nu_lo * lambda_min(stiffness, mass).

    Valid lower-rate bound for p = 2; for p > 2 it remains a small-amplitude
    surrogate (the offset makes the effective viscosity >= nu_lo there); for
    p < 2 only the small-data branch is estimated and the flag says so.
    """
    lam = scipy.linalg.eigh(vb.A2, vb.M, eigvals_only=True)[0]
    value = params.nu_lo * float(lam)
    branch = "p_ge_2" if params.p >= 2.0 else "small_data_p_lt_2"
    return MuEstimate(value=value, branch=branch)


@dataclass
class DecayLemmaReport:
    part: int
    worst_margin: float
    hypothesis_margin: float
    n_pairs: int

    @property
    def passed(self) -> bool:
        return self.worst_margin >= 0.0


def decay_lemma_check(times, values, C1: float, part: int = 1,
                      alpha: float | None = None,
                      hypothesis_slack: float | None = None) -> DecayLemmaReport:
    """Verify an integral-decay hypothesis implies its pointwise conclusion.

    Part 1: from f(t) + C1 int_s^t f <= f(s) (all pairs, trapezoid) conclude
    f(t) <= f(s) e^{-C1 (t-s)}. Part 2: from the power variant with exponent
    alpha and f >= 1 conclude f(t) <= (f(s) / (1 + C1 (t-s)))^{1/alpha}.

    Inputs that fail the hypothesis raise HypothesisError; a conclusion
    failure is reported via a negative worst margin instead. The hypothesis
    check allows for the trapezoid quadrature error of the sampled integral.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.ndim != 1 or times.shape != values.shape or times.size < 3:
        raise HypothesisError("need 1-d aligned series with at least 3 samples")
    if np.any(np.diff(times) <= 0):
        raise HypothesisError("times must be strictly increasing")
    if np.any(values < 0):
        raise HypothesisError("series must be nonnegative")
    if part not in (1, 2):
        raise HypothesisError(f"part must be 1 or 2, got {part}")
    if part == 2:
        if alpha is None or not (0.0 < alpha < 1.0):
            raise HypothesisError("part 2 needs alpha in (0, 1)")
        if np.any(values < 1.0):
            raise HypothesisError("part 2 requires f >= 1 on the sample range")

    integrand = values if part == 1 else values**alpha
    I = _cumtrapz(times, integrand)
    fs = values[:, None]
    ft = values[None, :]
    seg = I[None, :] - I[:, None]
    dt_pair = times[None, :] - times[:, None]
    upper = dt_pair > 0

    # trapezoid error allowance: |E| <= (t-s) h^2 max|f''| / 12 with f'' ~ C1^2 f
    h = np.max(np.diff(times))
    if hypothesis_slack is None:
        hypothesis_slack = C1**2 * h**2 / 8.0
    slack = hypothesis_slack * dt_pair * fs + 1e-12 * (1.0 + fs)

    hyp = fs - ft - C1 * seg  # must be >= -slack on s < t
    hyp_margin = float(np.min((hyp + slack)[upper]))
    if hyp_margin < 0.0:
        raise HypothesisError(
            f"series violates the part-{part} integral hypothesis "
            f"(margin {hyp_margin:.3e})"
        )

    if part == 1:
        bound = fs * np.exp(-C1 * dt_pair)
    else:
        bound = (fs / (1.0 + C1 * dt_pair)) ** (1.0 / alpha)
    margin = (bound - ft)[upper]
    return DecayLemmaReport(
        part=part,
        worst_margin=float(np.min(margin)),
        hypothesis_margin=hyp_margin,
        n_pairs=int(upper.sum()),
    )
