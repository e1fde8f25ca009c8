"""Implicit time integration of the semi-discrete system M xdot = F(x).

Damped Newton with a finite-difference Jacobian solves each implicit step;
failures trigger bounded time-step halving. Positivity and minimum-principle
violations are recorded as events, never repaired.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .constitutive import FluidParams
from .errors import ConfigError, PositivityFault, StepError
from .galerkin import (GalerkinState, TemperatureBasis, VelocityBasis,
                       assemble_rhs, quad_fields)

SCHEMES = ("implicit-euler", "midpoint")


@dataclass(frozen=True)
class StepControls:
    dt: float
    t_end: float
    scheme: str = "implicit-euler"
    newton_tol: float = 1e-10
    newton_max_iter: int = 30
    snapshot_every: int = 1
    min_principle_tol: float = 1e-6
    max_dt_halvings: int = 8
    freeze_temperature: bool = False
    fd_step: float = 1e-7

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.t_end < 0:
            raise ConfigError(f"t_end must be >= 0, got {self.t_end}")
        if self.newton_tol <= 0 or self.min_principle_tol <= 0:
            raise ConfigError("tolerances must be positive")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")


@dataclass
class Event:
    step: int
    kind: str
    payload: dict = field(default_factory=dict)


@dataclass
class Trajectory:
    times: list
    states: list
    events: list
    vb: VelocityBasis
    tb: TemperatureBasis
    params: FluidParams
    controls: StepControls
    aborted: bool = False

    @property
    def n_snapshots(self) -> int:
        return len(self.states)

    def event_count(self, kind: str) -> int:
        return sum(1 for e in self.events if e.kind == kind)

    def coefficient_matrix(self):
        A = np.stack([s.a for s in self.states])
        C = np.stack([s.c for s in self.states])
        return np.asarray(self.times), A, C


class _System:
    """Packs (a, c) into one unknown vector and evaluates M, F."""

    def __init__(self, vb, tb, params, freeze_temperature):
        self.vb = vb
        self.tb = tb
        self.params = params
        self.freeze = freeze_temperature
        self.nv = vb.n_modes
        self.nt = 0 if freeze_temperature else tb.n_modes
        if freeze_temperature:
            self.M = vb.M.copy()
        else:
            self.M = scipy.linalg.block_diag(vb.M, tb.M)

    def pack(self, state: GalerkinState):
        if self.freeze:
            return np.array(state.a, dtype=float, copy=True)
        return np.concatenate([state.a, state.c])

    def unpack(self, x, t, frozen_c):
        a = x[: self.nv]
        c = frozen_c if self.freeze else x[self.nv:]
        return GalerkinState(t=t, a=np.array(a), c=np.array(c, copy=True))

    def F(self, x, frozen_c):
        state = self.unpack(x, 0.0, frozen_c)
        F_v, F_t = assemble_rhs(state, self.vb, self.tb, self.params)
        if self.freeze:
            return F_v
        return np.concatenate([F_v, F_t])


def _newton_solve(system: _System, x_old, dt, controls, frozen_c, scheme):
    """Solve M(x - x_old) = dt * F(arg(x)) by damped Newton; returns (x, stats)."""

    def residual(x):
        arg = 0.5 * (x + x_old) if scheme == "midpoint" else x
        return system.M @ (x - x_old) - dt * system.F(arg, frozen_c)

    x = x_old.copy()
    r = residual(x)
    rnorm = np.linalg.norm(r)
    tol = controls.newton_tol * (1.0 + np.linalg.norm(x_old))
    n_iter = 0
    jac = None
    while rnorm > tol:
        if n_iter >= controls.newton_max_iter:
            raise StepError(f"Newton stalled at residual {rnorm:.3e}", residual=rnorm)
        if jac is None or n_iter % 4 == 3:
            jac = _fd_jacobian(system, x, x_old, dt, controls, frozen_c, scheme)
            lu = scipy.linalg.lu_factor(jac)
        delta = scipy.linalg.lu_solve(lu, -r)
        lam, accepted = 1.0, False
        for _ in range(12):
            x_try = x + lam * delta
            try:
                r_try = residual(x_try)
            except PositivityFault:
                lam *= 0.5
                continue
            r_try_norm = np.linalg.norm(r_try)
            if r_try_norm < rnorm * (1.0 - 0.25 * lam) or r_try_norm < tol:
                x, r, rnorm = x_try, r_try, r_try_norm
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            # Picard fallback: one fixed-point sweep often escapes a bad basin
            arg = 0.5 * (x + x_old) if scheme == "midpoint" else x
            x_try = x_old + dt * scipy.linalg.solve(system.M, system.F(arg, frozen_c))
            r_try = residual(x_try)
            if np.linalg.norm(r_try) < rnorm:
                x, r, rnorm = x_try, r_try, np.linalg.norm(r_try)
                jac = None
            else:
                raise StepError(
                    f"Newton line search failed at residual {rnorm:.3e}",
                    residual=rnorm,
                )
        n_iter += 1
    return x, {"iterations": n_iter, "residual": float(rnorm)}


def _fd_jacobian(system, x, x_old, dt, controls, frozen_c, scheme):
    n = x.size
    if scheme == "midpoint":
        base_arg = 0.5 * (x + x_old)
        chain = 0.5
    else:
        base_arg = x
        chain = 1.0
    f0 = system.F(base_arg, frozen_c)
    J = np.array(system.M, copy=True)
    for i in range(n):
        h = controls.fd_step * max(1.0, abs(x[i]))
        arg = base_arg.copy()
        arg[i] += chain * h
        try:
            fi = system.F(arg, frozen_c)
        except PositivityFault:
            arg[i] -= 2 * chain * h
            fi = 2 * f0 - system.F(arg, frozen_c)
        J[:, i] -= dt * chain * (fi - f0) / (chain * h)
    return J


def step(state: GalerkinState, controls: StepControls, params: FluidParams,
         vb: VelocityBasis, tb: TemperatureBasis, dt: float | None = None) -> GalerkinState:
    """One implicit step of size controls.dt (or ``dt`` when given)."""
    dt = controls.dt if dt is None else dt
    system = _System(vb, tb, params, controls.freeze_temperature)
    x_old = system.pack(state)
    x_new, _ = _newton_solve(system, x_old, dt, controls, state.c, controls.scheme)
    return system.unpack(x_new, state.t + dt, state.c)


def integrate(state0: GalerkinState, controls: StepControls, params: FluidParams,
              vb: VelocityBasis, tb: TemperatureBasis,
              theta_floor: float | None = None, writer=None) -> Trajectory:
    """March to t_end, recording snapshots and events.

    Events: ``newton_retry`` / ``dt_halved`` on step failures (at most
    ``max_dt_halvings`` per step), ``positivity_fault`` when the temperature
    leaves (0, inf) inside a solve, ``min_principle_violation`` when the
    accepted temperature drops below ``theta_floor`` minus the tolerance, and
    ``abort`` on unrecoverable failure (the partial trajectory is returned).
    """
    system = _System(vb, tb, params, controls.freeze_temperature)
    traj = Trajectory(times=[state0.t], states=[state0], events=[], vb=vb, tb=tb,
                      params=params, controls=controls)
    if writer is not None:
        writer.write_snapshot(state0)

    state = state0
    step_index = 0
    t_end = controls.t_end
    while state.t < t_end - 1e-12 * max(1.0, t_end):
        dt = min(controls.dt, t_end - state.t)
        halvings = 0
        while True:
            try:
                x_old = system.pack(state)
                x_new, stats = _newton_solve(system, x_old, dt, controls, state.c,
                                             controls.scheme)
                break
            except (StepError, PositivityFault) as exc:
                kind = ("positivity_fault" if isinstance(exc, PositivityFault)
                        else "newton_retry")
                traj.events.append(Event(step_index, kind, {"dt": dt,
                                                            "error": str(exc)}))
                if halvings >= controls.max_dt_halvings:
                    traj.events.append(Event(step_index, "abort",
                                             {"dt": dt, "error": str(exc)}))
                    traj.aborted = True
                    return traj
                dt *= 0.5
                halvings += 1
                traj.events.append(Event(step_index, "dt_halved", {"dt": dt}))

        state = system.unpack(x_new, state.t + dt, state.c)
        step_index += 1
        if stats["iterations"] > controls.newton_max_iter // 2:
            traj.events.append(Event(step_index, "newton_slow", stats))

        if theta_floor is not None and not controls.freeze_temperature:
            theta_min = float(quad_fields(state, vb, tb,
                                          check_positivity=False).theta.min())
            if theta_min < theta_floor - controls.min_principle_tol:
                traj.events.append(Event(step_index, "min_principle_violation",
                                         {"theta_min": theta_min,
                                          "floor": theta_floor}))

        if step_index % controls.snapshot_every == 0 or state.t >= t_end - 1e-12:
            traj.times.append(state.t)
            traj.states.append(state)
            if writer is not None:
                writer.write_snapshot(state)
    return traj
