"""Scenario orchestration: steady solve, bases, integration, audits, outputs.

Outputs are deterministic: identical configs (including seeds) produce
byte-identical CSV files. Every artifact written by a run is referenced from
summary.json by a relative path.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, config_digest, parse_config
from .constitutive import FluidParams, fluid_params
from .correction import make_correction
from .errors import ConfigError
from .galerkin import (GalerkinState, TemperatureBasis, VelocityBasis,
                       build_temperature_basis, build_velocity_basis, quad_fields)
from .lyapunov import LyapunovParams
from .quadrature import QuadratureGrid, default_quad_order
from .steady import make_boundary, solve_steady_temperature, verify_steady
from .timestepper import StepControls, Trajectory, integrate
from . import diagnostics as dg

OUTPUT_ROOT_ENV = "NSF_OUTPUT_ROOT"


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def write_csv(path: Path, header: list, columns: list):
    rows = np.broadcast_arrays(*[np.asarray(c) for c in columns])
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(rows[0].size):
            fh.write(",".join(_fmt(c.flat[i]) for c in rows) + "\n")


def output_root(cfg: RunConfig) -> Path:
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root:
        return Path(root) / cfg.output_dir
    return Path(cfg.output_dir)


# ---------------------------------------------------------------------------
# scenario building blocks
# ---------------------------------------------------------------------------

@dataclass
class Scenario:
    """Everything needed to run and audit one configuration."""

    cfg: RunConfig
    params: FluidParams
    quad: QuadratureGrid
    vb: VelocityBasis
    tb: TemperatureBasis
    state0: GalerkinState
    controls: StepControls
    theta_floor: float
    correction: object
    lyapunov: LyapunovParams
    steady_report: object


def initial_velocity(spec, vb: VelocityBasis) -> np.ndarray:
    family = spec.get("family", "zero")
    a = np.zeros(vb.n_modes)
    if family == "zero":
        return a
    if family == "single_mode":
        m, n = int(spec.get("m", 1)), int(spec.get("n", 1))
        if (m, n) not in vb.modes:
            raise ConfigError(f"velocity mode {(m, n)} not in basis {vb.modes}")
        a[vb.modes.index((m, n))] = float(spec.get("amplitude", 1.0))
        return a
    if family == "random":
        rng = np.random.default_rng(int(spec.get("seed", 0)))
        a = rng.standard_normal(vb.n_modes)
        energy = float(spec.get("energy", 0.01))
        return a * np.sqrt(2.0 * energy / (a @ vb.M @ a))
    raise ConfigError(
        f"unknown velocity family {family!r}; known: ['zero', 'single_mode', 'random']"
    )


def initial_temperature(spec, tb: TemperatureBasis) -> np.ndarray:
    """Coefficients of theta0 - theta_hat by L2 projection onto the sine modes."""
    family = spec.get("family", "steady")
    c = np.zeros(tb.n_modes)
    if family == "steady":
        return c
    if family == "bump":
        m, n = int(spec.get("m", 1)), int(spec.get("n", 1))
        if (m, n) not in tb.modes:
            raise ConfigError(f"temperature mode {(m, n)} not in basis {tb.modes}")
        c[tb.modes.index((m, n))] = float(spec.get("amplitude", 0.1))
        return c
    if family == "constant":
        value = float(spec.get("value", 1.0))
        target = value - tb.theta_hat_q
        rhs = np.einsum("p,p,jp->j", tb.quad.W2, target, tb.Ztab)
        return np.linalg.solve(tb.M, rhs)
    raise ConfigError(
        f"unknown temperature family {family!r}; known: ['steady', 'bump', 'constant']"
    )


def build_scenario(cfg) -> Scenario:
    cfg = parse_config(cfg)
    fl = cfg.fluid
    params = fluid_params(fl["p"], fl.get("delta", 1.0), fl.get("nu", 1.0),
                          fl.get("kappa", 1.0))
    res = cfg.resolution
    q = res.q if res.q is not None else default_quad_order(res.max_wavenumber)
    quad = QuadratureGrid(q)
    boundary = make_boundary(cfg.boundary, params)
    steady = solve_steady_temperature(boundary, params, res.Kx, res.Ky, quad)
    steady_report = verify_steady(steady, params, quad)
    vb = build_velocity_basis(res.Mx, res.My, quad)
    tb = build_temperature_basis(res.Kx, res.Ky, steady, quad)

    a0 = initial_velocity(cfg.initial.get("velocity", {"family": "zero"}), vb)
    c0 = initial_temperature(cfg.initial.get("temperature", {"family": "steady"}), tb)
    state0 = GalerkinState(0.0, a0, c0)

    theta0_q = tb.theta_hat_q + c0 @ tb.Ztab
    theta_floor = min(float(theta0_q.min()), steady_report.min_theta,
                      steady.theta_lo)
    if theta_floor <= 0:
        raise ConfigError(
            f"projected initial temperature violates positivity "
            f"(min {theta0_q.min():.3e})"
        )

    controls = StepControls(
        dt=cfg.controls.dt, t_end=cfg.controls.t_end, scheme=cfg.controls.scheme,
        newton_tol=cfg.controls.newton_tol,
        newton_max_iter=cfg.controls.newton_max_iter,
        snapshot_every=cfg.controls.snapshot_every,
        min_principle_tol=cfg.tolerances.min_principle,
        max_dt_halvings=cfg.controls.max_dt_halvings,
        freeze_temperature=cfg.controls.freeze_temperature,
    )

    correction = make_correction(cfg.correction, theta_floor, steady.theta_hi)
    lp = LyapunovParams(float(cfg.lyapunov.get("alpha", 0.6)),
                        float(cfg.lyapunov.get("beta", 1.0)))
    return Scenario(cfg=cfg, params=params, quad=quad, vb=vb, tb=tb,
                    state0=state0, controls=controls, theta_floor=theta_floor,
                    correction=correction, lyapunov=lp,
                    steady_report=steady_report)


def apply_corruption(traj: Trajectory, spec: dict) -> Trajectory:
    """Replace trajectory fields with a deliberate non-solution for mutant audits."""
    kind = spec.get("kind")
    states = list(traj.states)
    if kind == "theta_dip":
        amp = float(spec.get("amplitude", 0.5))
        for i, s in enumerate(states[1:], start=1):
            c = np.array(s.c)
            c[0] -= amp
            states[i] = replace(s, c=c)
    elif kind == "theta_scale":
        factor = float(spec.get("factor", 5.0))
        for i, s in enumerate(states[1:], start=1):
            states[i] = replace(s, c=np.array(s.c) * factor)
    elif kind == "velocity_inflate":
        rate = float(spec.get("rate", 2.0))
        for i, s in enumerate(states[1:], start=1):
            states[i] = replace(s, a=np.array(s.a) * (1.0 + rate * s.t))
    else:
        raise ConfigError(f"unknown corruption kind {kind!r}")
    return Trajectory(times=list(traj.times), states=states, events=list(traj.events),
                      vb=traj.vb, tb=traj.tb, params=traj.params,
                      controls=traj.controls, aborted=traj.aborted)


# ---------------------------------------------------------------------------
# summary report
# ---------------------------------------------------------------------------

@dataclass
class AuditEntry:
    name: str
    passed: bool
    worst_margin: float
    tol: float
    csv: str | None = None
    detail: dict = field(default_factory=dict)


@dataclass
class SummaryReport:
    name: str
    passed: bool
    aborted: bool
    audits: list
    fits: dict
    theoretical_mu: dict
    event_counts: dict
    provenance: dict
    files: list

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "aborted": self.aborted,
            "audits": [vars(a) for a in self.audits],
            "fits": self.fits,
            "theoretical_mu": self.theoretical_mu,
            "event_counts": self.event_counts,
            "provenance": self.provenance,
            "files": self.files,
        }

    def audit(self, name) -> AuditEntry:
        for a in self.audits:
            if a.name == name:
                return a
        raise KeyError(name)


def _fit_or_skip(times, values, window, floor=1e-18):
    if np.any(values[(times >= window[0]) & (times <= window[1])] <= floor):
        return {"skipped": "zero_series"}
    fit = dg.fit_exponential_rate(times, values, window)
    return {"mu_fit": fit.mu_fit, "r_squared": fit.r_squared,
            "window": list(fit.window)}


def run_scenario(cfg, out_dir: Path | None = None) -> SummaryReport:
    """Execute steady solve -> bases -> integrate -> audits -> artifacts."""
    sc = build_scenario(cfg)
    cfg = sc.cfg
    out = Path(out_dir) if out_dir is not None else output_root(cfg)
    out.mkdir(parents=True, exist_ok=True)
    files = []

    def register(name):
        files.append(name)
        return out / name

    traj = integrate(sc.state0, sc.controls, sc.params, sc.vb, sc.tb,
                     theta_floor=sc.theta_floor)
    if cfg.corruption:
        traj = apply_corruption(traj, cfg.corruption)

    times, A, C = traj.coefficient_matrix()
    write_csv(
        register("coefficients.csv"),
        ["t"] + [f"a{i}" for i in range(A.shape[1])]
        + [f"c{i}" for i in range(C.shape[1])],
        [times] + [A[:, i] for i in range(A.shape[1])]
        + [C[:, i] for i in range(C.shape[1])],
    )
    for label, state in (("initial", traj.states[0]), ("final", traj.states[-1])):
        f = quad_fields(state, sc.vb, sc.tb, check_positivity=False)
        write_csv(register(f"grid_{label}.csv"), ["x", "y", "v1", "v2", "theta"],
                  [sc.quad.X, sc.quad.Y, f.v[:, 0], f.v[:, 1], f.theta])

    cache = dg.FieldCache(traj)
    tol = cfg.tolerances
    mu_est = dg.theoretical_mu_estimate(sc.vb, sc.params)
    entries = []

    def add_entry(name, series: dg.ResidualSeries, csv_name, header, columns):
        write_csv(register(csv_name), header, columns)
        entries.append(AuditEntry(name=name, passed=series.passed,
                                  worst_margin=series.worst, tol=series.tol,
                                  csv=csv_name))

    if "kinetic" in cfg.audits:
        e0 = cache.energy[0]
        kin_tol = tol.kinetic_budget * sc.controls.dt * max(mu_est.value, 1.0) \
            * max(e0, 1e-12) + 1e-12
        kin = dg.kinetic_energy_audit(traj, sc.params, tol=kin_tol, cache=cache)
        add_entry("kinetic", kin, "kinetic.csv",
                  ["t", "residual", "inequality", "energy", "dissipation"],
                  [kin.times, kin.values, kin.extras["inequality"],
                   kin.extras["energy"], kin.extras["dissipation"]])

    if "entropy" in cfg.audits and not sc.controls.freeze_temperature:
        ent = dg.entropy_audit(traj, sc.params, tol=tol.entropy, cache=cache)
        add_entry("entropy", ent, "entropy.csv",
                  ["t", "residual", "phi_index", "psi_index"],
                  [ent.times, ent.values, ent.extras["phi_index"],
                   ent.extras["psi_index"]])

    if "corrected_total" in cfg.audits and not sc.controls.freeze_temperature:
        te = dg.corrected_total_energy_audit(traj, sc.params, sc.correction,
                                             tol=tol.corrected_total, cache=cache)
        add_entry("corrected_total", te, "corrected_total.csv",
                  ["t", "residual", "eq_residual", "phi_index", "psi_index"],
                  [te.times, te.values, te.extras["eq_residual"],
                   te.extras["phi_index"], te.extras["psi_index"]])
        sd_times = te.extras["signdef_times"]
        sd = te.extras["signdef_min"]
        write_csv(register("signdef.csv"), ["t", "value"], [sd_times, sd])
        entries.append(AuditEntry(
            name="corrected_total_signdef", passed=bool(sd.min() >= -1e-12),
            worst_margin=float(sd.min()), tol=1e-12, csv="signdef.csv"))

    if "l1_bound" in cfg.audits and not sc.controls.freeze_temperature:
        l1 = dg.l1_bound_audit(traj, sc.params, tol=tol.l1, cache=cache)
        add_entry("l1_bound", l1, "l1_bound.csv",
                  ["t", "residual", "l1_norm", "bound"],
                  [l1.times, l1.values, l1.extras["l1_norm"], l1.extras["bound"]])

    if "min_principle" in cfg.audits and not sc.controls.freeze_temperature:
        mp = dg.min_principle_audit(traj, sc.theta_floor, tol=tol.min_principle,
                                    cache=cache)
        add_entry("min_principle", mp, "min_principle.csv",
                  ["t", "residual", "theta_min"],
                  [mp.times, mp.values, mp.extras["theta_min"]])

    if "attainment" in cfg.audits:
        att = dg.attainment_audit(traj, cache=cache)
        write_csv(register("attainment.csv"),
                  ["t", "velocity_gap", "temperature_gap"],
                  [np.array([att.t_first]), np.array([att.velocity_gap]),
                   np.array([att.temperature_gap])])
        entries.append(AuditEntry(
            name="attainment", passed=True,
            worst_margin=max(att.velocity_gap, att.temperature_gap), tol=np.inf,
            csv="attainment.csv",
            detail={"t_first": att.t_first, "velocity_gap": att.velocity_gap,
                    "temperature_gap": att.temperature_gap}))

    fits = {}
    t_arr = cache.times
    window = (float(t_arr[0] + cfg.tail_fraction * (t_arr[-1] - t_arr[0])),
              float(t_arr[-1]))
    write_csv(register("velocity_energy.csv"), ["t", "value"],
              [t_arr, cache.energy])
    fits["velocity_l2sq"] = _fit_or_skip(t_arr, cache.energy, window)

    if "lyapunov" in cfg.audits and not sc.controls.freeze_temperature:
        lt, lv = dg.lyapunov_series(traj, sc.lyapunov, sc.params, cache=cache)
        write_csv(register("lyapunov.csv"), ["t", "value"], [lt, lv])
        fits["lyapunov"] = _fit_or_skip(lt, lv, window)
        diffs = np.diff(lv[1:])
        entries.append(AuditEntry(
            name="lyapunov", passed=bool(np.all(diffs < 0.0)) or lv.max() < 1e-18,
            worst_margin=float(diffs.max()) if diffs.size else 0.0, tol=0.0,
            csv="lyapunov.csv",
            detail={"monotone_after_second": bool(np.all(diffs < 0.0))}))

    event_counts = {}
    for e in traj.events:
        event_counts[e.kind] = event_counts.get(e.kind, 0) + 1

    passed = (not traj.aborted) and all(e.passed for e in entries)
    report = SummaryReport(
        name=cfg.name,
        passed=bool(passed),
        aborted=bool(traj.aborted),
        audits=entries,
        fits=fits,
        theoretical_mu={"value": mu_est.value, "branch": mu_est.branch},
        event_counts=event_counts,
        provenance={"config_sha256": config_digest(cfg), "version": __version__},
        files=files,
    )
    with open(out / "summary.json", "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True,
                  default=_json_encode)
        fh.write("\n")
    return report


def _json_encode(obj):
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj))
