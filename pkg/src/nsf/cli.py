"""Command-line interface.

Exit codes: 0 pass, 1 audit/validation failure, 2 config error, 3 solver abort.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from .config import parse_config, preset_names
from .constitutive import SamplePlan, fluid_params, validate_constitutive
from .correction import GridSpec, make_correction, validate_correction
from .errors import ConfigError, SolverError, WindowError
from .harness import build_scenario, run_scenario
from .lyapunov import ConvexitySamplePlan, check_f_convexity
from .diagnostics import fit_exponential_rate
from .steady import verify_steady

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _dump(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=True, default=_encode)
    sys.stdout.write("\n")


def _encode(obj):
    if dataclasses.is_dataclass(obj):
        return dataclasses.asdict(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj))


def _cmd_run(args) -> int:
    cfg = parse_config(args.config)
    report = run_scenario(cfg, out_dir=args.output)
    _dump(report.to_dict())
    if report.aborted:
        return EXIT_SOLVER
    return EXIT_PASS if report.passed else EXIT_FAIL


def _cmd_validate_constitutive(args) -> int:
    cfg = parse_config(args.config)
    fl = cfg.fluid
    params = fluid_params(fl["p"], fl.get("delta", 1.0), fl.get("nu", 1.0),
                          fl.get("kappa", 1.0))
    plan = SamplePlan(**cfg.sampling) if cfg.sampling else SamplePlan()
    report = validate_constitutive(params, plan)
    _dump(report)
    return EXIT_PASS if report.passed else EXIT_FAIL


def _cmd_validate_correction(args) -> int:
    cfg = parse_config(args.config)
    lo = float(cfg.sampling.get("theta_lo", 1.0)) if cfg.sampling else 1.0
    hi = float(cfg.sampling.get("theta_hi", 2.0)) if cfg.sampling else 2.0
    fn = make_correction(cfg.correction, lo, hi)
    report = validate_correction(fn, GridSpec())
    _dump(report)
    return EXIT_PASS if report.passed else EXIT_FAIL


def _cmd_check_zaba(args) -> int:
    cfg = parse_config(args.config)
    fl = cfg.fluid
    params = fluid_params(fl["p"], fl.get("delta", 1.0), fl.get("nu", 1.0),
                          fl.get("kappa", 1.0))
    alpha = args.alpha if args.alpha is not None else float(
        cfg.lyapunov.get("alpha", 0.6)
    )
    plan_kwargs = {k: v for k, v in cfg.sampling.items()
                   if k in ("n_samples", "seed", "lo", "hi")}
    report = check_f_convexity(alpha, params, ConvexitySamplePlan(**plan_kwargs))
    _dump(report)
    return EXIT_PASS if report.passed else EXIT_FAIL


def _cmd_fit_decay(args) -> int:
    data = np.genfromtxt(args.csv, delimiter=",", names=True)
    t = np.asarray(data["t"], dtype=float)
    v = np.asarray(data[data.dtype.names[1]], dtype=float)
    window = None
    if args.window:
        a, b = args.window.split(",")
        window = (float(a), float(b))
    fit = fit_exponential_rate(t, v, window)
    _dump(fit)
    return EXIT_PASS


def _cmd_steady(args) -> int:
    sc = build_scenario(parse_config(args.config))
    report = verify_steady(sc.tb.steady, sc.params, sc.quad)
    _dump(report)
    ok = (report.worst_weak_residual <= sc.cfg.tolerances.steady_residual
          and report.bounds_margin <= 1e-8)
    return EXIT_PASS if ok else EXIT_FAIL


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nsf",
        description="Spectral Galerkin simulator and inequality auditor "
                    "(heat-conducting power-law fluid on the unit square)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario and all enabled audits")
    p_run.add_argument("config", help=f"config path, JSON, or preset name "
                                      f"({', '.join(preset_names())})")
    p_run.add_argument("--output", default=None, help="output directory override")
    p_run.set_defaults(fn=_cmd_run)

    p_vc = sub.add_parser("validate-constitutive",
                          help="sample the structural stress-law conditions")
    p_vc.add_argument("config")
    p_vc.set_defaults(fn=_cmd_validate_constitutive)

    p_vb = sub.add_parser("validate-correction",
                          help="check the correction-weight inequalities on a grid")
    p_vb.add_argument("config")
    p_vb.set_defaults(fn=_cmd_validate_correction)

    p_z = sub.add_parser("check-zaba",
                         help="sample the square-root convexity defect of f_alpha")
    p_z.add_argument("config")
    p_z.add_argument("--alpha", type=float, default=None)
    p_z.set_defaults(fn=_cmd_check_zaba)

    p_fd = sub.add_parser("fit-decay", help="fit an exponential rate to a CSV series")
    p_fd.add_argument("csv")
    p_fd.add_argument("--window", default=None, help="t_a,t_b")
    p_fd.set_defaults(fn=_cmd_fit_decay)

    p_st = sub.add_parser("steady", help="solve and verify the steady temperature")
    p_st.add_argument("config")
    p_st.set_defaults(fn=_cmd_steady)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, WindowError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
