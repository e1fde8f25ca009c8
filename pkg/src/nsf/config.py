"""Run configuration: dataclasses, JSON parsing, and parameter-window checks."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .timestepper import SCHEMES

AUDIT_NAMES = ("kinetic", "entropy", "corrected_total", "l1_bound",
               "min_principle", "attainment", "lyapunov")

_PRESET_DIR = Path(__file__).parent / "presets"


@dataclass(frozen=True)
class Resolution:
    Mx: int = 2
    My: int = 2
    Kx: int = 6
    Ky: int = 6
    q: int | None = None

    def __post_init__(self):
        if min(self.Mx, self.My, self.Kx, self.Ky) < 1:
            raise ConfigError("resolution counts must be >= 1")
        if self.q is not None and self.q < 2:
            raise ConfigError("quadrature order must be >= 2")

    @property
    def max_wavenumber(self) -> int:
        # stream-function modes sin^2(m pi x) carry wavenumber 2m
        return max(2 * self.Mx, 2 * self.My, self.Kx, self.Ky)


@dataclass(frozen=True)
class ToleranceTable:
    entropy: float = 1e-4
    corrected_total: float = 1e-4
    l1: float = 0.0
    min_principle: float = 1e-6
    kinetic_budget: float = 6.0   # tol = budget * dt * mu_est * E0 + 1e-12
    steady_residual: float = 1e-10


@dataclass(frozen=True)
class ControlsConfig:
    dt: float = 0.01
    t_end: float = 0.5
    scheme: str = "implicit-euler"
    newton_tol: float = 1e-10
    newton_max_iter: int = 30
    snapshot_every: int = 1
    max_dt_halvings: int = 8
    freeze_temperature: bool = False

    def __post_init__(self):
        if self.dt <= 0 or self.t_end < 0:
            raise ConfigError("controls need dt > 0 and t_end >= 0")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}")


@dataclass(frozen=True)
class RunConfig:
    name: str = "run"
    resolution: Resolution = Resolution()
    fluid: dict = field(default_factory=lambda: {
        "p": 2.0, "delta": 1.0,
        "nu": {"family": "constant", "value": 1.0},
        "kappa": {"family": "constant", "value": 1.0},
    })
    correction: dict = field(default_factory=lambda: {
        "family": "prototype", "alpha": 0.6,
    })
    lyapunov: dict = field(default_factory=lambda: {"alpha": 0.6, "beta": 1.0})
    boundary: dict = field(default_factory=lambda: {
        "family": "constant", "value": 1.0,
    })
    initial: dict = field(default_factory=lambda: {
        "velocity": {"family": "zero"},
        "temperature": {"family": "steady"},
    })
    controls: ControlsConfig = ControlsConfig()
    tolerances: ToleranceTable = ToleranceTable()
    audits: tuple = AUDIT_NAMES
    tail_fraction: float = 0.5
    sampling: dict = field(default_factory=dict)
    corruption: dict | None = None
    output_dir: str = "out/run"
    seed: int = 0


def _build_section(cls, data, errors, where):
    kwargs = {}
    names = {f.name for f in fields(cls)}
    for key, value in data.items():
        if key not in names:
            errors.append(f"{where}: unknown key {key!r} (known: {sorted(names)})")
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except (ConfigError, TypeError) as exc:
        errors.append(f"{where}: {exc}")
        return None


def _alpha_window_for_p(p: float):
    """Admissible Lyapunov exponent window for a given growth exponent p.

    For p in [8/5, 2]: (1/2, 2/3] intersected with [2 - 5p/6, 2/3]; for
    p in [2, 11/5): (1/2, 2/3]. Empty below p = 8/5.
    """
    if p < 8.0 / 5.0 - 1e-12:
        return None
    lo = max(0.5, 2.0 - 5.0 * p / 6.0) if p < 2.0 else 0.5
    return (lo, 2.0 / 3.0)


def parse_config(source) -> RunConfig:
    """Parse a config from a dict, JSON text, file path, or preset name.

    Collects all problems and raises a single ConfigError listing them;
    window violations cite the constraint they break.
    """
    if isinstance(source, RunConfig):
        return source
    if isinstance(source, (str, Path)):
        path = Path(source)
        if path.exists():
            text = path.read_text()
        elif str(source).lstrip().startswith("{"):
            text = str(source)
        else:
            preset = _PRESET_DIR / f"{source}.json"
            if preset.exists():
                text = preset.read_text()
            else:
                raise ConfigError(
                    f"config {source!r} is neither a file, JSON text, nor a "
                    f"preset name (presets: {sorted(p.stem for p in _PRESET_DIR.glob('*.json'))})"
                )
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
    elif isinstance(source, dict):
        data = dict(source)
    else:
        raise ConfigError(f"cannot parse config from {type(source)}")

    errors = []
    known = {f.name for f in fields(RunConfig)}
    for key in data:
        if key not in known:
            errors.append(f"unknown top-level key {key!r} (known: {sorted(known)})")

    kwargs = {}
    if "resolution" in data:
        kwargs["resolution"] = _build_section(Resolution, data["resolution"],
                                              errors, "resolution")
    if "controls" in data:
        kwargs["controls"] = _build_section(ControlsConfig, data["controls"],
                                            errors, "controls")
    if "tolerances" in data:
        kwargs["tolerances"] = _build_section(ToleranceTable, data["tolerances"],
                                              errors, "tolerances")
    for key in ("name", "fluid", "correction", "lyapunov", "boundary", "initial",
                "tail_fraction", "sampling", "corruption", "output_dir", "seed"):
        if key in data:
            kwargs[key] = data[key]
    if "audits" in data:
        audits = tuple(data["audits"])
        for a in audits:
            if a not in AUDIT_NAMES:
                errors.append(f"unknown audit {a!r} (known: {AUDIT_NAMES})")
        kwargs["audits"] = audits

    if errors:
        raise ConfigError(errors)
    cfg = RunConfig(**{k: v for k, v in kwargs.items() if v is not None})
    validate_windows(cfg)
    return cfg


def validate_windows(cfg: RunConfig):
    """Exponent-window validation tied to the decay theory."""
    errors = []
    p = float(cfg.fluid.get("p", 2.0))
    if not (6.0 / 5.0 < p < 11.0 / 5.0):
        errors.append(f"fluid.p={p} outside the admissible window (6/5, 11/5)")

    if "lyapunov" in cfg.audits:
        alpha = float(cfg.lyapunov.get("alpha", 0.6))
        window = _alpha_window_for_p(p)
        if window is None:
            errors.append(
                f"lyapunov audit enabled but the alpha window "
                f"(1/2, 2/3] ∩ [2 - 5p/6, 2/3] is empty for p={p} < 8/5"
            )
        else:
            lo, hi = window
            # left end is closed when it comes from [2 - 5p/6, ...], open at 1/2
            left_ok = alpha > lo + 1e-12 if lo == 0.5 else alpha >= lo - 1e-12
            if not (left_ok and alpha <= hi + 1e-12):
                errors.append(
                    f"lyapunov.alpha={alpha} outside the admissible window "
                    f"({lo:.4f}, {hi:.4f}] for p={p} "
                    "(decay theory: alpha in (1/2, 2/3], and alpha >= 2 - 5p/6 "
                    "when p < 2)"
                )
        beta = float(cfg.lyapunov.get("beta", 1.0))
        if beta <= 0:
            errors.append(f"lyapunov.beta={beta} must be positive")

    if cfg.correction.get("family") == "prototype":
        a = float(cfg.correction.get("alpha", 0.6))
        if not (0.0 < a < 1.0):
            errors.append(f"correction.alpha={a} must lie in (0, 1)")

    if not (0.0 < cfg.tail_fraction < 1.0):
        errors.append(f"tail_fraction={cfg.tail_fraction} must lie in (0, 1)")

    if errors:
        raise ConfigError(errors)


def config_digest(cfg: RunConfig) -> str:
    def encode(obj):
        if isinstance(obj, (Resolution, ControlsConfig, ToleranceTable)):
            return {f.name: getattr(obj, f.name) for f in fields(obj)}
        if isinstance(obj, tuple):
            return list(obj)
        raise TypeError(type(obj))

    payload = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    text = json.dumps(payload, sort_keys=True, default=encode)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def preset_names():
    return sorted(p.stem for p in _PRESET_DIR.glob("*.json"))
