"""Study configuration: flat ``key = value`` files plus command-line overrides."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from .assembly import METHODS
from .linsolve import SolverConfig
from .models import CASE_KEYS
from .stabilization import StabConfig


class ConfigError(ValueError):
    pass


DEFAULT_GRIDS = (10, 20, 40, 80)
BASE_DT = 0.1


def default_dts(n: int):
    return tuple(BASE_DT / 2**i for i in range(n))


@dataclass(frozen=True)
class StudyConfig:
    case: str = "I-a"
    grids: tuple = DEFAULT_GRIDS
    dts: tuple = default_dts(len(DEFAULT_GRIDS))
    theta: int = 1
    T: float = 1.0
    methods: tuple = ("galerkin", "asgs")
    stab: StabConfig = field(default_factory=StabConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    picard_iters: int = 0
    pressure_penalty: Optional[float] = None
    estimate: bool = False
    timing: bool = False
    jobs: int = 1
    out: Optional[str] = None

    def __post_init__(self):
        if self.case not in CASE_KEYS:
            raise ConfigError(f"unknown case {self.case!r}; expected one of {', '.join(CASE_KEYS)}")
        if len(self.grids) != len(self.dts):
            raise ConfigError(f"length mismatch: {len(self.grids)} grids but {len(self.dts)} time steps")
        if not self.grids:
            raise ConfigError("at least one grid is required")
        if any(n < 1 for n in self.grids):
            raise ConfigError("grid sizes must be positive")
        if any(b != 2 * a for a, b in zip(self.grids, self.grids[1:])):
            raise ConfigError(f"grids must double at every level, got {list(self.grids)}")
        if any(dt <= 0 for dt in self.dts):
            raise ConfigError("time steps must be positive")
        if not self.T > 0:
            raise ConfigError("final time T must be positive")
        for dt in self.dts:
            if abs(round(self.T / dt) * dt - self.T) > 1e-12 * max(1.0, self.T):
                raise ConfigError(f"T={self.T:g} is not an integer multiple of dt={dt:g}")
        if self.theta not in (0, 1):
            raise ConfigError("theta must be 0 or 1")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigError(f"methods must be a non-empty subset of {METHODS}, got {list(self.methods)}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")


def _ints(text):
    return tuple(int(v) for v in str(text).split(",") if v.strip())


def _floats(text):
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _terms(text):
    v = str(text).strip().lower()
    return None if v in ("", "none", "inf", "limit") else int(v)


def _opt_float(text):
    v = str(text).strip().lower()
    return None if v in ("", "none", "default") else float(v)


# key -> (section, field, parser)
KEYS = {
    "case": (None, "case", str),
    "grids": (None, "grids", _ints),
    "dts": (None, "dts", _floats),
    "methods": (None, "methods", lambda s: tuple(m.strip().lower() for m in s.split(",") if m.strip())),
    "time.theta": (None, "theta", int),
    "time.T": (None, "T", float),
    "picard_iters": (None, "picard_iters", int),
    "galerkin.pressure_penalty": (None, "pressure_penalty", _opt_float),
    "estimate": (None, "estimate", _bool),
    "timing": (None, "timing", _bool),
    "jobs": (None, "jobs", int),
    "out": (None, "out", str),
    "stab.c1": ("stab", "c1", float),
    "stab.c2": ("stab", "c2", float),
    "stab.c3": ("stab", "c3", float),
    "stab.subscale_mode": ("stab", "subscale_mode", lambda s: s.strip().lower()),
    "stab.subscale_terms": ("stab", "subscale_terms", _terms),
    "stab.tau_scale": ("stab", "tau_scale", float),
    "stab.subscale_history": ("stab", "subscale_history", str),
    "solver.method": ("solver", "method", lambda s: s.strip().lower()),
    "solver.tol": ("solver", "tol", float),
    "solver.max_iters": ("solver", "max_iters", int),
    "solver.pressure_fix": ("solver", "pressure_fix", lambda s: s.strip().lower()),
}


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def parse_config(path=None, overrides: Optional[dict] = None) -> StudyConfig:
    """Build a StudyConfig from an optional file and overrides (overrides win)."""
    raw = {}
    if path is not None:
        raw.update(read_config_file(path))
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    unknown = sorted(set(raw) - set(KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")

    top, sections = {}, {"stab": {}, "solver": {}}
    for key, text in raw.items():
        section, name, parse = KEYS[key]
        try:
            value = parse(text) if isinstance(text, str) else text
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {text!r} ({exc})") from exc
        (sections[section] if section else top)[name] = value

    if "grids" in top and "dts" not in top:
        top["dts"] = default_dts(len(top["grids"]))
    try:
        stab = replace(StabConfig(), **sections["stab"])
        solver = replace(SolverConfig(), **sections["solver"])
        return StudyConfig(stab=stab, solver=solver, **top)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
