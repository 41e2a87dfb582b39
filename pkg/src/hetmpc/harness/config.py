"""Experiment configuration: presets, YAML loading, overrides and validation."""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from ..distparams import SIGMA_FLOOR
from ..env import TASKS
from ..hetbo.space import Dim, SearchSpace
from ..hetbo.trace import METHODS


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


# Per-task episode counts, MPPI horizon/rollouts and distribution ranges.
TABLE = {
    "cartpole": {
        "n_e": 40, "horizon": 10, "rollouts": 250,
        "bounds": {
            "mu_m": [0.1, 1.5], "sigma_m": [1e-5, 0.1],
            "mu_l": [0.2, 1.5], "sigma_l": [1e-5, 0.1],
        },
    },
    "pendulum": {
        "n_e": 15, "horizon": 20, "rollouts": 400,
        "bounds": {
            "mu_m": [0.2, 2.0], "sigma_m": [1e-5, 0.1],
            "mu_l": [0.2, 2.0], "sigma_l": [1e-5, 0.1],
        },
    },
}
CONTROLLER_BOUNDS = {"lambda": [1e-5, 2.5], "sigma_eps": [1e-5, 4.0]}
N_STEPS = 200
DELTA = 2.0
DEGREE = 10
BUDGET = 50
BATCH = 150

# Dimension name -> (physical parameter, moment) for the distribution part of x.
DIST_DIMS = {
    "mu_m": ("mass", "mu"), "sigma_m": ("mass", "sigma"),
    "mu_l": ("length", "mu"), "sigma_l": ("length", "sigma"),
}
DIM_ORDER = ("mu_m", "sigma_m", "mu_l", "sigma_l", "lambda", "sigma_eps")

# Controller settings used where a dimension is not being varied (grid, eval).
FIXED_DEFAULTS = {
    "pendulum": {"mu_m": 1.0, "sigma_m": SIGMA_FLOOR, "mu_l": 1.0, "sigma_l": SIGMA_FLOOR,
                 "lambda": 0.5, "sigma_eps": 2.0},
    "cartpole": {"mu_m": 1.0, "sigma_m": SIGMA_FLOOR, "mu_l": 1.0, "sigma_l": SIGMA_FLOOR,
                 "lambda": 0.5, "sigma_eps": 4.0},
}

DESK = {
    "pendulum": {"batch": 30, "rollouts": 100, "n_e": 5, "degree": 2},
    "cartpole": {"batch": 30, "rollouts": 62, "n_e": 10, "degree": 2},
}


@dataclass
class ExperimentConfig:
    task: str = "pendulum"
    method: str = "hetero-bo"
    preset: str = "paper"
    seeds: list[int] = field(default_factory=lambda: [0])
    budget: int = BUDGET
    batch: int = BATCH
    n_e: int = 15
    n_s: int = N_STEPS
    horizon: int = 20
    rollouts: int = 400
    delta: float = DELTA
    degree: int = DEGREE
    mle_restarts: int = 10
    acq_restarts: int = 20
    refit_every: int = 0
    bounds: dict[str, list[float]] = field(default_factory=dict)
    fixed: dict[str, float] = field(default_factory=dict)
    out: str = "runs"

    def to_dict(self) -> dict:
        return copy.deepcopy(asdict(self))

    def space(self) -> SearchSpace:
        return SearchSpace(tuple(Dim(n, float(lo), float(hi)) for n, (lo, hi) in self.bounds.items()))


def preset_values(task: str, preset: str = "paper") -> dict:
    if task not in TABLE:
        raise ConfigError("task", f"unknown task {task!r}; expected one of {sorted(TASKS)}")
    if preset not in ("paper", "desk"):
        raise ConfigError("preset", f"unknown preset {preset!r}; expected 'paper' or 'desk'")
    t = TABLE[task]
    bounds = {n: list(t["bounds"][n]) if n in t["bounds"] else list(CONTROLLER_BOUNDS[n])
              for n in DIM_ORDER}
    vals = {
        "task": task, "preset": preset, "n_e": t["n_e"], "horizon": t["horizon"],
        "rollouts": t["rollouts"], "bounds": bounds, "fixed": dict(FIXED_DEFAULTS[task]),
    }
    if preset == "desk":
        vals.update(DESK[task])
    return vals


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        elif v is not None:
            out[k] = copy.deepcopy(v)
    return out


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Preset defaults, then file values, then explicit overrides; validated."""
    merged = _merge(file_values or {}, overrides or {})
    task = merged.get("task", "pendulum")
    preset = merged.get("preset", "paper")
    values = _merge(preset_values(task, preset), merged)
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(unknown[0], "unknown configuration key")
    cfg = ExperimentConfig(**values)
    validate(cfg)
    return cfg


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> ExperimentConfig:
    file_values: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path) as fh:
                file_values = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigError("config", f"invalid YAML in {path}: {exc}") from None
        if not isinstance(file_values, dict):
            raise ConfigError("config", "top level must be a mapping")
    return build_config(file_values, overrides)


def _positive_int(cfg, name, minimum=1):
    v = getattr(cfg, name)
    if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
        raise ConfigError(name, f"must be an integer >= {minimum}, got {v!r}")


def validate(cfg: ExperimentConfig) -> None:
    if cfg.task not in TASKS:
        raise ConfigError("task", f"unknown task {cfg.task!r}; expected one of {sorted(TASKS)}")
    if cfg.method not in METHODS:
        raise ConfigError("method", f"unknown method {cfg.method!r}; expected one of {list(METHODS)}")
    for name in ("batch", "n_e", "n_s", "horizon", "rollouts", "degree", "mle_restarts", "acq_restarts"):
        _positive_int(cfg, name)
    _positive_int(cfg, "budget", 0)
    _positive_int(cfg, "refit_every", 0)
    if not isinstance(cfg.seeds, list) or not cfg.seeds or not all(
        isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in cfg.seeds
    ):
        raise ConfigError("seeds", f"must be a non-empty list of non-negative integers, got {cfg.seeds!r}")
    if not (isinstance(cfg.delta, (int, float)) and cfg.delta > 0):
        raise ConfigError("delta", f"must be > 0, got {cfg.delta!r}")
    if set(cfg.bounds) != set(DIM_ORDER):
        raise ConfigError("bounds", f"must define exactly {list(DIM_ORDER)}, got {sorted(cfg.bounds)}")
    cfg.bounds = {n: cfg.bounds[n] for n in DIM_ORDER}
    for name, b in cfg.bounds.items():
        path = f"bounds.{name}"
        if not (isinstance(b, (list, tuple)) and len(b) == 2):
            raise ConfigError(path, f"must be [lower, upper], got {b!r}")
        lo, hi = b
        if not all(isinstance(v, (int, float)) for v in b) or not lo < hi:
            raise ConfigError(path, f"need numeric lower < upper, got {b!r}")
        if name.startswith("sigma") or name == "lambda":
            if lo < SIGMA_FLOOR:
                raise ConfigError(path, f"lower bound must be >= {SIGMA_FLOOR}")
        elif lo <= 0:
            raise ConfigError(path, "lower bound must be > 0")
        cfg.bounds[name] = [float(lo), float(hi)]
    for name, v in cfg.fixed.items():
        if name not in DIM_ORDER:
            raise ConfigError(f"fixed.{name}", "not a search-space dimension")
        if not isinstance(v, (int, float)) or v <= 0:
            raise ConfigError(f"fixed.{name}", f"must be > 0, got {v!r}")
