"""Experiment commands behind the CLI."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..gp import ObservationSet
from ..hetbo.loop import BOSettings, tune
from ..hetbo.noise import NoiseModel, RewardTrendModel
from ..hetbo.trace import TuningTrace
from .artifacts import RunArtifact, SchemaError, TraceWriter, find_runs, load_run
from .config import ExperimentConfig, validate
from .objective import MpcObjective, episode_seeds

log = logging.getLogger(__name__)


def bo_settings(cfg: ExperimentConfig) -> BOSettings:
    return BOSettings(batch=cfg.batch, delta=cfg.delta, degree=cfg.degree,
                      mle_restarts=cfg.mle_restarts, acq_restarts=cfg.acq_restarts,
                      refit_every=cfg.refit_every)


def run_dir_for(cfg: ExperimentConfig, seed: int, method: str | None = None) -> Path:
    return Path(cfg.out) / f"{cfg.task}_{method or cfg.method}" / f"seed_{seed}"


def run_seed(cfg: ExperimentConfig, seed: int, method: str | None = None,
             objective=None, write: bool = True) -> RunArtifact:
    """One tuning run; the trace is streamed to disk while it runs."""
    method = method or cfg.method
    objective = objective or MpcObjective.from_config(cfg)
    space = cfg.space()
    snapshot = cfg.to_dict()
    snapshot["method"] = method
    if write:
        run_dir = run_dir_for(cfg, seed, method)
        with TraceWriter(run_dir) as writer:
            trace = tune(objective, space, cfg.budget, method, bo_settings(cfg), seed, callback=writer)
    else:
        trace = tune(objective, space, cfg.budget, method, bo_settings(cfg), seed)
    art = RunArtifact.from_trace(trace, snapshot, seed, cfg.task, objective.true_params)
    if write:
        art.save(run_dir)
    return art


@dataclass
class Aggregate:
    iterations: np.ndarray
    best: np.ndarray  # (n_seeds, budget + 1)
    observed: np.ndarray

    def rows(self) -> list[dict]:
        out = []
        for k, it in enumerate(self.iterations):
            b, o = self.best[:, k], self.observed[:, k]
            bm, bs = float(b.mean()), float(b.std())
            om, os_ = float(o.mean()), float(o.std())
            out.append({
                "iteration": int(it), "best_mean": bm, "best_std": bs,
                "best_lo": bm - 2 * bs, "best_hi": bm + 2 * bs,
                "observed_mean": om, "observed_std": os_,
                "observed_lo": om - 2 * os_, "observed_hi": om + 2 * os_,
            })
        return out


def aggregate(traces: Sequence[TuningTrace]) -> Aggregate:
    """Pointwise mean/std across seeds of the per-iteration curves."""
    curves = [t.curve() for t in traces]
    lengths = {len(b) for b, _ in curves}
    if len(lengths) != 1:
        raise ValueError(f"traces have different budgets: {sorted(lengths)}")
    best = np.vstack([b for b, _ in curves])
    obs = np.vstack([o for _, o in curves])
    return Aggregate(np.arange(best.shape[1]), best, obs)


def write_csv(path: Path, rows: Iterable[dict], header: Sequence[str] | None = None) -> Path:
    rows = list(rows)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = list(header or (rows[0].keys() if rows else []))
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return path


def cmd_tune(cfg: ExperimentConfig, methods: Sequence[str] | None = None, write: bool = True
             ) -> dict[str, list[RunArtifact]]:
    """Tune for every seed (and method); writes run dirs and an aggregate curve per method."""
    validate(cfg)
    objective = MpcObjective.from_config(cfg)
    results: dict[str, list[RunArtifact]] = {}
    for method in methods or [cfg.method]:
        arts = []
        for seed in cfg.seeds:
            log.info("tuning %s with %s, seed %d", cfg.task, method, seed)
            arts.append(run_seed(cfg, seed, method, objective, write))
        results[method] = arts
        if write:
            agg = aggregate([a.trace() for a in arts])
            write_csv(Path(cfg.out) / f"{cfg.task}_{method}" / "aggregate.csv", agg.rows())
    return results


def grid_values(cfg: ExperimentConfig, name: str, resolution: int) -> np.ndarray:
    if name not in cfg.bounds:
        raise KeyError(f"axis {name!r} is not in the search space {list(cfg.bounds)}")
    lo, hi = cfg.bounds[name]
    return np.linspace(lo, hi, resolution)


def cmd_grid(cfg: ExperimentConfig, axes: Sequence[str], resolution: int = 10,
             fixed: dict | None = None, n_e: int | None = None, out: str | Path | None = None
             ) -> list[dict]:
    """Mean and std of episode reward on a resolution x resolution grid of two dimensions.

    Every cell reuses the same episode seeds (from the first config seed), so
    cells differ only through the varied dimensions.
    """
    if len(axes) != 2 or axes[0] == axes[1]:
        raise ValueError(f"grid needs exactly two distinct axes, got {list(axes)}")
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    a_vals = grid_values(cfg, axes[0], resolution)
    b_vals = grid_values(cfg, axes[1], resolution)
    point = dict(cfg.fixed)
    point.update(fixed or {})
    objective = MpcObjective.from_config(cfg)
    seeds = episode_seeds(cfg.seeds[0], n_e or cfg.n_e)
    rows = []
    for a in a_vals:
        for b in b_vals:
            point[axes[0]], point[axes[1]] = float(a), float(b)
            r = np.array([e.cumulative_reward for e in objective.episodes(point, seeds)])
            rows.append({axes[0]: float(a), axes[1]: float(b),
                         "mean_reward": float(r.mean()), "std_reward": float(r.std())})
    if out is not None:
        write_csv(Path(out), rows, [axes[0], axes[1], "mean_reward", "std_reward"])
    return rows


@dataclass
class EvalSummary:
    mean: float
    std: float
    min: float
    max: float
    n: int
    single_sample: bool
    episodes: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def cmd_eval(cfg: ExperimentConfig, x: dict, n_e: int | None = None,
             seeds: Sequence[int] | None = None) -> EvalSummary:
    """Run ``n_e`` episodes per seed at ``x`` and summarise the cumulative rewards."""
    point = dict(cfg.fixed)
    point.update(x)
    space = cfg.space()
    vec = np.array([point[n] for n in space.names])
    if not space.contains(vec):
        raise ValueError(f"point {point} is outside the search-space bounds")
    objective = MpcObjective.from_config(cfg)
    n_e = n_e or cfg.n_e
    episodes = []
    for seed in seeds if seeds is not None else cfg.seeds:
        ep_seeds = episode_seeds(seed, n_e)
        for ep_seed, res in zip(ep_seeds, objective.episodes(point, ep_seeds)):
            episodes.append({"seed": seed, "episode_seed": ep_seed, "reward": res.cumulative_reward})
    r = np.array([e["reward"] for e in episodes])
    return EvalSummary(float(r.mean()), float(r.std(ddof=1)) if r.size > 1 else 0.0,
                       float(r.min()), float(r.max()), int(r.size), r.size == 1, episodes)


def _slice_rows(art: RunArtifact, dim: str, resolution: int) -> list[dict]:
    fits = art.info.get("fits")
    if not fits:
        raise SchemaError(f"run for seed {art.seed} has no surrogate fit recorded")
    fit = fits[-1]
    if fit.get("trend") is None:
        raise SchemaError(f"run for seed {art.seed} has no reward trend (not a heteroscedastic run)")
    cfg = ExperimentConfig(**art.config)
    space = cfg.space()
    trend = RewardTrendModel.from_dict(fit["trend"])
    noise = NoiseModel.from_dict(fit["noise"])
    base = space.normalize([art.best_x[n] for n in space.names])
    k = space.index(dim)
    U = np.repeat(base[None, :], resolution, axis=0)
    U[:, k] = np.linspace(0.0, 1.0, resolution)
    data = ObservationSet(np.empty((0, space.d)), [], fit["y_mean"], fit["y_std"])
    g = data.to_raw(trend(U))
    s = noise.std(U) * fit["y_std"]
    zeta = noise.zeta * fit["y_std"]
    X = space.denormalize(U)
    return [{dim: float(X[i, k]), "g_hat": float(g[i]), "sigma_nu": float(s[i]),
             "lower": float(g[i] - 2 * s[i]), "upper": float(g[i] + 2 * s[i]), "zeta": float(zeta)}
            for i in range(resolution)]


def cmd_export_plots(run_dir: str | Path, slice_dim: str | None = None, resolution: int = 101
                     ) -> list[Path]:
    """Write curve CSVs (and, for heteroscedastic runs, a trend/noise slice) next to each run."""
    runs = find_runs(run_dir)
    if not runs:
        raise SchemaError(f"{run_dir}: no run artifacts found")
    written = []
    by_group: dict[Path, list[RunArtifact]] = {}
    for rd in runs:
        art = load_run(rd)
        best, obs = art.trace().curve()
        written.append(write_csv(rd / "curve.csv", (
            {"iteration": k, "best_so_far": float(best[k]), "observed": float(obs[k])}
            for k in range(best.size))))
        if art.method == "hetero-bo":
            dim = slice_dim or art.names[0]
            written.append(write_csv(rd / f"slice_{dim}.csv", _slice_rows(art, dim, resolution)))
        by_group.setdefault(rd.parent, []).append(art)
    for group, arts in by_group.items():
        if len(arts) > 1 and len({a.method for a in arts}) == 1:
            written.append(write_csv(group / "aggregate.csv", aggregate([a.trace() for a in arts]).rows()))
    return written
