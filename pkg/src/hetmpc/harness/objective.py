"""Maps a search point to a controller and scores it by episode rewards."""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from ..distparams import GammaSpec
from ..env import EpisodeResult, Task, make_task, run_episode
from ..mppi import MppiConfig, MppiController
from .config import DIST_DIMS, ExperimentConfig


def decode(point: Mapping[str, float], horizon: int, rollouts: int) -> tuple[list[GammaSpec], MppiConfig]:
    """Distribution specs for each randomised parameter and the MPPI settings."""
    moments: dict[str, dict[str, float]] = {}
    for dim, (param, moment) in DIST_DIMS.items():
        moments.setdefault(param, {})[moment] = float(point[dim])
    specs = [GammaSpec(p, m["mu"], m["sigma"]) for p, m in moments.items()]
    cfg = MppiConfig(float(point["lambda"]), float(point["sigma_eps"]), horizon, rollouts)
    return specs, cfg


def episode_seeds(rng_or_seed, n: int) -> list[int]:
    if isinstance(rng_or_seed, np.random.Generator):
        return [int(s) for s in rng_or_seed.integers(0, 2**32, size=n)]
    return [int(s) for s in np.random.SeedSequence(int(rng_or_seed)).generate_state(n)]


class MpcObjective:
    """Mean cumulative reward of MPPI over ``n_e`` episodes on the true system."""

    def __init__(self, task: Task, names: Sequence[str], horizon: int, rollouts: int,
                 n_e: int, n_s: int, true_params: Mapping[str, float] | None = None):
        self.task = task
        self.names = list(names)
        self.horizon = horizon
        self.rollouts = rollouts
        self.n_e = n_e
        self.n_s = n_s
        self.true_params = dict(task.true_params if true_params is None else true_params)

    @classmethod
    def from_config(cls, cfg: ExperimentConfig) -> "MpcObjective":
        return cls(make_task(cfg.task), list(cfg.bounds), cfg.horizon, cfg.rollouts, cfg.n_e, cfg.n_s)

    def point(self, x) -> dict[str, float]:
        if isinstance(x, Mapping):
            return {n: float(x[n]) for n in self.names}
        return dict(zip(self.names, (float(v) for v in x)))

    def episodes(self, x, seeds: Sequence[int]) -> list[EpisodeResult]:
        specs, mcfg = decode(self.point(x), self.horizon, self.rollouts)
        controller = MppiController(self.task, mcfg)
        return [run_episode(self.task, controller, specs, self.true_params, self.n_s, s) for s in seeds]

    def __call__(self, x, rng) -> float:
        results = self.episodes(x, episode_seeds(rng, self.n_e))
        return float(np.mean([r.cumulative_reward for r in results]))
