"""Objective evaluation bookkeeping shared by BO and the baselines."""

from __future__ import annotations

import logging
import time
from typing import Callable

import numpy as np

from .space import SearchSpace
from .trace import TraceRow, TuningTrace

log = logging.getLogger(__name__)

Objective = Callable[[np.ndarray, np.random.Generator], float]


def make_streams(rng) -> dict[str, np.random.SeedSequence]:
    # Independent streams per purpose so that skipping one stage (e.g. a
    # supplied surrogate) leaves every other random draw unchanged.
    if isinstance(rng, np.random.Generator):
        entropy = int(rng.integers(2**63))
    else:
        entropy = 0 if rng is None else int(rng)
    design, objective, fit, acq = np.random.SeedSequence(entropy).spawn(4)
    return {"design": design, "objective": objective, "fit": fit, "acq": acq}


class Evaluator:
    """Calls the objective with a fresh child stream per evaluation and logs rows."""

    def __init__(self, objective: Objective, space: SearchSpace, trace: TuningTrace,
                 seq: np.random.SeedSequence, callback: Callable[[TraceRow], None] | None = None):
        self.objective = objective
        self.space = space
        self.trace = trace
        self.seq = seq
        self.callback = callback

    def __call__(self, u, phase: str, iteration: int) -> float:
        x = self.space.denormalize(u)
        child = self.seq.spawn(1)[0]
        t0 = time.perf_counter()
        failed = False
        try:
            y = float(self.objective(x, np.random.default_rng(child)))
            if not np.isfinite(y):
                raise FloatingPointError(f"objective returned {y}")
        except Exception as exc:  # noqa: BLE001 - any objective failure is recorded, not fatal
            if not self.trace.rows:
                raise
            y = float(self.trace.rewards.min())
            failed = True
            log.warning("objective failed at %s (%s); recording worst observed reward", x, exc)
        row = self.trace.append(x, y, phase, iteration, failed, time.perf_counter() - t0)
        if self.callback is not None:
            self.callback(row)
        return y
