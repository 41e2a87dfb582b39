from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

METHODS = ("hetero-bo", "homo-bo", "cma-es", "random")


@dataclass
class TraceRow:
    """One objective evaluation.

    ``iteration`` is 0 for initial-design rows and k >= 1 for the k-th
    evaluation after the design.
    """

    index: int
    iteration: int
    phase: str
    x: list[float]
    reward: float
    best: float
    failed: bool = False
    wall_time: float = 0.0

    def record(self) -> dict:
        """Persistable form; wall time is left out so traces are reproducible byte for byte."""
        d = asdict(self)
        d.pop("wall_time")
        return d

    @classmethod
    def from_record(cls, d: dict) -> "TraceRow":
        return cls(
            int(d["index"]), int(d["iteration"]), str(d["phase"]), [float(v) for v in d["x"]],
            float(d["reward"]), float(d["best"]), bool(d.get("failed", False)),
            float(d.get("wall_time", 0.0)),
        )


@dataclass
class TuningTrace:
    method: str
    names: list[str]
    rows: list[TraceRow] = field(default_factory=list)
    start_index: int | None = None
    info: dict = field(default_factory=dict)

    def append(self, x, reward: float, phase: str, iteration: int, failed=False, wall_time=0.0) -> TraceRow:
        best = reward if not self.rows else max(self.rows[-1].best, reward)
        row = TraceRow(len(self.rows), iteration, phase, [float(v) for v in x], float(reward),
                       float(best), failed, wall_time)
        self.rows.append(row)
        return row

    @property
    def rewards(self) -> np.ndarray:
        return np.array([r.reward for r in self.rows])

    @property
    def best_reward(self) -> float:
        return self.rows[-1].best if self.rows else float("-inf")

    @property
    def best_x(self) -> list[float]:
        return self.rows[int(np.argmax(self.rewards))].x if self.rows else []

    @property
    def n_init(self) -> int:
        return sum(r.phase == "init" for r in self.rows)

    @property
    def budget(self) -> int:
        return len(self.rows) - self.n_init

    def curve(self) -> tuple[np.ndarray, np.ndarray]:
        """Best-so-far and observed reward per iteration 0..budget.

        Iteration 0 is the state after the initial design: best of the design,
        and the reward at the starting incumbent (the worst design point).
        """
        n0 = self.n_init
        r = self.rewards
        best = np.empty(self.budget + 1)
        obs = np.empty(self.budget + 1)
        best[0] = self.rows[n0 - 1].best if n0 else -np.inf
        if self.start_index is not None:
            obs[0] = r[self.start_index]
        else:
            obs[0] = r[:n0].min() if n0 else np.nan
        for k in range(1, self.budget + 1):
            best[k] = self.rows[n0 + k - 1].best
            obs[k] = r[n0 + k - 1]
        return best, obs
