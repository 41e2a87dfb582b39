"""On-disk run artifacts.

A run directory holds ``trace.jsonl`` (one JSON object per objective
evaluation, appended as the run progresses) and ``run.json`` (resolved
config, seed, environment record, surrogate fits and the final result).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..hetbo.trace import TraceRow, TuningTrace

SCHEMA_VERSION = 1
TRACE_FILE = "trace.jsonl"
RUN_FILE = "run.json"
REQUIRED_RUN_KEYS = ("schema_version", "config", "seed", "method", "task", "true_params", "names")


class SchemaError(ValueError):
    pass


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, allow_nan=True)


class TraceWriter:
    """Appends trace rows to ``trace.jsonl`` as they are produced."""

    def __init__(self, run_dir: Path):
        run_dir.mkdir(parents=True, exist_ok=True)
        self.path = run_dir / TRACE_FILE
        self.fh = open(self.path, "w")

    def __call__(self, row: TraceRow) -> None:
        self.fh.write(_dumps(row.record()) + "\n")
        self.fh.flush()

    def close(self) -> None:
        self.fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@dataclass
class RunArtifact:
    config: dict
    seed: int
    method: str
    task: str
    true_params: dict
    names: list[str]
    rows: list[TraceRow] = field(default_factory=list)
    start_index: int | None = None
    info: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def from_trace(cls, trace: TuningTrace, config: dict, seed: int, task: str,
                   true_params: dict) -> "RunArtifact":
        return cls(config, seed, trace.method, task, dict(true_params), list(trace.names),
                   list(trace.rows), trace.start_index, dict(trace.info))

    def trace(self) -> TuningTrace:
        return TuningTrace(self.method, list(self.names), list(self.rows), self.start_index, dict(self.info))

    @property
    def best_reward(self) -> float:
        return self.trace().best_reward

    @property
    def best_x(self) -> dict[str, float]:
        return dict(zip(self.names, self.trace().best_x))

    def save(self, run_dir: str | Path) -> Path:
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        with open(run_dir / TRACE_FILE, "w") as fh:
            for row in self.rows:
                fh.write(_dumps(row.record()) + "\n")
        meta = {
            "schema_version": self.schema_version,
            "config": self.config,
            "seed": self.seed,
            "method": self.method,
            "task": self.task,
            "true_params": self.true_params,
            "names": self.names,
            "start_index": self.start_index,
            "info": self.info,
            "wall_times": [r.wall_time for r in self.rows],
            "best_x": self.best_x if self.rows else None,
            "best_reward": self.best_reward if self.rows else None,
        }
        with open(run_dir / RUN_FILE, "w") as fh:
            fh.write(json.dumps(meta, sort_keys=True, indent=1) + "\n")
        return run_dir


def load_run(run_dir: str | Path) -> RunArtifact:
    run_dir = Path(run_dir)
    try:
        with open(run_dir / RUN_FILE) as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        raise SchemaError(f"{run_dir}: no {RUN_FILE}") from None
    version = meta.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"{run_dir}: schema version {version!r}, expected {SCHEMA_VERSION}")
    missing = [k for k in REQUIRED_RUN_KEYS if k not in meta]
    if missing:
        raise SchemaError(f"{run_dir}: schema version {version} artifact lacks fields {missing}")
    rows = []
    try:
        with open(run_dir / TRACE_FILE) as fh:
            for line in fh:
                if line.strip():
                    rows.append(TraceRow.from_record(json.loads(line)))
    except FileNotFoundError:
        raise SchemaError(f"{run_dir}: no {TRACE_FILE}") from None
    except KeyError as exc:
        raise SchemaError(f"{run_dir}: trace row lacks field {exc.args[0]!r}") from None
    for row, wt in zip(rows, meta.get("wall_times", [])):
        row.wall_time = float(wt)
    return RunArtifact(
        meta["config"], int(meta["seed"]), meta["method"], meta["task"], meta["true_params"],
        list(meta["names"]), rows, meta.get("start_index"), meta.get("info", {}), version,
    )


def find_runs(root: str | Path) -> list[Path]:
    """Run directories at or below ``root``, sorted."""
    root = Path(root)
    if (root / RUN_FILE).exists():
        return [root]
    return sorted(p.parent for p in root.rglob(RUN_FILE))
