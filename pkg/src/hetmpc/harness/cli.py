"""Command-line entry point.

Examples::

    hetmpc tune --task pendulum --method hetero-bo --preset desk --seeds 0 1 2 --out runs
    hetmpc grid --task pendulum --axes lambda sigma_eps --resolution 10 --out grid.csv
    hetmpc eval --task pendulum --point lambda=0.5 sigma_eps=2.0 --n-e 10
    hetmpc export-plots runs/pendulum_hetero-bo
    hetmpc validate-config --config experiment.yaml

Exit status: 0 on success, 2 on configuration errors, 3 on numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..env import DynamicsDivergence, EpisodeFailure
from ..gp import IllConditionedError
from ..mppi import NoValidRollout
from .artifacts import SchemaError
from .commands import cmd_eval, cmd_export_plots, cmd_grid, cmd_tune
from .config import ConfigError, load_config

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML experiment file")
    p.add_argument("--task", choices=["pendulum", "cartpole"])
    p.add_argument("--method", help="hetero-bo | homo-bo | cma-es | random")
    p.add_argument("--preset", choices=["paper", "desk"])
    p.add_argument("--seed", type=int, help="single seed")
    p.add_argument("--seeds", type=int, nargs="+", help="list of seeds")
    p.add_argument("--budget", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--n-e", dest="n_e", type=int, help="episodes per evaluation")
    p.add_argument("--n-s", dest="n_s", type=int, help="steps per episode")
    p.add_argument("--rollouts", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--out", help="output directory (tune) or file (grid)")


def _overrides(args) -> dict:
    keys = ("task", "method", "preset", "budget", "batch", "n_e", "n_s", "rollouts", "horizon")
    ov = {k: getattr(args, k, None) for k in keys}
    if getattr(args, "seeds", None):
        ov["seeds"] = list(args.seeds)
    elif getattr(args, "seed", None) is not None:
        ov["seeds"] = [args.seed]
    if getattr(args, "out", None) and args.command == "tune":
        ov["out"] = args.out
    return {k: v for k, v in ov.items() if v is not None}


def _parse_point(items) -> dict[str, float]:
    point = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"point.{item}", "expected name=value")
        try:
            point[name] = float(value)
        except ValueError:
            raise ConfigError(f"point.{name}", f"not a number: {value!r}") from None
    return point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetmpc", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tune", help="run a tuning campaign")
    _common(p)
    p.add_argument("--methods", nargs="+", help="run several methods on the same seeds")

    p = sub.add_parser("grid", help="reward landscape over two dimensions")
    _common(p)
    p.add_argument("--axes", nargs=2, required=True, metavar=("AXIS1", "AXIS2"))
    p.add_argument("--resolution", type=int, default=10)
    p.add_argument("--fixed", nargs="*", metavar="NAME=VALUE", help="values of the other dimensions")

    p = sub.add_parser("eval", help="evaluate one point")
    _common(p)
    p.add_argument("--point", nargs="*", metavar="NAME=VALUE", default=[])

    p = sub.add_parser("export-plots", help="write curve and noise-slice CSVs for saved runs")
    p.add_argument("run_dir")
    p.add_argument("--slice-dim", help="dimension for the trend/noise slice")
    p.add_argument("--resolution", type=int, default=101)

    p = sub.add_parser("validate-config", help="resolve and check a configuration")
    _common(p)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "export-plots":
            for path in cmd_export_plots(args.run_dir, args.slice_dim, args.resolution):
                print(path)
            return 0
        cfg = load_config(args.config, _overrides(args))
        if args.command == "validate-config":
            print(json.dumps(cfg.to_dict(), indent=1, sort_keys=True))
        elif args.command == "tune":
            results = cmd_tune(cfg, args.methods)
            for method, arts in results.items():
                best = np.array([a.best_reward for a in arts])
                print(f"{method}: best reward mean {best.mean():.3f} over {len(arts)} seed(s)")
        elif args.command == "grid":
            try:
                rows = cmd_grid(cfg, args.axes, args.resolution, _parse_point(args.fixed),
                                out=args.out)
            except KeyError as exc:
                raise ConfigError("axes", str(exc.args[0])) from None
            if args.out is None:
                print(",".join(rows[0]))
                for r in rows:
                    print(",".join(repr(v) for v in r.values()))
        elif args.command == "eval":
            try:
                summary = cmd_eval(cfg, _parse_point(args.point))
            except (KeyError, ValueError) as exc:
                raise ConfigError("point", str(exc)) from None
            print(json.dumps(summary.to_dict(), indent=1))
    except (ConfigError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EpisodeFailure, DynamicsDivergence, IllConditionedError, NoValidRollout, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
