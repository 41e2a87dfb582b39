import csv
import json
import math

import numpy as np
import pytest

from hetmpc.env import EpisodeFailure
from hetmpc.harness import cli
from hetmpc.harness.artifacts import RUN_FILE, TRACE_FILE, SchemaError, load_run
from hetmpc.harness.commands import aggregate, cmd_eval, cmd_export_plots, cmd_grid, cmd_tune
from hetmpc.harness.config import ConfigError, build_config, load_config
from hetmpc.harness.objective import MpcObjective, decode, episode_seeds


def small(tmp_path, **kw):
    values = {"task": "pendulum", "preset": "desk", "seeds": [0], "budget": 2, "batch": 4,
              "n_e": 1, "n_s": 20, "rollouts": 20, "horizon": 5, "mle_restarts": 2,
              "acq_restarts": 2, "out": str(tmp_path / "runs")}
    values.update(kw)
    return build_config(values)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


# --- configuration -------------------------------------------------------------------------


def test_default_settings_table():
    p = build_config({"task": "pendulum"})
    assert (p.n_e, p.horizon, p.rollouts) == (15, 20, 400)
    assert p.bounds == {"mu_m": [0.2, 2.0], "sigma_m": [1e-5, 0.1], "mu_l": [0.2, 2.0],
                        "sigma_l": [1e-5, 0.1], "lambda": [1e-5, 2.5], "sigma_eps": [1e-5, 4.0]}
    c = build_config({"task": "cartpole"})
    assert (c.n_e, c.horizon, c.rollouts) == (40, 10, 250)
    assert c.bounds["mu_m"] == [0.1, 1.5] and c.bounds["mu_l"] == [0.2, 1.5]
    assert c.bounds["sigma_eps"] == [1e-5, 4.0]
    for cfg in (p, c):
        assert (cfg.n_s, cfg.delta, cfg.degree, cfg.budget, cfg.batch) == (200, 2.0, 10, 50, 150)
        assert cfg.space().d == 6


def test_desk_preset_keeps_bounds():
    d = build_config({"task": "pendulum", "preset": "desk"})
    assert d.bounds == build_config({"task": "pendulum"}).bounds
    assert d.batch < 150 and d.rollouts < 400


def test_overrides_take_precedence(tmp_path):
    path = tmp_path / "exp.yaml"
    path.write_text("task: cartpole\nbudget: 7\nseeds: [1, 2]\nbounds:\n  lambda: [0.1, 1.0]\n")
    cfg = load_config(path, {"budget": 3})
    assert cfg.task == "cartpole" and cfg.budget == 3 and cfg.seeds == [1, 2]
    assert cfg.bounds["lambda"] == [0.1, 1.0] and cfg.bounds["mu_m"] == [0.1, 1.5]


@pytest.mark.parametrize("values,path", [
    ({"budget": -1}, "budget"),
    ({"method": "annealing"}, "method"),
    ({"task": "acrobot"}, "task"),
    ({"bounds": {"mu_m": [2.0, 1.0]}}, "bounds.mu_m"),
    ({"bounds": {"sigma_m": [0.0, 0.1]}}, "bounds.sigma_m"),
    ({"seeds": []}, "seeds"),
    ({"n_e": 0}, "n_e"),
    ({"colour": "red"}, "colour"),
    ({"fixed": {"theta": 1.0}}, "fixed.theta"),
])
def test_config_errors_name_the_field(values, path):
    with pytest.raises(ConfigError) as exc:
        build_config(values)
    assert exc.value.path == path


def test_bad_yaml_is_a_config_error(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("task: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(p)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")


# --- objective -----------------------------------------------------------------------------


def test_decode_maps_dimensions():
    specs, mcfg = decode({"mu_m": 1.2, "sigma_m": 0.05, "mu_l": 0.7, "sigma_l": 0.01,
                          "lambda": 0.3, "sigma_eps": 1.5}, 9, 33)
    by = {s.name: s for s in specs}
    assert (by["mass"].mu, by["mass"].sigma, by["length"].mu, by["length"].sigma) == (1.2, 0.05, 0.7, 0.01)
    assert (mcfg.temperature, mcfg.noise_std, mcfg.horizon, mcfg.rollouts) == (0.3, 1.5, 9, 33)


def test_episode_seeds_are_reproducible():
    assert episode_seeds(4, 5) == episode_seeds(4, 5)
    assert len(set(episode_seeds(4, 50))) == 50


def test_objective_depends_only_on_x_and_stream(tmp_path):
    cfg = small(tmp_path, n_e=2)
    obj = MpcObjective.from_config(cfg)
    x = [cfg.fixed[n] for n in cfg.bounds]
    a = obj(x, np.random.default_rng(3))
    b = obj(x, np.random.default_rng(3))
    assert a == b and math.isfinite(a)


# --- tune, artifacts and export --------------------------------------------------------------


def test_tune_zero_budget_evaluates_only_the_batch(tmp_path):
    cfg = small(tmp_path, budget=0, batch=5, method="homo-bo")
    art = cmd_tune(cfg)["homo-bo"][0]
    assert len(art.rows) == 5
    lines = (tmp_path / "runs" / "pendulum_homo-bo" / "seed_0" / TRACE_FILE).read_text().splitlines()
    assert len(lines) == 5


def test_rerun_gives_byte_identical_traces(tmp_path):
    out = []
    for k in range(2):
        cfg = small(tmp_path, out=str(tmp_path / f"r{k}"), seeds=[0, 1])
        cmd_tune(cfg, ["hetero-bo", "random"])
        out.append(sorted((p.relative_to(tmp_path / f"r{k}"), p.read_bytes())
                          for p in (tmp_path / f"r{k}").rglob(TRACE_FILE)))
    assert len(out[0]) == 4
    assert out[0] == out[1]


def test_artifact_round_trip(tmp_path):
    cfg = small(tmp_path)
    art = cmd_tune(cfg)["hetero-bo"][0]
    back = load_run(tmp_path / "runs" / "pendulum_hetero-bo" / "seed_0")
    assert [r.record() for r in back.rows] == [r.record() for r in art.rows]
    assert [r.wall_time for r in back.rows] == [r.wall_time for r in art.rows]
    assert back.config == art.config and back.info == json.loads(json.dumps(art.info))
    assert back.best_x == art.best_x and back.seed == 0


def test_schema_problems_are_reported(tmp_path):
    cfg = small(tmp_path)
    cmd_tune(cfg)
    rd = tmp_path / "runs" / "pendulum_hetero-bo" / "seed_0"
    meta = json.loads((rd / RUN_FILE).read_text())
    meta["schema_version"] = 99
    (rd / RUN_FILE).write_text(json.dumps(meta))
    with pytest.raises(SchemaError, match="schema version 99"):
        load_run(rd)
    meta["schema_version"] = 1
    del meta["names"]
    (rd / RUN_FILE).write_text(json.dumps(meta))
    with pytest.raises(SchemaError, match="names"):
        load_run(rd)


def test_export_plots(tmp_path):
    cfg = small(tmp_path, budget=3, seeds=[0, 1])
    arts = cmd_tune(cfg)["hetero-bo"]
    root = tmp_path / "runs" / "pendulum_hetero-bo"
    first = cmd_export_plots(root, "lambda", resolution=11)
    snapshot = {p: p.read_bytes() for p in first}
    second = cmd_export_plots(root, "lambda", resolution=11)
    assert {p: p.read_bytes() for p in second} == snapshot

    curve = read_csv(root / "seed_0" / "curve.csv")
    assert len(curve) == cfg.budget + 1
    best = [float(r["best_so_far"]) for r in curve]
    assert best == sorted(best)

    rows = read_csv(root / "seed_1" / "slice_lambda.csv")
    assert len(rows) == 11
    for r in rows:
        assert float(r["sigma_nu"]) >= float(r["zeta"])
        assert float(r["lower"]) <= float(r["g_hat"]) <= float(r["upper"])

    agg = read_csv(root / "aggregate.csv")
    curves = np.array([a.trace().curve()[0] for a in arts])
    np.testing.assert_allclose([float(r["best_mean"]) for r in agg], curves.mean(0), rtol=1e-12)
    with pytest.raises(SchemaError):
        cmd_export_plots(tmp_path / "nothing")


def test_aggregate_rejects_mixed_budgets(tmp_path):
    a = cmd_tune(small(tmp_path, budget=1), write=False)["hetero-bo"][0].trace()
    b = cmd_tune(small(tmp_path, budget=2), write=False)["hetero-bo"][0].trace()
    with pytest.raises(ValueError):
        aggregate([a, b])


# --- grid and eval -------------------------------------------------------------------------


def test_grid_shape_and_errors(tmp_path):
    cfg = small(tmp_path)
    out = tmp_path / "grid.csv"
    rows = cmd_grid(cfg, ["lambda", "sigma_eps"], resolution=2, out=out)
    assert len(rows) == 4 and len(read_csv(out)) == 4
    assert {r["lambda"] for r in rows} == {1e-5, 2.5}
    with pytest.raises(KeyError):
        cmd_grid(cfg, ["lambda", "theta"], resolution=2)
    with pytest.raises(ValueError):
        cmd_grid(cfg, ["lambda", "lambda"], resolution=2)


def test_eval_single_episode_flags_single_sample(tmp_path):
    s = cmd_eval(small(tmp_path), {}, n_e=1)
    assert s.n == 1 and s.std == 0.0 and s.single_sample


def test_eval_without_actuation_noise_is_the_hanging_baseline(tmp_path):
    cfg = small(tmp_path, n_s=200)
    s = cmd_eval(cfg, {"sigma_eps": 1e-5}, n_e=2)
    expected = 200 * -math.pi**2
    assert abs(s.mean - expected) <= 0.05 * abs(expected)


def test_eval_is_stable_across_disjoint_episode_sets(tmp_path):
    cfg = small(tmp_path, n_s=50, rollouts=20, horizon=10)
    a = cmd_eval(cfg, {}, n_e=100, seeds=[0])
    b = cmd_eval(cfg, {}, n_e=100, seeds=[1])
    assert abs(a.mean - b.mean) <= 3 * max(a.std, b.std) / 10


def test_eval_rejects_points_outside_the_box(tmp_path):
    with pytest.raises(ValueError):
        cmd_eval(small(tmp_path), {"lambda": 50.0})


# --- command line --------------------------------------------------------------------------


def test_cli_validate_and_exit_codes(tmp_path, capsys, monkeypatch):
    assert cli.main(["validate-config", "--task", "cartpole"]) == 0
    assert json.loads(capsys.readouterr().out)["rollouts"] == 250
    bad = tmp_path / "bad.yaml"
    bad.write_text("budget: -4\n")
    assert cli.main(["validate-config", "--config", str(bad)]) == 2
    assert "budget" in capsys.readouterr().err
    assert cli.main(["grid", "--task", "pendulum", "--axes", "lambda", "nope"]) == 2
    assert cli.main(["eval", "--task", "pendulum", "--point", "lambda"]) == 2
    assert cli.main(["export-plots", str(tmp_path / "empty")]) == 2

    def explode(*a, **k):
        raise EpisodeFailure(3, "diverged")

    monkeypatch.setattr(cli, "cmd_eval", explode)
    assert cli.main(["eval", "--task", "pendulum"]) == 3


def test_cli_tune_and_export(tmp_path, capsys):
    out = tmp_path / "cli"
    args = ["tune", "--task", "pendulum", "--preset", "desk", "--seeds", "0", "--budget", "1",
            "--batch", "3", "--n-e", "1", "--n-s", "10", "--rollouts", "10", "--horizon", "5",
            "--out", str(out), "--methods", "random", "cma-es"]
    assert cli.main(args) == 0
    assert "random: best reward" in capsys.readouterr().out
    assert (out / "pendulum_cma-es" / "seed_0" / TRACE_FILE).exists()
    assert cli.main(["export-plots", str(out)]) == 0
    assert len(read_csv(out / "pendulum_random" / "seed_0" / "curve.csv")) == 2
