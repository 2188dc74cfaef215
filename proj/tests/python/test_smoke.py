import math

import pytest

import stochgfn as sg

FIG1 = {"env.kind": "figure1"}
TINY_GRID = {
    "env.kind": "hypergrid",
    "env.H": "4",
    "train.iterations": "30",
    "train.rollouts": "4",
    "train.hidden": "8,8",
    "train.model_hidden": "8,8",
    "train.eval_every": "10",
    "train.topk": "4",
}


def test_resolve_fills_every_key():
    full = sg.resolve_config(FIG1)
    assert set(full) == set(sg.config_keys())
    assert full["env.alpha"] == "0.5"


def test_config_errors_are_value_errors():
    with pytest.raises(sg.ConfigError, match="alpha"):
        sg.resolve_config({"env.kind": "hypergrid", "env.alpha": "1.5"})
    with pytest.raises(ValueError, match="unknown key"):
        sg.resolve_config({"nope": "1"})


def test_env_kernel():
    env = sg.make_env(FIG1)
    assert env.actions(env.initial) == [0, 1]
    probs = dict(env.kernel(env.initial, 0))
    assert sorted(probs.values()) == [0.25, 0.75]
    assert [env.reward(x) for x in env.terminals()] == [1.0, 2.0]
    assert "0.75" in env.dump()


def test_train_figure1_plain_db_fails_as_expected():
    run = sg.train({**FIG1, "train.iterations": "3000"}, "db", seed=1)
    p = [q for _, q in run.terminating()]
    assert abs(p[0] - 5 / 12) + abs(p[1] - 7 / 12) < 0.02
    recs = sg.metrics(run)
    assert recs[-1]["iteration"] == 3000
    assert recs[-1]["method"] == "db"


def test_train_figure1_stoch_db_oracle():
    run = sg.train({**FIG1, "train.dynamics_mode": "oracle"}, "stoch_db", seed=0)
    p = [q for _, q in run.terminating()]
    assert abs(p[0] - 1 / 3) + abs(p[1] - 2 / 3) < 0.02
    assert math.isclose(sg.l1_error(p, run.target()), 0.0, abs_tol=0.01)


def test_run_checkpoint_and_eval(tmp_path):
    files = sg.run({**TINY_GRID, "method": "tb,stoch_tb", "seeds": "0,1"}, output_root=str(tmp_path))
    assert len(files) == 4
    out = tmp_path / "runs"
    assert (out / "manifest.json").exists()
    recs = sg.read_metrics(out / "stoch_tb_hypergrid4_1.jsonl")
    assert [r["iteration"] for r in recs] == [10, 20, 30]
    assert list(recs[0])[:3] == ["iteration", "wall_ms", "loss"]
    ev = sg.eval_checkpoint(TINY_GRID, "stoch_tb", str(out / "stoch_tb_hypergrid4_1.ckpt"), samples=50, seed=1)
    assert ev["l1_exact"] == pytest.approx(recs[-1]["l1_exact"], rel=1e-12)


def test_mh_two_objects():
    samples = sg.mh_run(FIG1, chains=1, steps=200000, seed=3)
    frac = sum(1 for s in samples if s[2] == "t:1") / len(samples)
    assert abs(frac - 2 / 3) < 0.01


def test_topk_and_l1():
    assert sg.topk_stats([3.0, 2.0, 1.0], 2) == (2.5, 2.5)
    assert sg.l1_error([1.0, 0.0], [1 / 3, 2 / 3]) == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        sg.topk_stats([1.0], 2)
