import numpy as np
import pytest

from cwae_irl.baselines import MaxEntConfig
from cwae_irl.cli import main
from cwae_irl.config import dump_config, parse_config
from cwae_irl.cwae import CwaeTrainConfig
from cwae_irl.envs.objectworld import ObjectworldSpec
from cwae_irl.errors import ParseError, TrainingError
from cwae_irl.evaluation import read_metrics
from cwae_irl.experiment import ExperimentError, run_experiment, with_method
from cwae_irl.config import ExperimentConfig, ExpertConfig

TINY = """
[env]
grid_size = 5

[expert]
count = 12
length = 6

[method]
name = cwae
seed = 3

[train]
epochs = 2
hidden = 8 8
"""


def tiny_cfg(method="cwae"):
    cfg = ExperimentConfig(env=ObjectworldSpec(grid_size=5), expert=ExpertConfig(count=12, length=6),
                           train=CwaeTrainConfig(epochs=2, hidden=(8, 8)))
    if method != "cwae":
        train = MaxEntConfig(iterations=10) if method == "maxent" else None
        cfg = with_method(cfg, method, train)
    return cfg


def test_parse_config():
    cfg = parse_config(TINY)
    assert cfg.env.grid_size == 5 and cfg.env.placement_seed == 3
    assert cfg.expert.count == 12 and cfg.expert_seed == 3
    assert cfg.train.hidden == (8, 8) and cfg.train.seed == 3 and cfg.train.epochs == 2
    assert parse_config(TINY, seed=9).train.seed == 9


def test_dump_round_trip():
    cfg = parse_config(TINY)
    assert parse_config(dump_config(cfg)) == cfg
    pend = parse_config("[env]\nname = pendulum\n[expert]\ndqn_episodes = 3\n")
    assert pend.expert.dqn.episodes == 3
    assert parse_config(dump_config(pend)) == pend


@pytest.mark.parametrize("text", [
    "[env]\ncolour = red\n",
    "[train]\nmomentum = 0.9\n",
    "[method]\nname = cwae\nfoo = 1\n",
    "[extra]\nx = 1\n",
    "[method]\nname = gail\n",
    "[train]\nepochs = many\n",
    "[env]\nname = pendulum\n[method]\nname = maxent\n",
])
def test_config_errors(text):
    with pytest.raises(ParseError):
        parse_config(text)


def test_run_is_deterministic(tmp_path):
    for method in ("cwae", "maxent"):
        a, b = tmp_path / f"{method}a", tmp_path / f"{method}b"
        run_experiment(tiny_cfg(method), a)
        run_experiment(tiny_cfg(method), b)
        for name in ("metrics.csv", "dataset.csv", "learned_reward.csv", "true_reward.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()


def test_metrics_schema(tmp_path):
    run_experiment(tiny_cfg("maxent"), tmp_path)
    rep = read_metrics(tmp_path / "metrics.csv")[0]
    assert rep.method == "maxent" and np.isfinite(rep.pearson) and rep.evd >= -1e-9


def test_failure_writes_marker(tmp_path, monkeypatch):
    import cwae_irl.experiment as experiment

    def broken(*args, **kwargs):
        raise TrainingError("diverged")

    monkeypatch.setattr(experiment, "maxent_irl", broken)
    with pytest.raises(ExperimentError) as err:
        run_experiment(tiny_cfg("maxent"), tmp_path)
    monkeypatch.undo()
    assert err.value.stage == "method"
    assert (tmp_path / "FAILED").read_text().startswith("stage=method")
    run_experiment(tiny_cfg("maxent"), tmp_path)
    assert not (tmp_path / "FAILED").exists()


def test_cli_end_to_end(tmp_path, capsys):
    cfg_path = tmp_path / "c.ini"
    cfg_path.write_text(TINY)
    assert main(["gen", "--config", str(cfg_path), "--out", str(tmp_path / "gen")]) == 0
    assert (tmp_path / "gen" / "dataset.csv").exists()
    assert main(["train", "--config", str(cfg_path), "--out", str(tmp_path / "cwae")]) == 0
    assert main(["baseline", "--method", "maxent", "--config", str(cfg_path), "--seed", "3",
                 "--out", str(tmp_path / "me")]) == 0
    assert main(["eval", "--out", str(tmp_path / "me")]) == 0
    first = read_metrics(tmp_path / "me" / "metrics.csv")[0]
    again = read_metrics(tmp_path / "me" / "eval_metrics.csv")[0]
    assert again.pearson == pytest.approx(first.pearson, abs=1e-5)
    assert main(["report", str(tmp_path / "cwae"), str(tmp_path / "me"), "--out",
                 str(tmp_path / "sum.csv")]) == 0
    assert (tmp_path / "sum.csv").read_text().startswith("method,runs,pearson_mean")
    capsys.readouterr()


def test_cli_reports_errors(tmp_path, capsys):
    cfg_path = tmp_path / "c.ini"
    cfg_path.write_text("[env]\nbogus = 1\n")
    assert main(["train", "--config", str(cfg_path), "--out", str(tmp_path / "x")]) == 1
    assert "unknown key" in capsys.readouterr().err
