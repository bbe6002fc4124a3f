"""End-to-end experiment runs: environment, expert, dataset, method, metrics."""

from dataclasses import replace
import logging
from pathlib import Path
import time

import numpy as np

from .baselines.birl import birl_policywalk
from .baselines.maxent import deep_maxent_irl, maxent_irl
from .config import ExperimentConfig, dump_config
from .cwae import extract_reward_map, train_cwae
from .dqn import train_dqn_pendulum
from .envs.objectworld import build_objectworld
from .envs.pendulum import Pendulum
from .errors import CwaeIrlError
from .evaluation import (
    MetricsReport,
    evd,
    heatmap_export,
    model_error_series,
    pearson,
    spearman,
    write_curves,
    write_error_series,
    write_metrics,
)
from .expert import expert_policy_objectworld, sample_trajectories

log = logging.getLogger(__name__)

OBJECTWORLD_DEFAULT_COUNT = 128
OBJECTWORLD_DEFAULT_LENGTH = 16
PENDULUM_DEFAULT_COUNT = 25
HELDOUT_SEED_OFFSET = 1_000_003


class ExperimentError(CwaeIrlError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage


class _Stage:
    def __init__(self, out: Path | None):
        self.out = out
        self.name = None

    def __call__(self, name):
        self.name = name
        log.info("stage: %s", name)
        return self

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is None or isinstance(exc, ExperimentError):
            return False
        if self.out is not None:
            (self.out / "FAILED").write_text(f"stage={self.name}\n{type(exc).__name__}: {exc}\n")
        raise ExperimentError(self.name, exc) from exc


def build_env(cfg: ExperimentConfig):
    if cfg.env_name == "objectworld":
        return build_objectworld(cfg.env)
    return Pendulum(cfg.env)


def make_objectworld_dataset(cfg: ExperimentConfig, env):
    policy = expert_policy_objectworld(env.mdp, env.reward, cfg.expert.policy, cfg.expert.temperature)
    count = cfg.expert.count or OBJECTWORLD_DEFAULT_COUNT
    length = cfg.expert.length or OBJECTWORLD_DEFAULT_LENGTH
    meta = {"policy": cfg.expert.policy, "grid_size": cfg.env.grid_size,
            "placement_seed": cfg.env.placement_seed}
    if cfg.expert.policy == "boltzmann":
        meta["temperature"] = cfg.expert.temperature
    return sample_trajectories(env, policy, count, length, cfg.expert_seed, meta=meta)


def run_experiment(cfg: ExperimentConfig, out_dir=None, record_seconds=False) -> MetricsReport:
    """Run one method on one environment and write its artifacts.

    Files written to ``out_dir`` (when given): ``config.ini``,
    ``dataset.csv``, ``metrics.csv`` plus method-specific outputs
    (heatmaps, model checkpoints, loss curves, error series). The metrics
    ``seconds`` column is left blank unless ``record_seconds`` so reruns
    are byte-identical.
    """
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "FAILED").unlink(missing_ok=True)
        (out / "config.ini").write_text(dump_config(cfg))
    stage = _Stage(out)
    t0 = time.perf_counter()

    with stage("env"):
        env = build_env(cfg)
        if out is not None and cfg.env_name == "objectworld":
            env.placement.save(out / "placement.txt")
            heatmap_export(env.reward, cfg.env.grid_size, out / "true_reward.csv")

    if cfg.env_name == "pendulum":
        return _run_pendulum(cfg, env, out, stage, t0, record_seconds)

    with stage("expert"):
        dataset = make_objectworld_dataset(cfg, env)
        if out is not None:
            dataset.save(out / "dataset.csv")

    with stage("method"):
        learned = _fit_objectworld(cfg, env, dataset, out)

    with stage("metrics"):
        report = MetricsReport(
            cfg.method, cfg.seed,
            pearson(learned, env.reward) if np.ptp(learned) > 0 else float("nan"),
            spearman(learned, env.reward) if np.ptp(learned) > 0 else float("nan"),
            evd(env.mdp, env.reward, learned),
            float(np.mean(learned - env.reward)),
            time.perf_counter() - t0 if record_seconds else float("nan"),
        )
        if out is not None:
            heatmap_export(learned, cfg.env.grid_size, out / "learned_reward.csv")
            write_metrics([report], out / "metrics.csv", include_seconds=record_seconds)
    return report


def _fit_objectworld(cfg, env, dataset, out):
    if cfg.method == "cwae":
        model, curves = train_cwae(dataset, env, cfg.train)
        est = extract_reward_map(model, env, cfg.extraction, dataset)
        if out is not None:
            model.save(out / "model", cfg.train)
            write_curves(curves, out / "curves.csv")
            heatmap_export(est.variance, cfg.env.grid_size, out / "learned_variance.csv")
        return est.mean
    if cfg.method == "maxent":
        res = maxent_irl(env.features, env.mdp, dataset, cfg.train)
        if out is not None:
            (out / "weights.txt").write_text(" ".join(repr(float(w)) for w in res.weights) + "\n")
        return res.reward
    if cfg.method == "deep-maxent":
        res = deep_maxent_irl(env.features, env.mdp, dataset, cfg.train)
        if out is not None:
            res.net.save(out / "reward_net.txt")
        return res.reward
    res = birl_policywalk(env.mdp, dataset, cfg.train)
    log.info("birl acceptance rate %.3f", res.acceptance_rate)
    return res.mean


def _run_pendulum(cfg, env, out, stage, t0, record_seconds):
    with stage("expert"):
        dqn = train_dqn_pendulum(cfg.env, cfg.expert.dqn)
        if out is not None:
            dqn.online.save(out / "dqn.txt")
        count = cfg.expert.count or PENDULUM_DEFAULT_COUNT
        length = cfg.expert.length or cfg.env.episode_len
        meta = {"policy": "dqn", "dqn_episodes": cfg.expert.dqn.episodes}
        dataset = sample_trajectories(env, dqn.policy, count, length, cfg.expert_seed, meta=meta)
        heldout = sample_trajectories(env, dqn.policy, cfg.expert.heldout, length,
                                      cfg.expert_seed + HELDOUT_SEED_OFFSET, meta=meta)
        if out is not None:
            dataset.save(out / "dataset.csv")
            heldout.save(out / "heldout.csv")

    with stage("method"):
        model, curves = train_cwae(dataset, env, cfg.train)
        if out is not None:
            model.save(out / "model", cfg.train)
            write_curves(curves, out / "curves.csv")

    with stage("metrics"):
        series = model_error_series(model, heldout, env, cfg.window)
        predicted = series.errors + _true_rewards(env, heldout)
        true = _true_rewards(env, heldout)
        report = MetricsReport(
            cfg.method, cfg.seed, pearson(predicted, true), spearman(predicted, true),
            float("nan"), float(series.errors.mean()),
            time.perf_counter() - t0 if record_seconds else float("nan"),
        )
        if out is not None:
            write_error_series(series, out / "error_series.csv")
            write_metrics([report], out / "metrics.csv", include_seconds=record_seconds)
    return report


def _true_rewards(env, dataset):
    s, a, _ = dataset.transitions()
    return np.array([env.reward(si, ai) for si, ai in zip(s, a)])


def with_method(cfg: ExperimentConfig, method: str, train=None) -> ExperimentConfig:
    """Copy of ``cfg`` running ``method`` with its default (seeded) train config."""
    from .config import TRAIN_CONFIGS

    if train is None:
        train = TRAIN_CONFIGS[method]()
        if hasattr(train, "seed"):
            train = replace(train, seed=cfg.seed)
    return replace(cfg, method=method, train=train)


def evaluate_run(run_dir) -> MetricsReport:
    """Recompute metrics from the artifacts a previous run left in ``run_dir``."""
    from .config import load_config
    from .cwae import CwaeModel
    from .envs.objectworld import ObjectPlacement
    from .evaluation import heatmap_load
    from .expert import Dataset

    run = Path(run_dir)
    cfg = load_config(run / "config.ini")
    if cfg.env_name == "objectworld":
        placement = ObjectPlacement.load(run / "placement.txt", cfg.env.grid_size)
        env = build_objectworld(cfg.env, placement)
        learned = heatmap_load(run / "learned_reward.csv")
        flat = np.ptp(learned) == 0
        return MetricsReport(
            cfg.method, cfg.seed,
            float("nan") if flat else pearson(learned, env.reward),
            float("nan") if flat else spearman(learned, env.reward),
            evd(env.mdp, env.reward, learned), float(np.mean(learned - env.reward)), float("nan"))
    env = Pendulum(cfg.env)
    model = CwaeModel.load(run / "model")
    heldout = Dataset.load(run / "heldout.csv")
    series = model_error_series(model, heldout, env, cfg.window)
    true = _true_rewards(env, heldout)
    predicted = series.errors + true
    return MetricsReport(cfg.method, cfg.seed, pearson(predicted, true), spearman(predicted, true),
                         float("nan"), float(series.errors.mean()), float("nan"))


def aggregate_reports(reports) -> list:
    """Per-method mean and standard deviation of each metric across seeds."""
    rows = []
    for method in sorted({r.method for r in reports}):
        group = [r for r in reports if r.method == method]
        row = {"method": method, "runs": len(group)}
        for key in ("pearson", "spearman", "evd", "mean_signed_error"):
            vals = np.array([getattr(r, key) for r in group], dtype=float)
            row[f"{key}_mean"] = float(np.mean(vals))
            row[f"{key}_std"] = float(np.std(vals))
        rows.append(row)
    return rows
