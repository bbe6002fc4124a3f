"""Pendulum: DQN expert, CWAE-IRL on its trajectories, per-step error series.

    python3 scripts/run_pendulum.py --out runs/pendulum --episodes 2000
"""

import argparse
from pathlib import Path

import numpy as np

from cwae_irl.config import ExperimentConfig, ExpertConfig
from cwae_irl.cwae import CwaeTrainConfig
from cwae_irl.dqn import DqnConfig
from cwae_irl.envs.pendulum import PendulumSpec
from cwae_irl.experiment import run_experiment


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="runs/pendulum")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--episodes", type=int, default=2000, help="DQN training episodes")
    p.add_argument("--trajectories", type=int, default=25)
    p.add_argument("--heldout", type=int, default=5)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--window", type=int, default=25)
    args = p.parse_args()

    cfg = ExperimentConfig(
        env_name="pendulum", env=PendulumSpec(),
        expert=ExpertConfig(count=args.trajectories, heldout=args.heldout,
                            dqn=DqnConfig(episodes=args.episodes, seed=args.seed)),
        train=CwaeTrainConfig(epochs=args.epochs, seed=args.seed), window=args.window, seed=args.seed)
    out = Path(args.out)
    rep = run_experiment(cfg, out, record_seconds=True)
    series = np.loadtxt(out / "error_series.csv", delimiter=",", skiprows=1)
    print(f"mean signed error {rep.mean_signed_error:+.4f}, pearson {rep.pearson:.3f}, "
          f"smoothed error range [{series[:, 2].min():+.3f}, {series[:, 2].max():+.3f}], "
          f"{rep.seconds:.0f}s")
    print(f"error series written to {out / 'error_series.csv'}")


if __name__ == "__main__":
    main()
