"""BIRL sanity check on a 5x5 deterministic single-goal gridworld.

For each seed the goal cell is drawn at random, 40 greedy expert
trajectories of length 10 are sampled, and PolicyWalk is run. A prior-only
chain (alpha = 0) is run as a control.

    python3 scripts/run_birl_sanity.py --seeds 0 1 2
"""

import argparse
import types

import numpy as np

from cwae_irl.baselines import BirlConfig, birl_policywalk
from cwae_irl.envs.objectworld import grid_transition
from cwae_irl.expert import sample_trajectories
from cwae_irl.mdp import MdpModel, greedy_policy, value_iteration


def goal_task(seed, n=5, count=40, length=10):
    env = types.SimpleNamespace(name="objectworld", grid_size=n, num_actions=5,
                                mdp=MdpModel(grid_transition(n, 0.0), 0.9))
    goal = int(np.random.default_rng(seed).integers(n * n))
    reward = np.zeros(n * n)
    reward[goal] = 1.0
    _, q = value_iteration(env.mdp, reward)
    return env, goal, sample_trajectories(env, greedy_policy(q), count, length, seed)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--iterations", type=int, default=50_000)
    p.add_argument("--burn-in", type=int, default=10_000)
    p.add_argument("--control-iterations", type=int, default=10_000_000)
    args = p.parse_args()

    for seed in args.seeds:
        env, goal, data = goal_task(seed)
        res = birl_policywalk(env.mdp, data, BirlConfig(iterations=args.iterations, burn_in=args.burn_in, seed=seed))
        ctrl = birl_policywalk(env.mdp, data, BirlConfig(alpha=0.0, iterations=args.control_iterations,
                                                         burn_in=args.burn_in, seed=seed))
        print(f"seed {seed}: goal {goal} argmax {int(np.argmax(res.mean))} "
              f"acceptance {res.acceptance_rate:.3f}; control max |mean| {np.abs(ctrl.mean).max():.3f}",
              flush=True)


if __name__ == "__main__":
    main()
