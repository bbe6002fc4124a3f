"""Reward learning from demonstrations with a conditional Wasserstein auto-encoder,
plus MaxEnt, Deep MaxEnt and Bayesian IRL baselines on objectworld and pendulum."""

from .cwae import CwaeModel, CwaeTrainConfig, extract_reward_map, train_cwae
from .expert import Dataset, Trajectory, sample_trajectories
from .mdp import MdpModel, greedy_policy, policy_evaluation, value_iteration

__version__ = "0.1.0"
