import types

import numpy as np
import pytest

from cwae_irl.envs.objectworld import grid_transition
from cwae_irl.mdp import MdpModel


def random_mdp(rng, num_states=5, num_actions=3, discount=0.9):
    p = rng.random((num_states, num_actions, num_states)) ** 3
    p /= p.sum(axis=2, keepdims=True)
    return MdpModel(p, discount)


def chain_mdp(discount=0.9):
    """Two states, one action, each state loops on itself."""
    p = np.zeros((2, 1, 2))
    p[0, 0, 0] = p[1, 0, 1] = 1.0
    return MdpModel(p, discount)


def switch_mdp(discount=0.9):
    """Two states; action 0 stays, action 1 moves to the other state."""
    p = np.zeros((2, 2, 2))
    p[0, 0, 0] = p[1, 0, 1] = 1.0
    p[0, 1, 1] = p[1, 1, 0] = 1.0
    return MdpModel(p, discount)


def grid_env(n, wind=0.0, discount=0.9):
    """Minimal tabular env (no objects) usable by the samplers."""
    return types.SimpleNamespace(name="objectworld", mdp=MdpModel(grid_transition(n, wind), discount),
                                 grid_size=n, num_actions=5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
