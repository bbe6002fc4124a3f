"""Torque-limited inverted pendulum with a discretised action set.

A state is the array ``(cos theta, sin theta, theta_dot)`` with ``theta = 0``
upright. Dynamics use one semi-implicit Euler step per ``dt``.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError


@dataclass(frozen=True)
class PendulumSpec:
    dt: float = 0.05
    gravity: float = 10.0
    mass: float = 1.0
    length: float = 1.0
    max_torque: float = 2.0
    max_speed: float = 8.0
    action_count: int = 11
    episode_len: int = 1000
    reward_weights: tuple = (1.0, 0.1, 0.001)

    def __post_init__(self):
        if self.action_count < 2:
            raise ValidationError("action_count must be at least 2")
        if self.max_torque <= 0:
            raise ValidationError("max_torque must be positive")
        if self.episode_len <= 0:
            raise ValidationError("episode_len must be positive")

    def torque(self, action_index: int) -> float:
        if not 0 <= action_index < self.action_count:
            raise ValidationError(f"action index {action_index} out of range [0, {self.action_count})")
        return -self.max_torque + 2.0 * self.max_torque * action_index / (self.action_count - 1)


def angle(state) -> float:
    """Angle in ``[-pi, pi]`` recovered from the (cos, sin) encoding."""
    return float(np.arctan2(state[1], state[0]))


def encode(theta: float, theta_dot: float) -> np.ndarray:
    return np.array([np.cos(theta), np.sin(theta), theta_dot])


def pendulum_step(spec: PendulumSpec, state, action_index: int) -> np.ndarray:
    u = spec.torque(action_index)
    theta, theta_dot = angle(state), float(state[2])
    g, m, l, dt = spec.gravity, spec.mass, spec.length, spec.dt
    theta_acc = 3.0 * g / (2.0 * l) * np.sin(theta) + 3.0 / (m * l**2) * u
    theta_dot = float(np.clip(theta_dot + theta_acc * dt, -spec.max_speed, spec.max_speed))
    return encode(theta + theta_dot * dt, theta_dot)


def pendulum_reward(state, action_index: int, spec: PendulumSpec) -> float:
    """``-(w1 theta^2 + w2 theta_dot^2 + w3 u^2)``; never positive."""
    w1, w2, w3 = spec.reward_weights
    u = spec.torque(action_index)
    return -(w1 * angle(state) ** 2 + w2 * float(state[2]) ** 2 + w3 * u**2)


def pendulum_reset(spec: PendulumSpec, rng: np.random.Generator) -> np.ndarray:
    """Random start: angle uniform on the circle, speed uniform in [-1, 1]."""
    return encode(rng.uniform(-np.pi, np.pi), rng.uniform(-1.0, 1.0))


class Pendulum:
    """Environment wrapper bundling a spec with reset/step/reward."""

    name = "pendulum"

    def __init__(self, spec: PendulumSpec | None = None):
        self.spec = spec or PendulumSpec()

    @property
    def num_actions(self) -> int:
        return self.spec.action_count

    def reset(self, rng):
        return pendulum_reset(self.spec, rng)

    def step(self, state, action_index):
        return pendulum_step(self.spec, state, action_index)

    def reward(self, state, action_index):
        return pendulum_reward(state, action_index, self.spec)
