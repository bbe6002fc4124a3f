"""Deep Q-network expert for the discretised pendulum."""

from dataclasses import dataclass
import logging

import numpy as np

from .envs.pendulum import Pendulum, PendulumSpec
from .errors import TrainingError, ValidationError
from .neural import AdamState, Mlp, adam_step

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DqnConfig:
    episodes: int = 2000
    episode_len: int = 200  # training episodes; demonstrations use PendulumSpec.episode_len
    replay_capacity: int = 50_000
    batch_size: int = 64
    target_sync_interval: int = 500
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 100_000
    learning_rate: float = 1e-3
    hidden: tuple = (64, 64)
    discount: float = 0.99
    warmup: int = 1_000
    huber_delta: float = 1.0
    reward_scale: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in ("episodes", "episode_len", "replay_capacity", "batch_size",
                     "target_sync_interval", "eps_decay_steps"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        if self.learning_rate <= 0 or not all(h > 0 for h in self.hidden):
            raise ValidationError("learning_rate and hidden sizes must be positive")
        for name in ("eps_start", "eps_end"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1]")
        if not 0.0 <= self.discount < 1.0:
            raise ValidationError("discount must lie in [0, 1)")

    def epsilon(self, step: int) -> float:
        frac = min(step / self.eps_decay_steps, 1.0)
        return self.eps_start + frac * (self.eps_end - self.eps_start)


class ReplayBuffer:
    """Fixed-capacity ring buffer of transitions; oldest entries are overwritten."""

    def __init__(self, capacity: int, state_dim: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros(capacity, dtype=int)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self._next = 0
        self._size = 0

    def __len__(self):
        return self._size

    def push(self, s, a, r, s2):
        i = self._next
        self.states[i], self.actions[i], self.rewards[i], self.next_states[i] = s, a, r, s2
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng):
        idx = rng.integers(self._size, size=batch_size)
        return self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx]


def network_input(states, spec: PendulumSpec):
    """``(cos, sin, thdot / max_speed)`` rows."""
    x = np.array(states, dtype=float, ndmin=2)
    x[:, 2] /= spec.max_speed
    return x


def huber(x, delta):
    ax = np.abs(x)
    loss = np.where(ax <= delta, 0.5 * x**2, delta * (ax - 0.5 * delta))
    grad = np.clip(x, -delta, delta)
    return loss, grad


def dqn_loss(online: Mlp, target: Mlp, batch, discount: float, delta: float = 1.0):
    """Mean Huber TD loss and its gradient w.r.t. the online parameters.

    ``batch`` holds network inputs, actions, rewards and next inputs. The
    target network is held fixed.
    """
    x, a, r, x2 = batch
    q_next = target(x2)
    y = r + discount * q_next.max(axis=1)
    (q,), cache = online.forward(x)
    idx = np.arange(len(a))
    td = q[idx, a] - y
    loss, g_td = huber(td, delta)
    n = len(a)
    g_q = np.zeros_like(q)
    g_q[idx, a] = g_td / n
    grads, _ = online.backward(cache, g_q)
    return float(loss.mean()), grads


def epsilon_greedy(q_row, epsilon: float, rng) -> int:
    if rng.random() < epsilon:
        return int(rng.integers(len(q_row)))
    return int(np.argmax(q_row))


class GreedyQPolicy:
    """Greedy policy over a trained action-value network."""

    def __init__(self, net: Mlp, spec: PendulumSpec):
        self.net = net
        self.spec = spec

    def q_values(self, state):
        return self.net(network_input(state, self.spec))[0]

    def __call__(self, state) -> int:
        return int(np.argmax(self.q_values(state)))


@dataclass
class DqnResult:
    policy: GreedyQPolicy
    online: Mlp
    target: Mlp
    episode_returns: list
    buffer: ReplayBuffer


def train_dqn_pendulum(spec: PendulumSpec, config: DqnConfig, callback=None) -> DqnResult:
    """Train a DQN on the pendulum and return its greedy policy.

    ``callback(step, online, target)``, if given, runs after every gradient
    step; tests use it to observe target syncs.
    """
    rng = np.random.default_rng(config.seed)
    env = Pendulum(spec)
    sizes = (3, *config.hidden, spec.action_count)
    online = Mlp(sizes, rng=rng)
    target = online.copy()
    opt = AdamState(lr=config.learning_rate)
    buffer = ReplayBuffer(config.replay_capacity, 3)
    returns = []
    step = 0
    for episode in range(config.episodes):
        s = env.reset(rng)
        x = network_input(s, spec)[0]
        total = 0.0
        for _ in range(config.episode_len):
            eps = config.epsilon(step)
            if rng.random() < eps:
                a = int(rng.integers(spec.action_count))
            else:
                a = int(np.argmax(online(x[None])[0]))
            r = env.reward(s, a)
            s2 = env.step(s, a)
            x2 = network_input(s2, spec)[0]
            buffer.push(x, a, r * config.reward_scale, x2)
            total += r
            s, x = s2, x2
            step += 1
            if len(buffer) >= max(config.warmup, config.batch_size):
                loss, grads = dqn_loss(online, target, buffer.sample(config.batch_size, rng),
                                       config.discount, config.huber_delta)
                if not np.isfinite(loss):
                    raise TrainingError(f"non-finite DQN loss at episode {episode}, step {step}")
                adam_step(online.params, grads, opt)
                if step % config.target_sync_interval == 0:
                    target.load_params(online.params)
                if callback is not None:
                    callback(step, online, target)
        returns.append(total)
        if (episode + 1) % 100 == 0:
            log.info("dqn episode %d: mean return (last 100) %.1f", episode + 1, np.mean(returns[-100:]))
    return DqnResult(GreedyQPolicy(online, spec), online, target, returns, buffer)


def evaluate_policy(policy, spec: PendulumSpec, episodes: int, length: int, seed: int) -> np.ndarray:
    """Undiscounted returns of ``policy`` from seeded random starts."""
    env = Pendulum(spec)
    out = []
    for i in range(episodes):
        rng = np.random.default_rng([seed, i])
        s = env.reset(rng)
        total = 0.0
        for _ in range(length):
            a = policy(s)
            total += env.reward(s, a)
            s = env.step(s, a)
        out.append(total)
    return np.array(out)
