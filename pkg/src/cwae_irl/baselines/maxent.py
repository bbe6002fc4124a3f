"""Maximum-entropy IRL with linear and neural reward models.

The forward model is finite-horizon, undiscounted soft value iteration:
``Q_t(s, a) = r(s) + sum_s' P[s, a, s'] V_{t+1}(s')`` and
``V_t = logsumexp_a Q_t`` with ``V_H = 0``. The trajectory log-likelihood
per demonstration is ``sum_t r(s_t) - sum_s D_0(s) V_0(s)``, whose gradient
in ``r`` is the empirical minus the expected state-visitation frequency.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from ..errors import TrainingError, ValidationError
from ..neural import AdamState, Mlp, adam_step


@dataclass(frozen=True)
class MaxEntConfig:
    learning_rate: float = 0.01
    iterations: int = 200
    horizon: int | None = None  # None -> trajectory length
    l2: float = 0.0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.iterations <= 0:
            raise ValidationError("learning_rate and iterations must be positive")


@dataclass(frozen=True)
class DeepMaxEntConfig:
    hidden: tuple = (32, 32)
    learning_rate: float = 1e-3
    iterations: int = 200
    horizon: int | None = None
    seed: int = 0
    zero_init: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0 or self.iterations < 0:
            raise ValidationError("learning_rate must be positive and iterations non-negative")


def _horizon(dataset, horizon):
    h = horizon if horizon is not None else max(len(t) for t in dataset.trajectories)
    if h < 1:
        raise ValidationError("horizon must be at least 1")
    return h


def start_distribution(dataset, num_states: int) -> np.ndarray:
    starts = dataset.start_states().astype(int)
    return np.bincount(starts, minlength=num_states) / len(starts)


def empirical_svf(dataset, num_states: int, horizon: int) -> np.ndarray:
    """Mean per-trajectory visit counts of ``s_0 .. s_{horizon-1}``."""
    counts = np.zeros(num_states)
    for traj in dataset.trajectories:
        counts += np.bincount(traj.states[:horizon].astype(int), minlength=num_states)
    return counts / len(dataset.trajectories)


def soft_backward(mdp, reward, horizon: int):
    """Time-indexed soft-optimal policies and the initial soft value.

    Returns ``(policies, v0)`` with ``policies[t]`` an ``(S, A)`` matrix.
    """
    r = np.asarray(reward, dtype=float)
    p = mdp.transition
    v = np.zeros(mdp.num_states)
    policies = [None] * horizon
    for t in reversed(range(horizon)):
        q = r[:, None] + p @ v
        v = logsumexp(q, axis=1)
        policies[t] = np.exp(q - v[:, None])
    return policies, v


def expected_svf(mdp, reward, dataset, horizon: int | None = None) -> np.ndarray:
    """Expected visitation counts of the soft-optimal policy over ``horizon`` steps.

    Starts from the dataset's empirical start distribution; the result sums
    to ``horizon``.
    """
    horizon = _horizon(dataset, horizon)
    policies, _ = soft_backward(mdp, reward, horizon)
    d = start_distribution(dataset, mdp.num_states)
    svf = np.zeros(mdp.num_states)
    for t in range(horizon):
        svf += d
        if t + 1 < horizon:
            d = np.einsum("s,sa,sak->k", d, policies[t], mdp.transition)
    return svf


def maxent_log_likelihood(mdp, reward, dataset, horizon: int | None = None) -> float:
    """Mean per-trajectory log-likelihood of the demonstrations under ``reward``."""
    horizon = _horizon(dataset, horizon)
    r = np.asarray(reward, dtype=float)
    _, v0 = soft_backward(mdp, r, horizon)
    d0 = start_distribution(dataset, mdp.num_states)
    return float(empirical_svf(dataset, mdp.num_states, horizon) @ r - d0 @ v0)


def reward_gradient(mdp, reward, dataset, horizon: int | None = None) -> np.ndarray:
    """d log-likelihood / d reward: empirical minus expected visitation."""
    horizon = _horizon(dataset, horizon)
    return empirical_svf(dataset, mdp.num_states, horizon) - expected_svf(mdp, reward, dataset, horizon)


@dataclass
class MaxEntResult:
    reward: np.ndarray
    weights: np.ndarray
    grad_norms: list = field(default_factory=list)


def maxent_irl(features, mdp, dataset, config: MaxEntConfig = MaxEntConfig()) -> MaxEntResult:
    """Linear-reward MaxEnt IRL by gradient ascent on the feature weights."""
    f = np.asarray(features, dtype=float)
    if f.shape[0] != mdp.num_states:
        raise ValidationError(f"feature rows {f.shape[0]} != states {mdp.num_states}")
    horizon = _horizon(dataset, config.horizon)
    emp = empirical_svf(dataset, mdp.num_states, horizon)
    w = np.zeros(f.shape[1])
    norms = []
    for _ in range(config.iterations):
        svf = expected_svf(mdp, f @ w, dataset, horizon)
        grad = f.T @ (emp - svf) - config.l2 * w
        w = w + config.learning_rate * grad
        norms.append(float(np.abs(grad).max()))
        if not np.all(np.isfinite(w)):
            raise TrainingError("MaxEnt weights became non-finite; lower the learning rate")
    return MaxEntResult(f @ w, w, norms)


@dataclass
class DeepMaxEntResult:
    reward: np.ndarray
    net: Mlp
    grad_norms: list = field(default_factory=list)


def deep_maxent_irl(features, mdp, dataset, config: DeepMaxEntConfig = DeepMaxEntConfig()) -> DeepMaxEntResult:
    """MaxEnt IRL with an MLP reward over state features, trained with Adam."""
    f = np.asarray(features, dtype=float)
    if f.shape[0] != mdp.num_states:
        raise ValidationError(f"feature rows {f.shape[0]} != states {mdp.num_states}")
    horizon = _horizon(dataset, config.horizon)
    rng = None if config.zero_init else np.random.default_rng(config.seed)
    net = Mlp((f.shape[1], *config.hidden, 1), rng=rng)
    opt = AdamState(lr=config.learning_rate)
    emp = empirical_svf(dataset, mdp.num_states, horizon)
    norms = []
    for it in range(config.iterations):
        (out,), cache = net.forward(f)
        r = out[:, 0]
        svf = expected_svf(mdp, r, dataset, horizon)
        grads, _ = net.backward(cache, -(emp - svf)[:, None])
        norms.append(float(np.abs(emp - svf).max()))
        if not all(np.all(np.isfinite(g)) for g in grads):
            raise TrainingError(f"non-finite Deep MaxEnt gradient at iteration {it}")
        adam_step(net.params, grads, opt)
    reward = net(f)[:, 0]
    return DeepMaxEntResult(reward, net, norms)
