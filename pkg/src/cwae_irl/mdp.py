"""Tabular MDPs and exact dynamic-programming solvers.

Per-state rewards are received in the state the agent occupies, so a
backup reads ``Q(s, a) = r(s) + gamma * sum_s' P[s, a, s'] V(s')``.
Rewards indexed by ``(s, a, s')`` are reduced to their expectation under
``P`` before each backup.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from .errors import ConvergenceError, ValidationError

DEFAULT_TOL = 1e-6
MAX_ITERATIONS = 10_000


@dataclass(frozen=True)
class MdpModel:
    """A finite MDP without a reward.

    Attributes:
        transition: ``(S, A, S)`` array of probabilities ``P[s, a, s']``.
        discount: Discount factor in ``[0, 1)``.
    """

    transition: np.ndarray
    discount: float

    def __post_init__(self):
        p = np.asarray(self.transition, dtype=float)
        object.__setattr__(self, "transition", p)
        if p.ndim != 3 or p.shape[0] != p.shape[2] or 0 in p.shape:
            raise ValidationError(f"transition must have shape (S, A, S), got {p.shape}")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValidationError("transition entries must be finite and non-negative")
        row_err = np.abs(p.sum(axis=2) - 1.0).max()
        if row_err > 1e-9:
            raise ValidationError(f"transition rows must sum to 1 (max error {row_err:.3g})")
        if not 0.0 <= self.discount < 1.0:
            raise ValidationError(f"discount must lie in [0, 1), got {self.discount}")

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transition.shape[1]


def expected_reward(mdp: MdpModel, reward) -> np.ndarray:
    """Reduce a reward table to the ``(S, A)`` immediate expected reward."""
    r = np.asarray(reward, dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValidationError("reward entries must be finite")
    S, A = mdp.num_states, mdp.num_actions
    if r.shape == (S,):
        return np.repeat(r[:, None], A, axis=1)
    if r.shape == (S, A, S):
        return np.einsum("ijk,ijk->ij", mdp.transition, r)
    raise ValidationError(f"reward shape {r.shape} does not match MDP with {S} states, {A} actions")


def bellman_backup(mdp: MdpModel, r_sa: np.ndarray, v: np.ndarray) -> np.ndarray:
    """One optimality backup, returning Q."""
    return r_sa + mdp.discount * (mdp.transition @ v)


def value_iteration(mdp: MdpModel, reward, tol: float = DEFAULT_TOL, v_init=None,
                    max_iterations: int = MAX_ITERATIONS):
    """Solve for the optimal value and action-value functions.

    Iterates until successive iterates differ by less than
    ``tol * (1 - gamma) / gamma`` in max-norm, which bounds the distance to
    the true fixed point by ``tol``.

    Args:
        mdp: The model.
        reward: Per-state vector or ``(S, A, S)`` tensor.
        tol: Accuracy target for V.
        v_init: Optional warm start.
        max_iterations: Cap before ``ConvergenceError``.

    Returns:
        Tuple ``(V, Q)``.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    r_sa = expected_reward(mdp, reward)
    gamma = mdp.discount
    v = np.zeros(mdp.num_states) if v_init is None else np.array(v_init, dtype=float)
    if gamma == 0.0:
        q = r_sa.copy()
        return q.max(axis=1), q
    stop = tol * (1.0 - gamma) / gamma
    for _ in range(max_iterations):
        q = bellman_backup(mdp, r_sa, v)
        v_new = q.max(axis=1)
        delta = np.abs(v_new - v).max()
        v = v_new
        if delta < stop:
            return v, bellman_backup(mdp, r_sa, v)
    raise ConvergenceError(f"value iteration did not converge in {max_iterations} iterations")


def _as_policy_matrix(policy, num_states: int, num_actions: int) -> np.ndarray:
    pi = np.asarray(policy)
    if pi.shape == (num_states,) and np.issubdtype(pi.dtype, np.integer):
        if pi.min() < 0 or pi.max() >= num_actions:
            raise ValidationError("deterministic policy has out-of-range actions")
        out = np.zeros((num_states, num_actions))
        out[np.arange(num_states), pi] = 1.0
        return out
    if pi.shape == (num_states, num_actions):
        pi = pi.astype(float)
        if np.any(pi < 0) or np.abs(pi.sum(axis=1) - 1.0).max() > 1e-9:
            raise ValidationError("stochastic policy rows must be non-negative and sum to 1")
        return pi
    raise ValidationError(f"policy shape {pi.shape} does not match ({num_states}, {num_actions})")


def policy_matrix(policy, num_states: int, num_actions: int) -> np.ndarray:
    """Return ``policy`` as an ``(S, A)`` stochastic matrix, validating it."""
    return _as_policy_matrix(policy, num_states, num_actions)


def policy_evaluation(mdp: MdpModel, reward, policy, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Value of ``policy``, solved directly from the linear Bellman system.

    ``policy`` is an integer action per state or an ``(S, A)`` matrix. The
    direct solve is exact to machine precision, so ``tol`` only guards the
    argument contract.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    pi = _as_policy_matrix(policy, mdp.num_states, mdp.num_actions)
    r_sa = expected_reward(mdp, reward)
    r_pi = (pi * r_sa).sum(axis=1)
    p_pi = np.einsum("ij,ijk->ik", pi, mdp.transition)
    a = np.eye(mdp.num_states) - mdp.discount * p_pi
    return np.linalg.solve(a, r_pi)


def greedy_policy(q) -> np.ndarray:
    """Deterministic argmax policy; ties go to the lowest action index."""
    q = np.asarray(q, dtype=float)
    return np.argmax(q, axis=1)


def boltzmann_policy(q, temperature: float) -> np.ndarray:
    """Softmax policy ``pi[s, a] ~ exp(Q[s, a] / temperature)``."""
    if temperature <= 0:
        raise ValidationError(f"temperature must be positive, got {temperature}")
    return softmax(np.asarray(q, dtype=float) / temperature, axis=1)
