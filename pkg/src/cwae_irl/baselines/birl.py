"""Bayesian IRL with a PolicyWalk-style Metropolis sampler.

The log-posterior of a per-state reward is ``alpha * sum Q*(s, a)`` over
the demonstrated state-action pairs plus the log-prior. Rewards live on a
grid of spacing ``step``; each proposal moves one coordinate by one grid
step.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ..errors import TrainingError, ValidationError
from ..mdp import value_iteration


@dataclass(frozen=True)
class BirlConfig:
    alpha: float = 1.0
    prior: str = "uniform"  # "uniform" on [-r_max, r_max] or "gaussian"
    r_max: float = 1.0
    prior_sigma: float = 1.0
    step: float = 0.05
    iterations: int = 50_000
    burn_in: int = 10_000
    likelihood: str = "unnormalized"  # or "boltzmann" (per-state softmax normaliser)
    tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.alpha < 0 or self.step <= 0 or self.r_max <= 0 or self.prior_sigma <= 0:
            raise ValidationError("alpha must be non-negative; step, r_max, prior_sigma positive")
        if self.prior not in ("uniform", "gaussian"):
            raise ValidationError(f"unknown prior {self.prior!r}")
        if self.likelihood not in ("unnormalized", "boltzmann"):
            raise ValidationError(f"unknown likelihood {self.likelihood!r}")
        if not 0 <= self.burn_in < self.iterations:
            raise ValidationError("burn_in must be smaller than iterations")

    @property
    def grid_limit(self) -> int:
        """Largest grid index inside the uniform prior's box."""
        return int(np.floor(self.r_max / self.step + 1e-9))


def demo_pairs(dataset):
    s, a, _ = dataset.transitions()
    return s.astype(int), a.astype(int)


def log_prior(reward, config: BirlConfig) -> float:
    r = np.asarray(reward, dtype=float)
    if config.prior == "uniform":
        return 0.0 if np.all(np.abs(r) <= config.r_max + 1e-9) else -np.inf
    return float(-0.5 * np.sum(r**2) / config.prior_sigma**2)


def _log_likelihood(q, pairs, config: BirlConfig) -> float:
    s, a = pairs
    ll = config.alpha * q[s, a].sum()
    if config.likelihood == "boltzmann":
        ll -= logsumexp(config.alpha * q[s], axis=1).sum()
    return float(ll)


def birl_log_posterior(mdp, reward, dataset, config: BirlConfig = BirlConfig(), q=None) -> float:
    """Unnormalised log-posterior of ``reward`` given the demonstrations."""
    lp = log_prior(reward, config)
    if not np.isfinite(lp):
        return lp
    if config.alpha == 0:
        return lp
    if q is None:
        _, q = value_iteration(mdp, reward, config.tol)
    return _log_likelihood(q, demo_pairs(dataset), config) + lp


@dataclass
class BirlResult:
    mean: np.ndarray
    acceptance_rate: float
    trace: list | None = None


def birl_policywalk(mdp, dataset, config: BirlConfig = BirlConfig(), record=False) -> BirlResult:
    """Posterior-mean reward from a random-walk Metropolis chain.

    With ``record``, the result carries ``(current_grid, proposed_grid,
    accepted)`` for every proposal, for diagnostics.
    """
    rng = np.random.default_rng(config.seed)
    S = mdp.num_states
    pairs = demo_pairs(dataset)
    k = np.zeros(S, dtype=int)  # reward = k * step
    limit = config.grid_limit
    need_q = config.alpha > 0

    def likelihood(kk, v_init):
        v, q = value_iteration(mdp, kk * config.step, config.tol, v_init=v_init)
        return _log_likelihood(q, pairs, config), v

    ll_cur, v_cur = likelihood(k, None) if need_q else (0.0, None)
    burn = config.burn_in
    total = np.zeros(S)
    since = np.zeros(S, dtype=int)  # first sample index holding the current k[i]
    accepted = 0
    trace = [] if record else None
    gauss = config.prior == "gaussian"
    prior_scale = 0.5 * config.step**2 / config.prior_sigma**2
    block = 65_536
    for base in range(0, config.iterations, block):
        m = min(block, config.iterations - base)
        coords = rng.integers(S, size=m)
        dirs = np.where(rng.random(m) < 0.5, 1, -1)
        log_u = np.log(rng.random(m))
        for j in range(m):
            it = base + j
            if it == burn and burn > 0 and accepted == 0:
                raise TrainingError("PolicyWalk accepted no proposals during burn-in; "
                                    "try a larger step or a smaller alpha")
            i, d = coords[j], dirs[j]
            new_ki = k[i] + d
            if not gauss and abs(new_ki) > limit:
                if record:
                    trace.append((k.copy(), _moved(k, i, d), False))
                continue
            log_ratio = -prior_scale * (new_ki**2 - k[i] ** 2) if gauss else 0.0
            if need_q:
                prop = _moved(k, i, d)
                ll_new, v_new = likelihood(prop, v_cur)
                log_ratio += ll_new - ll_cur
            ok = log_u[j] < log_ratio
            if record:
                trace.append((k.copy(), _moved(k, i, d), bool(ok)))
            if ok:
                total[i] += k[i] * max(0, it - max(since[i], burn))
                since[i] = it
                if need_q:
                    k, ll_cur, v_cur = prop, ll_new, v_new
                else:
                    k[i] = new_ki
                accepted += 1
    total += k * np.maximum(0, config.iterations - np.maximum(since, burn))
    n = config.iterations - burn
    return BirlResult(total / n * config.step, accepted / config.iterations, trace)


def _moved(k, i, d):
    out = k.copy()
    out[i] += d
    return out
