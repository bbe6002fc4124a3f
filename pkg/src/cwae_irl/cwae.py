"""Conditional Wasserstein auto-encoder for reward recovery.

The encoder reads a transition ``(s_t, a_t, s_{t+1})`` and outputs the mean
and log-variance of an isotropic Gaussian over a latent reward ``r_t``. The
decoder reconstructs ``s_{t+1}`` from ``(s_t, a_t, r_t)``. Training
minimises reconstruction MSE plus an MMD penalty pulling the batch of
latent samples toward a standard normal prior (or a KL penalty, for
ablation).
"""

from dataclasses import dataclass, field, asdict
import json
from pathlib import Path

import numpy as np

from .envs.objectworld import STAY
from .errors import ParseError, TrainingError, ValidationError
from .neural import AdamState, Mlp, adam_step

LOGVAR_CLAMP = 20.0


def state_repr(env, state) -> np.ndarray:
    """Network encoding of a state.

    Objectworld: ``[x/N, y/N, f_0..f_3]``. Pendulum:
    ``[cos, sin, thdot / max_speed]``.
    """
    if env.name == "objectworld":
        n = env.grid_size
        s = int(state)
        return np.concatenate([[(s % n) / n, (s // n) / n], env.features[s]])
    if env.name == "pendulum":
        s = np.asarray(state, dtype=float)
        return np.array([s[0], s[1], s[2] / env.spec.max_speed])
    raise ValidationError(f"unsupported env {env!r}")


def state_reprs(env, states) -> np.ndarray:
    """Vectorised ``state_repr`` over a sequence of states."""
    if env.name == "objectworld":
        n = env.grid_size
        s = np.asarray(states, dtype=int)
        return np.column_stack([(s % n) / n, (s // n) / n, env.features[s]])
    s = np.array(states, dtype=float, ndmin=2)
    return np.column_stack([s[:, 0], s[:, 1], s[:, 2] / env.spec.max_speed])


def repr_dim(env) -> int:
    return 6 if env.name == "objectworld" else 3


def one_hot(actions, num_actions: int) -> np.ndarray:
    a = np.asarray(actions, dtype=int)
    out = np.zeros((a.size, num_actions))
    out[np.arange(a.size), a.ravel()] = 1.0
    return out


@dataclass(frozen=True)
class CwaeTrainConfig:
    divergence: str = "mmd"  # or "kl"
    lam: float = 10.0
    bandwidth: str | float = "median"  # "median" or a fixed positive value
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 32
    dropout: float = 0.1
    hidden: tuple = (64, 64)
    latent_dim: int = 1
    val_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.divergence not in ("mmd", "kl"):
            raise ValidationError(f"unknown divergence {self.divergence!r}")
        if self.lam < 0:
            raise ValidationError("lam must be non-negative")
        if self.divergence == "mmd" and self.batch_size < 2:
            raise ValidationError("MMD needs batch_size >= 2")
        if self.batch_size < 1 or self.epochs < 0 or self.latent_dim < 1:
            raise ValidationError("batch_size, latent_dim must be positive; epochs non-negative")
        if self.bandwidth != "median" and not (isinstance(self.bandwidth, (int, float)) and self.bandwidth > 0):
            raise ValidationError(f"bandwidth must be 'median' or a positive number, got {self.bandwidth!r}")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValidationError("val_fraction must lie in [0, 1)")


@dataclass
class CwaeModel:
    encoder: Mlp
    decoder: Mlp
    latent_dim: int
    state_dim: int
    num_actions: int
    env: str

    @classmethod
    def create(cls, env_name, state_dim, num_actions, latent_dim=1, hidden=(64, 64),
               dropout=0.1, rng=None):
        """Fresh model; ``rng=None`` gives all-zero parameters."""
        enc = Mlp((2 * state_dim + num_actions, *hidden, 2 * latent_dim),
                  heads=(latent_dim, latent_dim), dropout=dropout, rng=rng)
        dec = Mlp((state_dim + num_actions + latent_dim, *hidden, state_dim),
                  dropout=dropout, rng=rng)
        return cls(enc, dec, latent_dim, state_dim, num_actions, env_name)

    def save(self, prefix, config: CwaeTrainConfig | None = None):
        """Write ``<prefix>.encoder.txt``/``<prefix>.decoder.txt`` checkpoints.

        Each file carries a JSON metadata header line.
        """
        meta = {"env": self.env, "latent_dim": self.latent_dim, "state_dim": self.state_dim,
                "num_actions": self.num_actions,
                "config": asdict(config) if config is not None else None}
        header = ["meta " + json.dumps(meta, sort_keys=True)]
        self.encoder.save(f"{prefix}.encoder.txt", header)
        self.decoder.save(f"{prefix}.decoder.txt", header)

    @classmethod
    def load(cls, prefix) -> "CwaeModel":
        first = Path(f"{prefix}.encoder.txt").read_text().splitlines()
        meta_lines = [ln for ln in first if ln.startswith("# meta ")]
        if not meta_lines:
            raise ParseError("checkpoint lacks a '# meta' header")
        meta = json.loads(meta_lines[0][len("# meta "):])
        return cls(Mlp.load(f"{prefix}.encoder.txt"), Mlp.load(f"{prefix}.decoder.txt"),
                   meta["latent_dim"], meta["state_dim"], meta["num_actions"], meta["env"])


@dataclass
class Batch:
    """Encoded transitions: state reprs, one-hot actions, next-state reprs."""

    s: np.ndarray
    a: np.ndarray
    s_next: np.ndarray

    def __len__(self):
        return len(self.s)

    def take(self, idx):
        return Batch(self.s[idx], self.a[idx], self.s_next[idx])


def make_batch(env, states, actions, next_states) -> Batch:
    return Batch(state_reprs(env, states), one_hot(actions, env.num_actions),
                 state_reprs(env, next_states))


def encode(model: CwaeModel, s, a, s_next, train=False, rng=None):
    """Latent mean and clamped log-variance for encoded transitions."""
    (mu, logvar), _ = model.encoder.forward(np.hstack([s, a, s_next]), train, rng)
    return mu, np.clip(logvar, -LOGVAR_CLAMP, LOGVAR_CLAMP)


def reparameterize(mu, logvar, eps):
    mu, logvar, eps = np.asarray(mu, float), np.asarray(logvar, float), np.asarray(eps, float)
    if mu.shape != logvar.shape or mu.shape != eps.shape:
        raise ValidationError("mu, logvar and eps must share a shape")
    return mu + np.exp(0.5 * logvar) * eps


def decode(model: CwaeModel, s, a, r, train=False, rng=None):
    r = np.atleast_2d(r)
    if r.shape[1] != model.latent_dim:
        raise ValidationError(f"latent width {r.shape[1]} != {model.latent_dim}")
    (out,), _ = model.decoder.forward(np.hstack([s, a, r]), train, rng)
    return out


def _sq_dists(x, y):
    return ((x[:, None, :] - y[None, :, :]) ** 2).sum(axis=2)


def median_bandwidth(z, z_prior) -> float:
    """Median pairwise distance over the pooled samples, floored at 1e-6."""
    pooled = np.vstack([z, z_prior])
    d = np.sqrt(_sq_dists(pooled, pooled))
    iu = np.triu_indices(len(pooled), k=1)
    return max(float(np.median(d[iu])), 1e-6)


def rbf_kernel(x, y, bandwidth):
    return np.exp(-_sq_dists(x, y) / (2.0 * bandwidth**2))


def mmd_divergence(z, z_prior, lam, bandwidth) -> float:
    """Unbiased MMD estimate between latent samples and prior samples.

    Off-diagonal means of ``k(z, z)`` and ``k(z~, z~)`` minus twice the full
    mean of ``k(z, z~)``, scaled by ``lam``. Can be negative.
    """
    z, z_prior = np.atleast_2d(z), np.atleast_2d(z_prior)
    if z.shape != z_prior.shape:
        raise ValidationError(f"sample shapes differ: {z.shape} vs {z_prior.shape}")
    n = len(z)
    if n < 2:
        raise ValidationError("the unbiased MMD estimator needs at least 2 samples")
    k_zz = rbf_kernel(z, z, bandwidth)
    k_pp = rbf_kernel(z_prior, z_prior, bandwidth)
    k_zp = rbf_kernel(z, z_prior, bandwidth)
    off = n * (n - 1)
    return float(lam * ((k_zz.sum() - np.trace(k_zz)) / off
                        + (k_pp.sum() - np.trace(k_pp)) / off
                        - 2.0 * k_zp.sum() / n**2))


def mmd_grad(z, z_prior, lam, bandwidth) -> np.ndarray:
    """Gradient of ``mmd_divergence`` w.r.t. ``z`` at a fixed bandwidth."""
    n = len(z)
    s2 = bandwidth**2
    k_zz = rbf_kernel(z, z, bandwidth)
    np.fill_diagonal(k_zz, 0.0)
    k_zp = rbf_kernel(z, z_prior, bandwidth)
    diff_zz = z[:, None, :] - z[None, :, :]
    diff_zp = z[:, None, :] - z_prior[None, :, :]
    g = -2.0 / (n * (n - 1)) * (k_zz[:, :, None] * diff_zz).sum(axis=1) / s2
    g += 2.0 / n**2 * (k_zp[:, :, None] * diff_zp).sum(axis=1) / s2
    return lam * g


def kl_gaussian(mu, logvar) -> float:
    """KL of N(mu, exp(logvar)) from N(0, I), summed over dimensions."""
    mu, logvar = np.asarray(mu, float), np.asarray(logvar, float)
    return float(0.5 * np.sum(np.exp(logvar) + mu**2 - 1.0 - logvar))


@dataclass
class LossTerms:
    total: float
    recon: float
    divergence: float
    grads: list | None = field(default=None, repr=False)


def cwae_loss(model: CwaeModel, batch: Batch, config: CwaeTrainConfig, rng, train=True,
              with_grads=False) -> LossTerms:
    """Reconstruction MSE plus the divergence penalty on one batch.

    ``rng`` draws (in order) dropout masks, reparameterisation noise and
    prior samples, so replaying a seed reproduces the loss exactly. With
    ``with_grads`` the result carries gradients for
    ``encoder.params + decoder.params``.
    """
    n = len(batch)
    if config.divergence == "mmd" and n < 2:
        raise ValidationError("MMD needs at least 2 transitions per batch")
    d = model.latent_dim
    (mu, raw_logvar), enc_cache = model.encoder.forward(
        np.hstack([batch.s, batch.a, batch.s_next]), train, rng)
    logvar = np.clip(raw_logvar, -LOGVAR_CLAMP, LOGVAR_CLAMP)
    eps = rng.standard_normal((n, d))
    std = np.exp(0.5 * logvar)
    z = mu + std * eps
    (recon_out,), dec_cache = model.decoder.forward(np.hstack([batch.s, batch.a, z]), train, rng)
    resid = recon_out - batch.s_next
    recon = float(np.mean(resid**2))

    if config.divergence == "mmd":
        z_prior = rng.standard_normal((n, d))
        bw = median_bandwidth(z, z_prior) if config.bandwidth == "median" else float(config.bandwidth)
        div = mmd_divergence(z, z_prior, config.lam, bw)
    else:
        div = config.lam * kl_gaussian(mu, logvar) / n
    total = recon + div
    if not with_grads:
        return LossTerms(total, recon, div)

    g_recon = 2.0 * resid / resid.size
    dec_grads, g_dec_in = model.decoder.backward(dec_cache, g_recon)
    g_z = g_dec_in[:, -d:]
    g_mu = g_z.copy()
    g_logvar = g_z * eps * 0.5 * std
    if config.divergence == "mmd":
        g_z_div = mmd_grad(z, z_prior, config.lam, bw)
        g_mu += g_z_div
        g_logvar += g_z_div * eps * 0.5 * std
    else:
        g_mu += config.lam * mu / n
        g_logvar += config.lam * 0.5 * (np.exp(logvar) - 1.0) / n
    g_logvar *= np.abs(raw_logvar) < LOGVAR_CLAMP
    enc_grads, _ = model.encoder.backward(enc_cache, [g_mu, g_logvar])
    return LossTerms(total, recon, div, enc_grads + dec_grads)


def _batches(indices, batch_size, min_size):
    chunks = [indices[i:i + batch_size] for i in range(0, len(indices), batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) < min_size:
        chunks[-2] = np.concatenate([chunks[-2], chunks.pop()])
    return chunks


def train_cwae(dataset, env, config: CwaeTrainConfig):
    """Minibatch Adam training on a dataset's transitions.

    A seeded permutation reserves ``val_fraction`` of the transitions for
    validation. Returns the model and per-epoch curves ``total``, ``recon``,
    ``divergence`` (training means) and ``val_total``.
    """
    if not dataset.trajectories:
        raise ValidationError("dataset is empty")
    rng = np.random.default_rng(config.seed)
    data = make_batch(env, *dataset.transitions())
    model = CwaeModel.create(env.name, repr_dim(env), env.num_actions, config.latent_dim,
                             config.hidden, config.dropout, rng)
    perm = rng.permutation(len(data))
    n_val = int(round(config.val_fraction * len(data)))
    if config.divergence == "mmd" and 0 < n_val < 2:
        n_val = 0
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    min_size = 2 if config.divergence == "mmd" else 1
    if len(train_idx) < min_size:
        raise ValidationError("not enough transitions to train")
    params = model.encoder.params + model.decoder.params
    opt = AdamState(lr=config.learning_rate)
    curves = {"total": [], "recon": [], "divergence": [], "val_total": []}
    for epoch in range(config.epochs):
        sums = np.zeros(3)
        chunks = _batches(rng.permutation(train_idx), config.batch_size, min_size)
        for idx in chunks:
            terms = cwae_loss(model, data.take(idx), config, rng, train=True, with_grads=True)
            if not np.isfinite(terms.total):
                raise TrainingError(f"non-finite CWAE loss at epoch {epoch}")
            adam_step(params, terms.grads, opt)
            sums += (terms.total, terms.recon, terms.divergence)
        means = sums / len(chunks)
        curves["total"].append(float(means[0]))
        curves["recon"].append(float(means[1]))
        curves["divergence"].append(float(means[2]))
        if n_val:
            val = cwae_loss(model, data.take(val_idx), config, rng, train=False)
            curves["val_total"].append(val.total)
        else:
            curves["val_total"].append(float("nan"))
    return model, curves


@dataclass
class RewardEstimate:
    mean: np.ndarray
    variance: np.ndarray
    mode: str


def extract_reward_map(model: CwaeModel, env, mode="probe", dataset=None) -> RewardEstimate:
    """Per-state reward map of a tabular environment.

    ``probe``: encoder mean on the self-transition ``(s, stay, s)``.
    ``dataset-average``: mean encoder output over dataset transitions
    grouped by arrival state, falling back to the probe for unvisited
    states. Only the first latent dimension is reported.
    """
    if env.name != "objectworld":
        raise ValidationError("per-state maps need a tabular env; use predict_rewards per step")
    S = env.mdp.num_states
    states = np.arange(S)
    mu, logvar = encode(model, *_encoded(env, states, np.full(S, STAY), states))
    mean, var = mu[:, 0].copy(), np.exp(logvar[:, 0])
    if mode == "probe":
        return RewardEstimate(mean, var, mode)
    if mode != "dataset-average":
        raise ValidationError(f"unknown extraction mode {mode!r}")
    if dataset is None:
        raise ValidationError("dataset-average mode needs a dataset")
    s, a, s2 = dataset.transitions()
    mu_d, lv_d = encode(model, *_encoded(env, s, a, s2))
    counts = np.bincount(s2, minlength=S)
    sums = np.bincount(s2, weights=mu_d[:, 0], minlength=S)
    vsums = np.bincount(s2, weights=np.exp(lv_d[:, 0]), minlength=S)
    seen = counts > 0
    mean[seen] = sums[seen] / counts[seen]
    var[seen] = vsums[seen] / counts[seen]
    return RewardEstimate(mean, var, mode)


def _encoded(env, states, actions, next_states):
    b = make_batch(env, states, actions, next_states)
    return b.s, b.a, b.s_next


def predict_rewards(model: CwaeModel, env, states, actions, next_states) -> np.ndarray:
    """Encoder mean (first latent dimension) for each transition."""
    mu, _ = encode(model, *_encoded(env, states, actions, next_states))
    return mu[:, 0]
