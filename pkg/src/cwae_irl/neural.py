"""A small feed-forward network with hand-written gradients and Adam.

Networks map a batch ``x`` of shape ``(n, in)`` to one or more linear
heads. Hidden layers use ReLU (or tanh) followed by inverted dropout in
train mode, so eval-mode outputs need no rescaling.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, TrainingError, UsageError, ValidationError

_ACTIVATIONS = ("relu", "tanh")
CHECKPOINT_VERSION = 1


class Mlp:
    """Multi-layer perceptron.

    Args:
        sizes: Layer widths ``(in, hidden..., out)``; ``out`` is the total
            width of all heads.
        heads: Widths of the output heads, summing to ``sizes[-1]``.
            Defaults to a single head.
        activation: ``"relu"`` or ``"tanh"``.
        dropout: Drop probability applied after every hidden activation.
        rng: Generator for Glorot-uniform initialisation. ``None`` gives
            all-zero parameters.
    """

    def __init__(self, sizes, heads=None, activation="relu", dropout=0.0, rng=None):
        sizes = tuple(int(s) for s in sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise ValidationError(f"invalid layer sizes {sizes}")
        heads = (sizes[-1],) if heads is None else tuple(int(h) for h in heads)
        if sum(heads) != sizes[-1]:
            raise ValidationError(f"head widths {heads} do not sum to output width {sizes[-1]}")
        if activation not in _ACTIVATIONS:
            raise ValidationError(f"unknown activation {activation!r}")
        if not 0.0 <= dropout < 1.0:
            raise ValidationError("dropout must lie in [0, 1)")
        self.sizes = sizes
        self.heads = heads
        self.activation = activation
        self.dropout = dropout
        self.params = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            if rng is None:
                w = np.zeros((fan_in, fan_out))
            else:
                limit = np.sqrt(6.0 / (fan_in + fan_out))
                w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
            self.params += [w, np.zeros(fan_out)]

    @property
    def num_layers(self) -> int:
        return len(self.sizes) - 1

    def weights(self, i):
        return self.params[2 * i], self.params[2 * i + 1]

    def copy(self) -> "Mlp":
        other = Mlp.__new__(Mlp)
        other.__dict__.update(self.__dict__)
        other.params = [p.copy() for p in self.params]
        return other

    def load_params(self, params):
        for dst, src in zip(self.params, params):
            dst[...] = src

    def _act(self, z):
        return np.maximum(z, 0.0) if self.activation == "relu" else np.tanh(z)

    def _act_grad(self, z, h):
        return (z > 0).astype(float) if self.activation == "relu" else 1.0 - h**2

    def forward(self, x, train=False, rng=None):
        """Run the network.

        Args:
            x: ``(n, in)`` array (a single row vector is promoted).
            train: Apply dropout when True; requires ``rng`` if dropout > 0.
            rng: Generator drawing the dropout masks.

        Returns:
            ``(outputs, cache)`` where ``outputs`` is a list with one array
            per head.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.sizes[0]:
            raise ValidationError(f"input width {x.shape[1]} != {self.sizes[0]}")
        use_dropout = train and self.dropout > 0.0
        if use_dropout and rng is None:
            raise UsageError("train-mode dropout needs an rng")
        keep = 1.0 - self.dropout
        h = x
        layers = []
        for i in range(self.num_layers):
            w, b = self.weights(i)
            z = h @ w + b
            if i == self.num_layers - 1:
                layers.append((h, None, None, None))
                h = z
                break
            a = self._act(z)
            mask = None
            if use_dropout:
                mask = (rng.random(a.shape) < keep) / keep
                out = a * mask
            else:
                out = a
            layers.append((h, z, a, mask))
            h = out
        cache = {"net": id(self), "sizes": self.sizes, "layers": layers}
        return np.split(h, np.cumsum(self.heads)[:-1], axis=1), cache

    def __call__(self, x):
        out, _ = self.forward(x)
        return out[0] if len(out) == 1 else out

    def backward(self, cache, grad_outputs):
        """Back-propagate head gradients through the cached forward pass.

        Returns:
            ``(param_grads, grad_input)`` with ``param_grads`` aligned to
            ``self.params``.
        """
        if cache.get("net") != id(self) or cache.get("sizes") != self.sizes:
            raise UsageError("forward cache does not belong to this network")
        if not isinstance(grad_outputs, (list, tuple)):
            grad_outputs = [grad_outputs]
        if len(grad_outputs) != len(self.heads):
            raise UsageError(f"expected {len(self.heads)} head gradients")
        g = np.concatenate([np.atleast_2d(go) for go in grad_outputs], axis=1)
        grads = [None] * len(self.params)
        for i in reversed(range(self.num_layers)):
            h_in, z, a, mask = cache["layers"][i]
            if z is not None:
                if mask is not None:
                    g = g * mask
                g = g * self._act_grad(z, a)
            w, _ = self.weights(i)
            grads[2 * i] = h_in.T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ w.T
        return grads, g

    def save(self, path, header=None):
        """Write a text checkpoint: header lines then one parameter per line.

        ``header`` is an optional list of extra ``# key=value`` comment
        lines (without the leading ``#``).
        """
        lines = [f"# mlp-checkpoint v{CHECKPOINT_VERSION}"]
        lines += [f"# {h}" for h in header or ()]
        lines.append("sizes " + " ".join(map(str, self.sizes)))
        lines.append("heads " + " ".join(map(str, self.heads)))
        lines.append(f"activation {self.activation}")
        lines.append(f"dropout {self.dropout!r}")
        for p in self.params:
            lines.extend(repr(float(v)) for v in p.ravel())
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "Mlp":
        lines = Path(path).read_text().splitlines()
        if not lines or not lines[0].startswith("# mlp-checkpoint"):
            raise ParseError("missing mlp-checkpoint header", 1)
        body = [(i, ln) for i, ln in enumerate(lines, start=1) if not ln.startswith("#")]
        try:
            meta = {ln.split()[0]: ln.split()[1:] for _, ln in body[:4]}
            sizes = [int(v) for v in meta["sizes"]]
            heads = [int(v) for v in meta["heads"]]
            net = cls(sizes, heads, meta["activation"][0], float(meta["dropout"][0]))
        except (KeyError, IndexError, ValueError) as exc:
            raise ParseError(f"bad checkpoint preamble: {exc}") from None
        values = body[4:]
        expected = sum(p.size for p in net.params)
        if len(values) != expected:
            raise ParseError(f"expected {expected} parameter values, found {len(values)}")
        pos = 0
        for p in net.params:
            chunk = []
            for lineno, ln in values[pos:pos + p.size]:
                try:
                    chunk.append(float(ln))
                except ValueError:
                    raise ParseError(f"not a number: {ln!r}", lineno) from None
            p[...] = np.array(chunk).reshape(p.shape)
            pos += p.size
        return net


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(params, grads, state: AdamState) -> AdamState:
    """Bias-corrected Adam update, applied to ``params`` in place."""
    if len(params) != len(grads):
        raise ValidationError("params and grads differ in length")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    for p, g in zip(params, grads):
        if p.shape != np.shape(g):
            raise ValidationError(f"gradient shape {np.shape(g)} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingError("non-finite gradient passed to adam_step")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state


@dataclass
class GradCheckReport:
    max_rel_error: float
    block_errors: list


def gradient_check(params, loss_fn, analytic, eps=1e-5, floor=1e-8) -> GradCheckReport:
    """Compare ``analytic`` gradients with central differences of ``loss_fn``.

    ``loss_fn()`` must recompute the scalar loss from the current contents
    of ``params`` (which are perturbed in place and restored). The error of
    each entry is ``|a - n| / max(|n|, floor)``, relative to the numerical
    estimate.
    """
    if eps <= 0:
        raise ValidationError("eps must be positive")
    errors = []
    for p, a in zip(params, analytic):
        flat = p.reshape(-1)
        a = np.asarray(a).reshape(-1)
        worst = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss_fn()
            flat[i] = orig - eps
            down = loss_fn()
            flat[i] = orig
            num = (up - down) / (2.0 * eps)
            denom = max(abs(num), floor)
            worst = max(worst, abs(a[i] - num) / denom)
        errors.append(worst)
    return GradCheckReport(max(errors, default=0.0), errors)


def finite_diff_check(net: Mlp, loss_fn, x, eps=1e-5, train=False, mask_seed=0,
                      analytic=None) -> GradCheckReport:
    """Check ``net.backward`` against central differences.

    Args:
        net: Network under test.
        loss_fn: Maps the list of head outputs to ``(loss, head_grads)``.
        x: Input batch.
        eps: Central-difference step.
        train: Check in train mode; dropout masks are regenerated from
            ``mask_seed`` on every evaluation so they stay fixed.
        analytic: Override the analytic gradients (for fault injection).
    """

    def run():
        rng = np.random.default_rng(mask_seed) if train else None
        return net.forward(x, train=train, rng=rng)

    if analytic is None:
        out, cache = run()
        _, grad_out = loss_fn(out)
        analytic, _ = net.backward(cache, grad_out)
    return gradient_check(net.params, lambda: loss_fn(run()[0])[0], analytic, eps)
