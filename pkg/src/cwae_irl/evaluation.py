"""Reward-recovery metrics and figure-data exporters."""

from dataclasses import dataclass, asdict
import csv
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from .errors import ParseError, ValidationError
from .mdp import DEFAULT_TOL, greedy_policy, policy_evaluation, value_iteration

METRICS_COLUMNS = ("method", "seed", "pearson", "spearman", "evd", "mean_signed_error", "seconds")
CURVE_COLUMNS = ("epoch", "total", "recon", "divergence", "val_total")


def pearson(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValidationError("pearson needs two equal-length vectors of length >= 2")
    da, db = a - a.mean(), b - b.mean()
    na, nb = np.sqrt(da @ da), np.sqrt(db @ db)
    if na == 0 or nb == 0:
        raise ValidationError("correlation is undefined for a constant input")
    return float(np.clip(da @ db / (na * nb), -1.0, 1.0))


def spearman(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise ValidationError("correlation is undefined for a constant input")
    return float(spearmanr(a, b).statistic)


def evd(mdp, true_reward, learned_reward, tol: float = DEFAULT_TOL) -> float:
    """Expected value difference under a uniform start distribution.

    Optimal value under the true reward minus the true-reward value of the
    policy that is greedy for the learned reward.
    """
    v_star, _ = value_iteration(mdp, true_reward, tol)
    _, q_learned = value_iteration(mdp, learned_reward, tol)
    v_learned = policy_evaluation(mdp, true_reward, greedy_policy(q_learned), tol)
    return float(v_star.mean() - v_learned.mean())


@dataclass
class ErrorSeries:
    errors: np.ndarray
    smoothed: np.ndarray
    band: np.ndarray  # per-step standard deviation over the same window


def moving_window(x, window: int):
    """Centred moving mean and standard deviation; windows shrink at the edges."""
    if window < 1:
        raise ValidationError("window must be at least 1")
    x = np.asarray(x, dtype=float)
    n = len(x)
    half_lo, half_hi = (window - 1) // 2, window // 2
    mean, std = np.empty(n), np.empty(n)
    for t in range(n):
        seg = x[max(0, t - half_lo): min(n, t + half_hi + 1)]
        mean[t], std[t] = seg.mean(), seg.std()
    return mean, std


def reward_error_series(predicted, true, window: int = 25) -> ErrorSeries:
    """Per-step ``predicted - true`` error with its smoothed mean and 1-sigma band."""
    err = np.asarray(predicted, dtype=float) - np.asarray(true, dtype=float)
    smoothed, band = moving_window(err, window)
    return ErrorSeries(err, smoothed, band)


def model_error_series(model, dataset, env, window: int = 25) -> ErrorSeries:
    """Error series of a CWAE model's encoder mean against the env's true reward.

    Steps of all trajectories are concatenated in order.
    """
    from .cwae import predict_rewards

    s, a, s2 = dataset.transitions()
    predicted = predict_rewards(model, env, s, a, s2)
    if env.name == "pendulum":
        true = np.array([env.reward(si, ai) for si, ai in zip(s, a)])
    else:
        true = env.reward[np.asarray(s, dtype=int)]
    return reward_error_series(predicted, true, window)


def heatmap_export(reward, grid_size: int, path):
    """Write an N x N grid of rewards, row-major from grid row 0, 6 decimals."""
    r = np.asarray(reward, dtype=float)
    if r.shape != (grid_size * grid_size,):
        raise ValidationError(f"reward length {r.size} != {grid_size}x{grid_size}")
    rows = r.reshape(grid_size, grid_size)
    body = "".join(",".join(f"{v:.6f}" for v in row) + "\n" for row in rows)
    Path(path).write_text(body)


def heatmap_load(path) -> np.ndarray:
    rows = []
    for i, line in enumerate(Path(path).read_text().splitlines(), start=1):
        try:
            rows.append([float(v) for v in line.split(",")])
        except ValueError:
            raise ParseError(f"non-numeric heatmap entry in {line!r}", i) from None
    if not rows or any(len(r) != len(rows) for r in rows):
        raise ParseError("heatmap must be a square grid")
    return np.array(rows).ravel()


@dataclass
class MetricsReport:
    method: str
    seed: int
    pearson: float
    spearman: float
    evd: float
    mean_signed_error: float
    seconds: float


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6f}" if np.isfinite(v) else "nan"
    return str(v)


def write_metrics(reports, path, include_seconds=True):
    """Write reports as CSV. ``seconds`` is blanked when not included, so
    repeated runs produce identical files."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_COLUMNS)
        for rep in reports:
            row = asdict(rep)
            if not include_seconds:
                row["seconds"] = ""
            w.writerow([_fmt(row[c]) if row[c] != "" else "" for c in METRICS_COLUMNS])


def read_metrics(path) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and tuple(rows[0].keys()) != METRICS_COLUMNS:
        raise ParseError("unexpected metrics header", 1)
    out = []
    for row in rows:
        vals = {k: (float(v) if v not in ("", "nan") else float("nan")) for k, v in row.items()
                if k not in ("method", "seed")}
        out.append(MetricsReport(row["method"], int(row["seed"]), **vals))
    return out


def write_curves(curves, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_COLUMNS)
        for e in range(len(curves["total"])):
            w.writerow([e] + [repr(float(curves[k][e])) for k in CURVE_COLUMNS[1:]])


def write_error_series(series: ErrorSeries, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t", "error", "smoothed", "band"))
        for t, (e, m, b) in enumerate(zip(series.errors, series.smoothed, series.band)):
            w.writerow([t, repr(float(e)), repr(float(m)), repr(float(b))])
