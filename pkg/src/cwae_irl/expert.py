"""Expert demonstrations: DP experts, trajectory sampling and dataset files.

Dataset file layout::

    # env=objectworld seed=7 policy=greedy
    episode,t,s,a,s_next
    0,0,12,3,13
    ...

Pendulum rows are ``episode,t,cos,sin,thdot,a,cos_next,sin_next,thdot_next``.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .mdp import boltzmann_policy, greedy_policy, policy_matrix, value_iteration

OBJECTWORLD_COLUMNS = ("episode", "t", "s", "a", "s_next")
PENDULUM_COLUMNS = ("episode", "t", "cos", "sin", "thdot", "a", "cos_next", "sin_next", "thdot_next")
ENVS = ("objectworld", "pendulum")


@dataclass
class Trajectory:
    """Steps ``(states[t], actions[t], next_states[t])``.

    States are integer ids (objectworld) or rows of ``(cos, sin, thdot)``.
    """

    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray

    def __len__(self):
        return len(self.actions)

    def is_chained(self) -> bool:
        return bool(np.array_equal(self.next_states[:-1], self.states[1:]))


@dataclass
class Dataset:
    env: str
    seed: int
    trajectories: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.env not in ENVS:
            raise ValidationError(f"unknown env tag {self.env!r}")

    def validate(self):
        if not self.trajectories or any(len(t) == 0 for t in self.trajectories):
            raise ValidationError("dataset must hold at least one non-empty trajectory")
        for i, traj in enumerate(self.trajectories):
            if not traj.is_chained():
                raise ValidationError(f"trajectory {i} breaks the chaining invariant")

    def transitions(self):
        """All steps stacked as ``(states, actions, next_states)`` arrays."""
        s = np.concatenate([t.states for t in self.trajectories])
        a = np.concatenate([t.actions for t in self.trajectories])
        s2 = np.concatenate([t.next_states for t in self.trajectories])
        return s, a, s2

    def start_states(self):
        return np.array([t.states[0] for t in self.trajectories])

    def save(self, path):
        """Write the dataset; rejects empty or broken datasets."""
        self.validate()
        header = {"env": self.env, "seed": self.seed, **self.meta}
        for k, v in header.items():
            if " " in str(k) or " " in str(v) or "=" in str(k):
                raise ValidationError(f"metadata {k}={v} cannot contain spaces")
        lines = ["# " + " ".join(f"{k}={v}" for k, v in header.items())]
        if self.env == "objectworld":
            lines.append(",".join(OBJECTWORLD_COLUMNS))
            for e, tr in enumerate(self.trajectories):
                for t in range(len(tr)):
                    lines.append(f"{e},{t},{int(tr.states[t])},{int(tr.actions[t])},{int(tr.next_states[t])}")
        else:
            lines.append(",".join(PENDULUM_COLUMNS))
            for e, tr in enumerate(self.trajectories):
                for t in range(len(tr)):
                    s = ",".join(f"{v:.17g}" for v in tr.states[t])
                    s2 = ",".join(f"{v:.17g}" for v in tr.next_states[t])
                    lines.append(f"{e},{t},{s},{int(tr.actions[t])},{s2}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "Dataset":
        lines = Path(path).read_text().splitlines()
        if not lines or not lines[0].startswith("#"):
            raise ParseError("missing '# env=... seed=...' header", 1)
        header = {}
        for tok in lines[0][1:].split():
            if "=" not in tok:
                raise ParseError(f"bad header token {tok!r}", 1)
            k, v = tok.split("=", 1)
            header[k] = v
        try:
            env = header.pop("env")
            seed = int(header.pop("seed"))
        except (KeyError, ValueError):
            raise ParseError("header needs env=<name> and integer seed=<n>", 1) from None
        if env not in ENVS:
            raise ParseError(f"unknown env {env!r}", 1)
        columns = OBJECTWORLD_COLUMNS if env == "objectworld" else PENDULUM_COLUMNS
        if len(lines) < 2 or tuple(lines[1].split(",")) != columns:
            raise ParseError(f"expected column header {','.join(columns)}", 2)

        episodes = {}
        prev = None  # (episode, t, next_state) of the previous row
        for lineno, line in enumerate(lines[2:], start=3):
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) != len(columns):
                raise ParseError(f"expected {len(columns)} fields, got {len(parts)}", lineno)
            try:
                e, t = int(parts[0]), int(parts[1])
                if env == "objectworld":
                    s, a, s2 = int(parts[2]), int(parts[3]), int(parts[4])
                else:
                    s = np.array([float(v) for v in parts[2:5]])
                    a = int(parts[5])
                    s2 = np.array([float(v) for v in parts[6:9]])
            except ValueError:
                raise ParseError(f"malformed value in {line!r}", lineno) from None
            if prev is not None and prev[0] == e:
                if t != prev[1] + 1:
                    raise ParseError(f"step index {t} does not follow {prev[1]}", lineno)
                if not np.array_equal(prev[2], s):
                    raise ParseError("state does not match previous step's next state", lineno)
            elif t != 0:
                raise ParseError(f"episode {e} does not start at t=0", lineno)
            elif e in episodes:
                raise ParseError(f"episode {e} is not contiguous", lineno)
            episodes.setdefault(e, []).append((s, a, s2))
            prev = (e, t, s2)
        if not episodes:
            raise ParseError("dataset has no rows", len(lines))

        trajectories = []
        for e in sorted(episodes):
            steps = episodes[e]
            trajectories.append(Trajectory(
                np.array([st[0] for st in steps]),
                np.array([st[1] for st in steps], dtype=int),
                np.array([st[2] for st in steps]),
            ))
        return cls(env, seed, trajectories, header)


def expert_policy_objectworld(mdp, true_reward, kind="greedy", temperature=0.5, tol=1e-6):
    """Optimal expert under the true reward.

    Returns an integer action per state (``kind="greedy"``) or an ``(S, A)``
    Boltzmann matrix (``kind="boltzmann"``).
    """
    _, q = value_iteration(mdp, true_reward, tol)
    if kind == "greedy":
        return greedy_policy(q)
    if kind == "boltzmann":
        return boltzmann_policy(q, temperature)
    raise ValidationError(f"unknown expert kind {kind!r}")


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for trajectory ``index`` of a run seeded ``seed``."""
    return np.random.default_rng([seed, index])


def sample_trajectories(env, policy, count: int, length: int, seed: int, start=None,
                        meta=None) -> Dataset:
    """Roll out ``policy`` in ``env``.

    Args:
        env: An ``Objectworld`` or ``Pendulum``.
        policy: For objectworld, an action per state or an ``(S, A)``
            matrix. For pendulum, a callable ``state -> action index``.
        count: Number of trajectories.
        length: Steps per trajectory.
        seed: Base seed; trajectory ``i`` uses ``trajectory_rng(seed, i)``.
        start: Optional fixed start state.
        meta: Extra header metadata.
    """
    if count < 1 or length < 1:
        raise ValidationError("count and length must be at least 1")
    trajectories = []
    if env.name == "objectworld":
        p = env.mdp.transition
        S, A = env.mdp.num_states, env.mdp.num_actions
        pi = policy_matrix(policy, S, A)
        cdf_p = np.cumsum(p, axis=2)
        cdf_pi = np.cumsum(pi, axis=1)
        for i in range(count):
            rng = trajectory_rng(seed, i)
            s = int(rng.integers(S)) if start is None else int(start)
            states, actions, nexts = [], [], []
            for _ in range(length):
                a = min(int(np.searchsorted(cdf_pi[s], rng.random(), side="right")), A - 1)
                s2 = min(int(np.searchsorted(cdf_p[s, a], rng.random(), side="right")), S - 1)
                states.append(s)
                actions.append(a)
                nexts.append(s2)
                s = s2
            trajectories.append(Trajectory(np.array(states), np.array(actions), np.array(nexts)))
    elif env.name == "pendulum":
        for i in range(count):
            rng = trajectory_rng(seed, i)
            s = env.reset(rng) if start is None else np.asarray(start, dtype=float)
            states, actions, nexts = [], [], []
            for _ in range(length):
                a = int(policy(s))
                s2 = env.step(s, a)
                states.append(s)
                actions.append(a)
                nexts.append(s2)
                s = s2
            trajectories.append(Trajectory(np.array(states), np.array(actions), np.array(nexts)))
    else:
        raise ValidationError(f"unsupported env {env!r}")
    return Dataset(env.name, seed, trajectories, {k: str(v) for k, v in (meta or {}).items()})
