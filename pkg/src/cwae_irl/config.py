"""Sectioned ``key = value`` experiment configuration files.

Sections: ``[env]``, ``[expert]``, ``[method]``, ``[train]``. Unknown keys
are errors. ``[train]`` keys are the fields of the selected method's
config dataclass. Missing seeds default to the run's global seed.
"""

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .baselines.birl import BirlConfig
from .baselines.maxent import DeepMaxEntConfig, MaxEntConfig
from .cwae import CwaeTrainConfig
from .dqn import DqnConfig
from .envs.objectworld import ObjectworldSpec
from .envs.pendulum import PendulumSpec
from .errors import ParseError, ValidationError

METHODS = ("cwae", "maxent", "deep-maxent", "birl")
TRAIN_CONFIGS = {"cwae": CwaeTrainConfig, "maxent": MaxEntConfig,
                 "deep-maxent": DeepMaxEntConfig, "birl": BirlConfig}
SECTIONS = ("env", "expert", "method", "train")


@dataclass(frozen=True)
class ExpertConfig:
    count: int | None = None  # None -> 128 objectworld, 25 pendulum
    length: int | None = None  # None -> 16 objectworld, PendulumSpec.episode_len
    heldout: int = 5  # pendulum evaluation trajectories
    policy: str = "greedy"
    temperature: float = 0.5
    seed: int | None = None
    dqn: DqnConfig = field(default_factory=DqnConfig)


@dataclass(frozen=True)
class ExperimentConfig:
    env_name: str = "objectworld"
    env: object = field(default_factory=ObjectworldSpec)
    expert: ExpertConfig = field(default_factory=ExpertConfig)
    method: str = "cwae"
    extraction: str = "probe"
    train: object = field(default_factory=CwaeTrainConfig)
    window: int = 25
    seed: int = 0

    def __post_init__(self):
        if self.env_name not in ("objectworld", "pendulum"):
            raise ValidationError(f"unknown env {self.env_name!r}")
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}")
        if self.env_name == "pendulum" and self.method != "cwae":
            raise ValidationError("baselines need a tabular env; pendulum supports method=cwae only")

    @property
    def expert_seed(self) -> int:
        return self.seed if self.expert.seed is None else self.expert.seed


def _coerce(text: str, default, annotation):
    """Convert a config string to the type of a dataclass field."""
    text = text.strip()
    kind = type(default)
    if isinstance(default, tuple):
        return tuple(type(default[0])(v) if default else float(v)
                     for v in text.replace(",", " ").split())
    if isinstance(default, bool):
        if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"not a boolean: {text!r}")
        return text.lower() in ("true", "1", "yes")
    if default is None or isinstance(default, str):
        if text.lower() == "none":
            return None
        for conv in (int, float):
            try:
                return conv(text)
            except ValueError:
                pass
        return text
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    return text


def _apply(obj, items: dict, section: str, prefix=""):
    known = {f.name: f for f in fields(obj)}
    updates = {}
    for key, text in items.items():
        name = key[len(prefix):] if prefix else key
        if name not in known:
            raise ParseError(f"unknown key {key!r} in [{section}]")
        try:
            updates[name] = _coerce(text, getattr(obj, name), known[name].type)
        except ValueError as exc:
            raise ParseError(f"[{section}] {key}: {exc}") from None
    try:
        return replace(obj, **updates)
    except ValidationError as exc:
        raise ParseError(f"[{section}] {exc}") from None


def parse_config(text: str, seed: int | None = None, env_override: str | None = None) -> ExperimentConfig:
    """Parse a config file body; ``seed``/``env_override`` mirror CLI flags."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ParseError(str(exc)) from None
    for sec in cp.sections():
        if sec not in SECTIONS:
            raise ParseError(f"unknown section [{sec}]")
    sec = {name: dict(cp[name]) if cp.has_section(name) else {} for name in SECTIONS}

    env_items = dict(sec["env"])
    env_name = env_override or env_items.pop("name", "objectworld")
    env_items.pop("name", None)
    method_items = dict(sec["method"])
    method = method_items.pop("name", "cwae")
    extraction = method_items.pop("extraction", "probe")
    window = int(method_items.pop("window", 25))
    file_seed = int(method_items.pop("seed", 0))
    global_seed = file_seed if seed is None else seed
    if method_items:
        raise ParseError(f"unknown key(s) {sorted(method_items)} in [method]")
    if method not in METHODS:
        raise ParseError(f"unknown method {method!r}")
    if extraction not in ("probe", "dataset-average"):
        raise ParseError(f"unknown extraction mode {extraction!r}")

    if env_name == "objectworld":
        env = _apply(ObjectworldSpec(placement_seed=global_seed), env_items, "env")
    elif env_name == "pendulum":
        env = _apply(PendulumSpec(), env_items, "env")
    else:
        raise ParseError(f"unknown env {env_name!r}")

    expert_items = dict(sec["expert"])
    dqn_items = {k: v for k, v in expert_items.items() if k.startswith("dqn_")}
    for k in dqn_items:
        expert_items.pop(k)
    expert = _apply(ExpertConfig(), expert_items, "expert")
    dqn = _apply(replace(expert.dqn, seed=expert.seed if expert.seed is not None else global_seed),
                 dqn_items, "expert", prefix="dqn_")
    expert = replace(expert, dqn=dqn)

    base = TRAIN_CONFIGS[method]()
    if "seed" in {f.name for f in fields(base)}:
        base = replace(base, seed=global_seed)
    train = _apply(base, sec["train"], "train")
    try:
        return ExperimentConfig(env_name, env, expert, method, extraction, train, window, global_seed)
    except ValidationError as exc:
        raise ParseError(str(exc)) from None


def load_config(path, seed=None, env_override=None) -> ExperimentConfig:
    return parse_config(Path(path).read_text(), seed, env_override)


def dump_config(cfg: ExperimentConfig) -> str:
    """Render a fully-resolved config that ``parse_config`` reads back."""

    def fmt(v):
        return " ".join(map(str, v)) if isinstance(v, tuple) else str(v)

    lines = ["[env]", f"name = {cfg.env_name}"]
    lines += [f"{f.name} = {fmt(getattr(cfg.env, f.name))}" for f in fields(cfg.env)]
    lines += ["", "[expert]"]
    for f in fields(cfg.expert):
        if f.name == "dqn":
            continue
        lines.append(f"{f.name} = {fmt(getattr(cfg.expert, f.name))}")
    if cfg.env_name == "pendulum":
        lines += [f"dqn_{f.name} = {fmt(getattr(cfg.expert.dqn, f.name))}" for f in fields(cfg.expert.dqn)]
    lines += ["", "[method]", f"name = {cfg.method}", f"extraction = {cfg.extraction}",
              f"window = {cfg.window}", f"seed = {cfg.seed}", "", "[train]"]
    lines += [f"{f.name} = {fmt(getattr(cfg.train, f.name))}" for f in fields(cfg.train)]
    return "\n".join(lines) + "\n"
