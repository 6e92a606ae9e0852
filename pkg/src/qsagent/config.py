"""Training configuration and its flat ``key = value`` file format."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np

from qsagent.lander import EnvConfig

ENV_PREFIX = "env."

# stream tags for derived seeds
STREAM_INIT = 1
STREAM_TRAIN_ENV = 2
STREAM_TRAIN_POLICY = 3
STREAM_EVAL = 4


@dataclass
class TrainConfig:
    episodes: int = 1500
    eval_every: int = 1000
    master_seed: int = 0
    gamma: float = 0.99
    actor_lr: float = 0.003
    critic_lr: float = 0.003
    envnet_lr: float = 0.05
    envnet_target: str = "absolute"
    theta_match: float = 0.97
    alpha: float = 0.1
    L_max: int = 10
    n_plans: int = 5
    env: EnvConfig = field(default_factory=EnvConfig)

    def __post_init__(self):
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.L_max < 1 or self.n_plans < 1:
            raise ValueError("L_max and n_plans must be >= 1")
        if self.envnet_target not in ("absolute", "delta"):
            raise ValueError("envnet_target must be 'absolute' or 'delta'")

    @classmethod
    def paper_scale(cls, **overrides) -> "TrainConfig":
        return cls(**{"episodes": 5000, **overrides})

    def items(self) -> list[tuple[str, object]]:
        """All fields flattened, env overrides prefixed with ``env.``."""
        out = [(f.name, getattr(self, f.name)) for f in fields(self) if f.name != "env"]
        out += [(ENV_PREFIX + f.name, getattr(self.env, f.name)) for f in fields(EnvConfig)]
        return out

    def with_updates(self, **kw) -> "TrainConfig":
        return replace(self, **kw)


def _field_types(cls) -> dict:
    defaults = cls()
    return {f.name: type(getattr(defaults, f.name)) for f in fields(cls)}


_TRAIN_TYPES = {k: v for k, v in _field_types(TrainConfig).items() if k != "env"}
_ENV_TYPES = _field_types(EnvConfig)


def _coerce(kind, key: str, text: str):
    try:
        if kind is int:
            return int(text)
        if kind is float:
            return float.fromhex(text) if text.lower().startswith(("0x", "-0x")) else float(text)
    except ValueError:
        raise ValueError(f"bad value for {key}: {text!r}") from None
    return text


def from_pairs(pairs) -> TrainConfig:
    """Build a config from ``(key, text)`` pairs; unknown keys are rejected."""
    top, env = {}, {}
    for key, text in pairs:
        if key.startswith(ENV_PREFIX):
            name = key[len(ENV_PREFIX):]
            if name not in _ENV_TYPES:
                raise KeyError(f"unknown config key {key!r}")
            env[name] = _coerce(_ENV_TYPES[name], key, text)
        else:
            if key not in _TRAIN_TYPES:
                raise KeyError(f"unknown config key {key!r}")
            top[key] = _coerce(_TRAIN_TYPES[key], key, text)
    return TrainConfig(env=EnvConfig(**env), **top)


def parse_config(text: str) -> TrainConfig:
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        pairs.append((key, value))
    return from_pairs(pairs)


def load_config(path) -> TrainConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def format_value(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def dump_config(cfg: TrainConfig) -> str:
    return "".join(f"{k} = {format_value(v)}\n" for k, v in cfg.items())


def child_seed(master_seed: int, *keys: int) -> np.random.SeedSequence:
    """Counter-style child seed; adding new keys never shifts existing streams."""
    return np.random.SeedSequence([int(master_seed), *(int(k) for k in keys)])


def child_rng(master_seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(child_seed(master_seed, *keys))


def child_int(master_seed: int, *keys: int) -> int:
    return int(child_seed(master_seed, *keys).generate_state(1)[0])
