"""Versioned plain-text checkpoints with bit-exact float round-trips.

Layout, one record per line::

    qsagent-checkpoint
    format_version 1
    config <key> <value>
    scalar <name> <value>
    array <name> <dtype> <ndim> <dim...> <values...>
    end <record count>

Floats are written as ``float.hex`` so every bit survives.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from qsagent import nn
from qsagent.agent import ActorCriticAgent
from qsagent.config import TrainConfig, format_value, from_pairs
from qsagent.envmodel import EnvNet
from qsagent.errors import (CorruptCheckpointError, TruncatedCheckpointError,
                            VersionMismatchError)
from qsagent.qs import TransitionMemory

MAGIC = "qsagent-checkpoint"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    config: TrainConfig
    episode_index: int
    agent: ActorCriticAgent
    envnet: EnvNet
    memory: TransitionMemory
    format_version: int = FORMAT_VERSION

    @property
    def master_seed(self) -> int:
        return self.config.master_seed

    def to_text(self) -> str:
        return dumps(self)

    def digest(self) -> str:
        return hashlib.sha256(dumps(self).encode()).hexdigest()

    def __eq__(self, other) -> bool:
        return isinstance(other, Checkpoint) and dumps(self) == dumps(other)


def _fmt_float(x: float) -> str:
    return float(x).hex()


def _array_line(name: str, a: np.ndarray) -> str:
    a = np.asarray(a)
    if a.dtype.kind == "f":
        vals = " ".join(_fmt_float(v) for v in a.ravel().tolist())
        dtype = "f8"
    else:
        vals = " ".join(str(int(v)) for v in a.ravel().tolist())
        dtype = "i8"
    dims = " ".join(str(d) for d in a.shape)
    return f"array {name} {dtype} {a.ndim} {dims} {vals}".rstrip()


def _mlp_records(prefix: str, mlp: nn.Mlp, opt: nn.OptimizerState) -> list[str]:
    lines = [f"scalar {prefix}.head {mlp.head}",
             _array_line(f"{prefix}.layer_sizes", np.array(mlp.layer_sizes, dtype=np.int64)),
             f"scalar {prefix}.opt_steps {opt.step_count}"]
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        lines.append(_array_line(f"{prefix}.W{i}", w))
        lines.append(_array_line(f"{prefix}.b{i}", b))
    for i, (m, v) in enumerate(zip(opt.m, opt.v)):
        lines.append(_array_line(f"{prefix}.m{i}", m))
        lines.append(_array_line(f"{prefix}.v{i}", v))
    return lines


def dumps(ck: Checkpoint) -> str:
    lines = [MAGIC, f"format_version {ck.format_version}"]
    for key, value in ck.config.items():
        text = _fmt_float(value) if isinstance(value, float) else format_value(value)
        lines.append(f"config {key} {text}")
    lines.append(f"scalar episode_index {ck.episode_index}")
    lines.append(f"scalar gamma {_fmt_float(ck.agent.gamma)}")
    lines.append(f"scalar actor_base_lr {_fmt_float(ck.agent.base_lr)}")
    lines.append(f"scalar envnet_base_lr {_fmt_float(ck.envnet.base_lr)}")
    lines.append(f"scalar envnet_target {ck.envnet.target}")
    lines += _mlp_records("actor", ck.agent.actor, ck.agent.actor_opt)
    lines += _mlp_records("critic", ck.agent.critic, ck.agent.critic_opt)
    lines += _mlp_records("envnet", ck.envnet.net, ck.envnet.opt)
    mem = ck.memory
    lines.append(f"scalar memory.match_threshold {_fmt_float(mem.match_threshold)}")
    lines.append(f"scalar memory.next_id {mem.next_id}")
    lines.append(_array_line("memory.ids", mem.ids))
    lines.append(_array_line("memory.raw", mem.raw))
    lines.append(_array_line("memory.values", mem.values))
    lines.append(_array_line("memory.hits", mem.hits))
    n_records = len(lines) - 1
    lines.append(f"end {n_records}")
    return "\n".join(lines) + "\n"


def save_checkpoint(path, ck: Checkpoint) -> Path:
    path = Path(path)
    path.write_text(dumps(ck))
    return path


def _parse_array(parts: list[str]):
    dtype, ndim = parts[0], int(parts[1])
    shape = tuple(int(d) for d in parts[2 : 2 + ndim])
    vals = parts[2 + ndim :]
    size = int(np.prod(shape)) if shape else 1
    if len(vals) != size:
        raise CorruptCheckpointError(f"array expects {size} values, found {len(vals)}")
    if dtype == "f8":
        a = np.array([float.fromhex(v) for v in vals], dtype=np.float64)
    elif dtype == "i8":
        a = np.array([int(v) for v in vals], dtype=np.int64)
    else:
        raise CorruptCheckpointError(f"unknown dtype {dtype!r}")
    return a.reshape(shape)


def loads(text: str) -> Checkpoint:
    lines = text.split("\n")
    if MAGIC.startswith(lines[0]) and lines[0] != MAGIC and len(lines) == 1:
        raise TruncatedCheckpointError("checkpoint ends inside the header")
    if lines[0] != MAGIC:
        raise CorruptCheckpointError("not a qsagent checkpoint (bad header)")
    if len(lines) < 2 or not lines[1].startswith("format_version "):
        raise TruncatedCheckpointError("checkpoint ends before the version record")
    try:
        version = int(lines[1].split()[1])
    except (IndexError, ValueError):
        raise CorruptCheckpointError("unreadable format_version") from None
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"checkpoint format {version}, expected {FORMAT_VERSION}")

    body = [ln for ln in lines[1:] if ln != ""]
    if not body[-1].startswith("end "):
        raise TruncatedCheckpointError("checkpoint has no end record (truncated?)")
    try:
        expected = int(body[-1].split()[1])
    except (IndexError, ValueError):
        raise CorruptCheckpointError("unreadable end record") from None
    if expected != len(body) - 1:
        raise TruncatedCheckpointError(
            f"checkpoint has {len(body) - 1} records, end record says {expected}")

    config_pairs, scalars, arrays = [], {}, {}
    try:
        for ln in body[1:-1]:
            kind, name, *rest = ln.split(" ")
            if kind == "config":
                config_pairs.append((name, rest[0]))
            elif kind == "scalar":
                scalars[name] = rest[0]
            elif kind == "array":
                arrays[name] = _parse_array(rest)
            else:
                raise CorruptCheckpointError(f"unknown record kind {kind!r}")
        config = from_pairs(config_pairs)

        def mlp(prefix):
            sizes = [int(s) for s in arrays[f"{prefix}.layer_sizes"]]
            n = len(sizes) - 1
            net = nn.Mlp(sizes, [arrays[f"{prefix}.W{i}"] for i in range(n)],
                         [arrays[f"{prefix}.b{i}"] for i in range(n)], scalars[f"{prefix}.head"])
            opt = nn.OptimizerState(
                [arrays[f"{prefix}.m{i}"] for i in range(2 * n)],
                [arrays[f"{prefix}.v{i}"] for i in range(2 * n)],
                int(scalars[f"{prefix}.opt_steps"]))
            for p, m in zip(net.params(), opt.m):
                if p.shape != m.shape:
                    raise CorruptCheckpointError(f"{prefix}: optimizer/weight shape mismatch")
            return net, opt

        actor, actor_opt = mlp("actor")
        critic, critic_opt = mlp("critic")
        env_net, env_opt = mlp("envnet")
        agent = ActorCriticAgent(actor, critic, actor_opt, critic_opt,
                                 float.fromhex(scalars["actor_base_lr"]),
                                 float.fromhex(scalars["gamma"]))
        envnet = EnvNet(env_net, env_opt, float.fromhex(scalars["envnet_base_lr"]),
                        scalars["envnet_target"])
        memory = TransitionMemory.from_arrays(
            float.fromhex(scalars["memory.match_threshold"]),
            arrays["memory.ids"], arrays["memory.raw"], arrays["memory.values"],
            arrays["memory.hits"], int(scalars["memory.next_id"]))
        episode_index = int(scalars["episode_index"])
    except CorruptCheckpointError:
        raise
    except (KeyError, ValueError, IndexError, TypeError) as exc:
        raise CorruptCheckpointError(f"malformed checkpoint: {exc}") from None
    return Checkpoint(config, episode_index, agent, envnet, memory, version)


def load_checkpoint(path) -> Checkpoint:
    try:
        text = Path(path).read_text()
    except UnicodeDecodeError:
        raise CorruptCheckpointError(f"{path}: not a text checkpoint") from None
    return loads(text)
