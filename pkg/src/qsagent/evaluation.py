"""Frozen-checkpoint evaluation of RL and QS agents, and parameter sweeps."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from qsagent import qs
from qsagent.agent import run_episode
from qsagent.checkpoint import Checkpoint
from qsagent.config import STREAM_EVAL, child_rng
from qsagent.lander import LanderEnv

EVAL_COLUMNS = ["env_id", "agent_seed", "agent_kind", "total_reward", "steps", "outcome"]
SWEEP_COLUMNS = ["parameter", "value", "mean_reward_qs", "stderr_qs", "mean_reward_rl",
                 "stderr_rl", "runs", "node_count", "hub_count", "memory"]
SWEEP_PARAMS = ("L_max", "alpha", "theta_match")
KINDS = ("rl", "qs")
_KIND_TAG = {"rl": 0, "qs": 1}

DEFAULT_ENV_SEED_BASE = 1_000_000
DEFAULT_AGENT_SEED_BASE = 0


@dataclass
class EvalRow:
    env_id: int
    agent_seed: int
    agent_kind: str
    total_reward: float
    steps: int
    outcome: str

    def as_csv(self) -> list:
        return [self.env_id, self.agent_seed, self.agent_kind, repr(self.total_reward),
                self.steps, self.outcome]


def mean_stderr(x: Sequence[float]) -> tuple[float, float]:
    x = np.asarray(x, dtype=np.float64)
    if len(x) == 0:
        return math.nan, math.nan
    se = float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
    return float(x.mean()), se


@dataclass
class EvalReport:
    rows: List[EvalRow]
    meta: Dict[str, object] = field(default_factory=dict)

    def rewards(self, kind: str) -> np.ndarray:
        return np.array([r.total_reward for r in self.rows if r.agent_kind == kind])

    def aggregate(self, kind: str) -> tuple[float, float]:
        """Mean and standard error of the total reward over all runs of ``kind``."""
        return mean_stderr(self.rewards(kind))

    def per_env_means(self, kind: str) -> np.ndarray:
        ids = sorted({r.env_id for r in self.rows})
        return np.array([np.mean([r.total_reward for r in self.rows
                                  if r.env_id == i and r.agent_kind == kind]) for i in ids])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(EVAL_COLUMNS)
            for r in self.rows:
                w.writerow(r.as_csv())


def run_one(ck: Checkpoint, kind: str, env_seed: int, env_id: int, agent_seed: int,
            memory: qs.TransitionMemory, hub_cfg: qs.HubConfig, L_max: int,
            n_plans: int) -> EvalRow:
    env = LanderEnv(ck.config.env)
    env.reset(env_seed)
    rng = child_rng(agent_seed, STREAM_EVAL, env_id, _KIND_TAG[kind])
    if kind == "rl":
        trace = run_episode(env, ck.agent, rng)
    else:
        trace = qs.qs_run_episode(memory, hub_cfg, env, ck.agent, ck.envnet, rng, L_max, n_plans)
    return EvalRow(env_id, agent_seed, kind, trace.total_reward, len(trace), trace.outcome)


def evaluate(ck: Checkpoint, n_envs: int = 30, n_agents: int = 5,
             env_seed_base: int = DEFAULT_ENV_SEED_BASE,
             agent_seed_base: int = DEFAULT_AGENT_SEED_BASE,
             L_max: Optional[int] = None, alpha: Optional[float] = None,
             n_plans: Optional[int] = None, memory: Optional[qs.TransitionMemory] = None,
             kinds: Iterable[str] = KINDS, out_csv=None) -> EvalReport:
    """Run every (env, agent seed, kind) triple on a frozen checkpoint.

    Environment ``i`` is reset with ``env_seed_base + i`` for every agent and
    both kinds. Each triple draws its actions from its own generator. Rows
    are appended to ``out_csv`` as they finish, in canonical order.
    """
    kinds = [k for k in KINDS if k in set(kinds)]
    if n_envs < 1 or n_agents < 1:
        raise ValueError("n_envs and n_agents must be positive")
    cfg = ck.config
    memory = ck.memory if memory is None else memory
    if "qs" in kinds and len(memory) == 0:
        raise ValueError("checkpoint has an empty QS memory")
    hub_cfg = qs.HubConfig(cfg.alpha if alpha is None else alpha)
    L_max = cfg.L_max if L_max is None else L_max
    n_plans = cfg.n_plans if n_plans is None else n_plans

    fh = writer = None
    if out_csv is not None:
        fh = open(out_csv, "w", newline="")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EVAL_COLUMNS)
    rows = []
    try:
        for env_id in range(n_envs):
            for j in range(n_agents):
                for kind in kinds:
                    row = run_one(ck, kind, env_seed_base + env_id, env_id, agent_seed_base + j,
                                  memory, hub_cfg, L_max, n_plans)
                    rows.append(row)
                    if writer is not None:
                        writer.writerow(row.as_csv())
                        fh.flush()
    finally:
        if fh is not None:
            fh.close()
    meta = {"episode_index": ck.episode_index, "L_max": L_max, "alpha": hub_cfg.alpha,
            "theta_match": memory.match_threshold, "n_envs": n_envs, "n_agents": n_agents,
            "env_seed_base": env_seed_base, "agent_seed_base": agent_seed_base,
            "node_count": len(memory),
            "hub_count": len(qs.hub_set(memory, hub_cfg)) if len(memory) else 0}
    return EvalReport(rows, meta)


@dataclass
class SweepReport:
    parameter: str
    rows: List[dict]
    reports: List[EvalReport]
    meta: Dict[str, object] = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SWEEP_COLUMNS)
            for r in self.rows:
                w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in SWEEP_COLUMNS])


def sweep(ck: Checkpoint, parameter: str, values: Sequence, n_envs: int = 30,
          n_agents: int = 5, env_seed_base: int = DEFAULT_ENV_SEED_BASE,
          agent_seed_base: int = DEFAULT_AGENT_SEED_BASE,
          memories: Optional[Dict[float, qs.TransitionMemory]] = None) -> SweepReport:
    """Evaluate the QS agent for each value of one parameter.

    ``L_max`` and ``alpha`` reuse the checkpoint memory. ``theta_match``
    needs a memory built at that threshold: taken from ``memories`` when
    supplied, otherwise rebuilt by replaying training. The RL baseline does
    not depend on the parameter and is evaluated once.
    """
    if parameter not in SWEEP_PARAMS:
        raise ValueError(f"unknown sweep parameter {parameter!r}; choose from {SWEEP_PARAMS}")
    values = list(values)
    if not values:
        raise ValueError("no sweep values given")
    from qsagent.training import replay_memory

    common = dict(n_envs=n_envs, n_agents=n_agents, env_seed_base=env_seed_base,
                  agent_seed_base=agent_seed_base)
    rl = evaluate(ck, kinds=("rl",), **common)
    rl_mean, rl_se = rl.aggregate("rl")
    retrained = parameter == "theta_match"
    rows, reports = [], []
    for v in values:
        kw = {}
        memory = ck.memory
        if parameter == "L_max":
            v = int(v)
            kw["L_max"] = v
        elif parameter == "alpha":
            v = float(v)
            kw["alpha"] = v
        else:
            v = float(v)
            if memories is not None and v in memories:
                memory = memories[v]
            elif v != ck.memory.match_threshold:
                memory = replay_memory(ck.config, ck.episode_index, v)
            kw["memory"] = memory
        rep = evaluate(ck, kinds=("qs",), **kw, **common)
        reports.append(rep)
        mean, se = rep.aggregate("qs")
        rows.append({"parameter": parameter, "value": v, "mean_reward_qs": mean,
                     "stderr_qs": se, "mean_reward_rl": rl_mean, "stderr_rl": rl_se,
                     "runs": len(rep.rows), "node_count": rep.meta["node_count"],
                     "hub_count": rep.meta["hub_count"],
                     "memory": "retrained-memory" if retrained else "checkpoint"})
    meta = {"parameter": parameter, "retrained-memory": retrained, **common}
    return SweepReport(parameter, rows, reports, meta)
