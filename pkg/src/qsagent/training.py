"""Joint training of the actor-critic agent, dynamics model and QS memory."""

from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np

from qsagent import qs
from qsagent.agent import ActorCriticAgent, lr_at, run_episode, update
from qsagent.checkpoint import Checkpoint, save_checkpoint
from qsagent.config import (STREAM_INIT, STREAM_TRAIN_ENV, STREAM_TRAIN_POLICY,
                            TrainConfig, child_int, child_rng)
from qsagent.envmodel import EnvNet
from qsagent.errors import DivergenceError
from qsagent.lander import LanderEnv

log = logging.getLogger(__name__)

TRAINING_COLUMNS = ["episode", "total_reward", "env_model_mse", "lr_actor", "lr_envnet",
                    "qs_node_count"]


def checkpoint_name(episode: int) -> str:
    return f"checkpoint_{episode:06d}.txt"


def _fresh_state(cfg: TrainConfig):
    agent = ActorCriticAgent.create(child_rng(cfg.master_seed, STREAM_INIT, 0),
                                    cfg.actor_lr, cfg.gamma)
    envnet = EnvNet.create(child_rng(cfg.master_seed, STREAM_INIT, 1), cfg.envnet_lr,
                           target=cfg.envnet_target)
    return agent, envnet


def train_episode_seed(cfg: TrainConfig, episode: int) -> int:
    return child_int(cfg.master_seed, STREAM_TRAIN_ENV, episode)


def train(cfg: TrainConfig, out_dir=None, extra_memories: Optional[List[qs.TransitionMemory]] = None,
          progress: Optional[Callable[[dict], None]] = None) -> List[Checkpoint]:
    """Train for ``cfg.episodes`` episodes and return the periodic checkpoints.

    A checkpoint is taken every ``cfg.eval_every`` episodes and after the
    last episode. With ``out_dir`` the checkpoints, ``training.csv`` and the
    config are written there as training proceeds.

    ``extra_memories`` are fed the same transition stream as the main
    memory (used to build memories at other matching thresholds without
    changing anything else about the run).
    """
    agent, envnet = _fresh_state(cfg)
    memory = qs.TransitionMemory(cfg.theta_match)
    memories = [memory] + list(extra_memories or [])
    env = LanderEnv(cfg.env)

    def qs_observer(s, a, r, s2):
        d = s2 - s
        for m in memories:
            qs.observe(m, d, r)

    def model_observer(s, a, r, s2):
        envnet.observe_step(s, a, s2)

    out = Path(out_dir) if out_dir is not None else None
    writer = fh = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        fh = open(out / "training.csv", "w", newline="")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRAINING_COLUMNS)

    checkpoints = []
    try:
        for ep in range(cfg.episodes):
            env.reset(train_episode_seed(cfg, ep))
            rng = child_rng(cfg.master_seed, STREAM_TRAIN_POLICY, ep)
            lr_actor = lr_at(cfg.actor_lr, ep)
            lr_env = lr_at(cfg.envnet_lr, ep)
            try:
                trace = run_episode(env, agent, rng, [qs_observer, model_observer])
                update(agent, trace, lr_actor, lr_at(cfg.critic_lr, ep))
                mse = envnet.end_episode_update(ep)
            except DivergenceError as exc:
                raise DivergenceError(f"training diverged at episode {ep + 1}: {exc}") from exc
            row = {"episode": ep + 1, "total_reward": trace.total_reward, "env_model_mse": mse,
                   "lr_actor": lr_actor, "lr_envnet": lr_env, "qs_node_count": len(memory)}
            if writer is not None:
                writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c]
                                 for c in TRAINING_COLUMNS])
            if progress is not None:
                progress(row)
            done = ep + 1
            if done % cfg.eval_every == 0 or done == cfg.episodes:
                ck = Checkpoint(cfg, done, _copy_agent(agent), _copy_envnet(envnet), memory.copy())
                checkpoints.append(ck)
                if out is not None:
                    fh.flush()
                    save_checkpoint(out / checkpoint_name(done), ck)
                log.info("episode %d: checkpoint, %d QS nodes", done, len(memory))
    finally:
        if fh is not None:
            fh.close()
    return checkpoints


def replay_memory(cfg: TrainConfig, episodes: int, theta_match: float) -> qs.TransitionMemory:
    """Rebuild the QS memory at another matching threshold by re-running training.

    Training is deterministic and the memory never feeds back into the agent,
    so the replayed run sees exactly the original transition stream.
    """
    memory = qs.TransitionMemory(theta_match)
    train(cfg.with_updates(episodes=episodes, eval_every=episodes), extra_memories=[memory])
    return memory


def _copy_agent(a: ActorCriticAgent) -> ActorCriticAgent:
    return ActorCriticAgent(a.actor.copy(), a.critic.copy(), a.actor_opt.copy(),
                            a.critic_opt.copy(), a.base_lr, a.gamma)


def _copy_envnet(e: EnvNet) -> EnvNet:
    return EnvNet(e.net.copy(), e.opt.copy(), e.base_lr, e.target)


def read_training_csv(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {c: np.array([float(r[c]) for r in rows]) for c in TRAINING_COLUMNS}
