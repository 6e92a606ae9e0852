"""Actor-critic baseline trained once per episode on normalized returns."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, List

import numpy as np

from qsagent import nn
from qsagent.errors import DivergenceError
from qsagent.lander import N_ACTIONS, STATE_DIM, LanderEnv

# observer(state, action, reward, next_state)
Observer = Callable[[np.ndarray, int, float, np.ndarray], None]


@dataclass
class ActorCriticAgent:
    actor: nn.Mlp
    critic: nn.Mlp
    actor_opt: nn.OptimizerState
    critic_opt: nn.OptimizerState
    base_lr: float = 0.003
    gamma: float = 0.99

    @classmethod
    def create(cls, rng: np.random.Generator, base_lr: float = 0.003, gamma: float = 0.99,
               hidden: int = 100) -> "ActorCriticAgent":
        actor = nn.init_mlp([STATE_DIM, hidden, N_ACTIONS], nn.SIMPLEX, rng)
        critic = nn.init_mlp([STATE_DIM, hidden, 1], nn.LINEAR, rng)
        return cls(actor, critic, nn.OptimizerState.for_mlp(actor),
                   nn.OptimizerState.for_mlp(critic), base_lr, gamma)

    def action_probs(self, states) -> np.ndarray:
        return nn.predict(self.actor, states)


@dataclass
class EpisodeTrace:
    states: List[np.ndarray] = field(default_factory=list)
    actions: List[int] = field(default_factory=list)
    log_probs: List[float] = field(default_factory=list)
    values: List[float] = field(default_factory=list)
    rewards: List[float] = field(default_factory=list)
    next_states: List[np.ndarray] = field(default_factory=list)
    outcome: str = "running"
    plans: list = field(default_factory=list)  # filled by the QS agent only

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def total_reward(self) -> float:
        return float(sum(self.rewards))


def sample_action(probs: np.ndarray, u: float) -> int:
    """Inverse-CDF draw from a 4-way distribution given a uniform ``u``."""
    a = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    return min(a, len(probs) - 1)


def select_action(agent: ActorCriticAgent, state, rng: np.random.Generator):
    """Sample from the policy. Returns ``(action, log_prob, value_estimate)``."""
    probs = nn.predict(agent.actor, state)
    value = nn.predict(agent.critic, state)[0]
    if not (np.isfinite(probs).all() and np.isfinite(value)):
        raise DivergenceError("actor or critic produced non-finite output")
    a = sample_action(probs, rng.random())
    return a, float(np.log(probs[a])), float(value)


def compute_returns(rewards: Iterable[float], gamma: float) -> np.ndarray:
    r = np.asarray(list(rewards), dtype=np.float64)
    out = np.empty_like(r)
    acc = 0.0
    for t in range(len(r) - 1, -1, -1):
        acc = r[t] + gamma * acc
        out[t] = acc
    return out


def normalize_returns(returns) -> np.ndarray:
    """Standardize with the sample std; a single return maps to 0."""
    R = np.asarray(returns, dtype=np.float64)
    if R.size < 2:
        return np.zeros_like(R)
    return (R - R.mean()) / (R.std(ddof=1) + 1e-8)


def lr_at(base_lr: float, episode_index: int) -> float:
    """Step schedule: divide by 10 every 1000 episodes."""
    if episode_index < 0:
        raise ValueError("episode_index must be non-negative")
    return base_lr * 0.1 ** (episode_index // 1000)


def policy_loss_grad(probs: np.ndarray, actions: np.ndarray, advantages: np.ndarray):
    """Loss sum_t -log pi(a_t|s_t) * A_t and its gradient w.r.t. the probabilities."""
    idx = np.arange(len(actions))
    p_taken = probs[idx, actions]
    loss = float(-(np.log(p_taken) * advantages).sum())
    grad = np.zeros_like(probs)
    grad[idx, actions] = -advantages / p_taken
    return loss, grad


def update(agent: ActorCriticAgent, trace: EpisodeTrace, lr: float,
           critic_lr: float | None = None) -> tuple[float, float]:
    """One actor step and one critic step from a finished episode.

    The advantage ``r'(t) - V(s_t)`` is held constant in the actor term; the
    critic regresses onto ``r'(t)`` with squared error. ``critic_lr``
    defaults to ``lr``.

    Returns:
        ``(policy_loss, value_loss)`` evaluated before the step.
    """
    if len(trace) == 0:
        raise ValueError("cannot update from an empty trace")
    states = np.asarray(trace.states)
    actions = np.asarray(trace.actions, dtype=np.int64)
    target = normalize_returns(compute_returns(trace.rewards, agent.gamma))

    probs, a_cache = nn.forward(agent.actor, states)
    values, c_cache = nn.forward(agent.critic, states)
    values = values[:, 0]
    adv = target - values
    policy_loss, p_grad = policy_loss_grad(probs, actions, adv)
    value_loss = float(((values - target) ** 2).sum())
    if not (np.isfinite(policy_loss) and np.isfinite(value_loss)):
        raise DivergenceError("non-finite actor-critic loss")

    a_grads = nn.backward(agent.actor, a_cache, p_grad)
    c_grads = nn.backward(agent.critic, c_cache, (2.0 * (values - target))[:, None])
    nn.optimizer_step(agent.actor, a_grads, agent.actor_opt, lr)
    nn.optimizer_step(agent.critic, c_grads, agent.critic_opt, lr if critic_lr is None else critic_lr)
    return policy_loss, value_loss


def run_episode(env: LanderEnv, agent: ActorCriticAgent, rng: np.random.Generator,
                observers: Iterable[Observer] = ()) -> EpisodeTrace:
    """Play one episode with the stochastic policy from the env's current state."""
    observers = list(observers)
    trace = EpisodeTrace()
    state = env.state.copy()
    done = env.done
    while not done:
        a, logp, v = select_action(agent, state, rng)
        res = env.step(a)
        trace.states.append(state)
        trace.actions.append(a)
        trace.log_probs.append(logp)
        trace.values.append(v)
        trace.rewards.append(res.reward)
        trace.next_states.append(res.next_state)
        for obs in observers:
            obs(state, a, res.reward, res.next_state)
        state = res.next_state
        done = res.done
        trace.outcome = res.outcome
    return trace
