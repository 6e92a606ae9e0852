"""Quasi-symbolic agent: transition memory, hub states and rollout planning.

The memory stores unit-normalized state transitions ``dS = S' - S``. A query
activates the stored transition with the highest cosine similarity; if no
node reaches ``match_threshold`` the query is novel and becomes a new node.
Each node carries the sum of rewards observed for its transitions. Nodes whose
value exceeds ``mean + alpha * std`` are hubs, and the planner looks for
short action sequences that are predicted to reach one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from qsagent.agent import EpisodeTrace
from qsagent.errors import DivergenceError
from qsagent.lander import STATE_DIM

DEGENERATE_NORM = 1e-9


class Observation(NamedTuple):
    kind: str  # "added" or "updated"
    node: int


@dataclass
class HubConfig:
    alpha: float = 0.1


class TransitionMemory:
    """Grow-on-novelty store of transitions with one accumulated value per node.

    Node ids are stable: removing a node never renumbers the others.
    """

    def __init__(self, match_threshold: float = 0.97, capacity: int = 256):
        self.match_threshold = float(match_threshold)
        self._raw = np.empty((capacity, STATE_DIM))
        self._unit = np.empty((capacity, STATE_DIM))
        self._values = np.empty(capacity)
        self._hits = np.empty(capacity, dtype=np.int64)
        self._ids = np.empty(capacity, dtype=np.int64)
        self._n = 0
        self.next_id = 0

    def __len__(self) -> int:
        return self._n

    @property
    def raw(self) -> np.ndarray:
        return self._raw[: self._n]

    @property
    def units(self) -> np.ndarray:
        return self._unit[: self._n]

    @property
    def values(self) -> np.ndarray:
        return self._values[: self._n]

    @property
    def hits(self) -> np.ndarray:
        return self._hits[: self._n]

    @property
    def ids(self) -> np.ndarray:
        return self._ids[: self._n]

    def position(self, node: int) -> int:
        pos = int(np.searchsorted(self.ids, node))
        if pos >= self._n or self._ids[pos] != node:
            raise KeyError(f"no node with id {node}")
        return pos

    def _append(self, raw: np.ndarray, unit: np.ndarray, value: float, hits: int,
                node: Optional[int] = None) -> int:
        if self._n == len(self._values):
            cap = 2 * len(self._values)
            self._raw = _grow(self._raw, cap)
            self._unit = _grow(self._unit, cap)
            self._values = _grow(self._values, cap)
            self._hits = _grow(self._hits, cap)
            self._ids = _grow(self._ids, cap)
        if node is None:
            node = self.next_id
        elif self._n and node <= self._ids[self._n - 1]:
            raise ValueError("node ids must be increasing")
        i = self._n
        self._raw[i] = raw
        self._unit[i] = unit
        self._values[i] = value
        self._hits[i] = hits
        self._ids[i] = node
        self._n += 1
        self.next_id = max(self.next_id, node + 1)
        return node

    def copy(self) -> "TransitionMemory":
        m = TransitionMemory(self.match_threshold, max(len(self._values), 1))
        n = self._n
        for name in ("_raw", "_unit", "_values", "_hits", "_ids"):
            getattr(m, name)[:n] = getattr(self, name)[:n]
        m._n = n
        m.next_id = self.next_id
        return m

    @classmethod
    def from_arrays(cls, match_threshold: float, ids, raw, values, hits,
                    next_id: Optional[int] = None) -> "TransitionMemory":
        """Rebuild a memory from stored raw transitions (units are recomputed)."""
        raw = np.asarray(raw, dtype=np.float64).reshape(-1, STATE_DIM)
        m = cls(match_threshold, max(len(raw), 1))
        for node, r, v, h in zip(ids, raw, values, hits):
            d, unit = _unit(r)
            m._append(d.copy(), unit, float(v), int(h), int(node))
        if next_id is not None:
            m.next_id = max(m.next_id, int(next_id))
        return m

    # -- matching ---------------------------------------------------------

    def match_batch(self, deltas: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Best node position and cosine for each row; -1 / -inf when none.

        Degenerate rows never match.
        """
        deltas = np.atleast_2d(np.asarray(deltas, dtype=np.float64))
        norms = np.sqrt(_dot(deltas, deltas))
        pos = np.full(len(deltas), -1, dtype=np.int64)
        best = np.full(len(deltas), -np.inf)
        ok = norms >= DEGENERATE_NORM
        if self._n == 0 or not ok.any():
            return pos, best
        q = deltas[ok] / norms[ok, None]
        h = _dot(q[:, None, :], self.units[None, :, :])
        arg = h.argmax(axis=1)
        pos[ok] = arg
        best[ok] = h[np.arange(len(arg)), arg]
        return pos, best


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Dot product over the last axis, accumulated in component order.

    Every entry is rounded identically whatever the array shapes, so a
    node's similarity does not depend on how many other nodes are stored
    (BLAS products give no such guarantee).
    """
    out = a[..., 0] * b[..., 0]
    for k in range(1, a.shape[-1]):
        out = out + a[..., k] * b[..., k]
    return out


def _grow(a: np.ndarray, cap: int) -> np.ndarray:
    out = np.empty((cap,) + a.shape[1:], dtype=a.dtype)
    out[: len(a)] = a
    return out


def _unit(delta) -> Tuple[np.ndarray, np.ndarray]:
    d = np.asarray(delta, dtype=np.float64).reshape(STATE_DIM)
    norm = math.sqrt(float(_dot(d, d)))
    if norm < DEGENERATE_NORM:
        raise ValueError("degenerate transition (zero vector)")
    return d, d / norm


def is_degenerate(delta) -> bool:
    d = np.asarray(delta, dtype=np.float64)
    return math.sqrt(float(_dot(d, d))) < DEGENERATE_NORM


def similarity(memory: TransitionMemory, delta):
    """Cosine similarity of ``delta`` to every stored transition.

    Returns:
        ``(best_node, best_h, all_h)``; ``best_node`` is None and ``best_h``
        is -inf on an empty memory. Ties go to the oldest node.

    Raises:
        ValueError: for a degenerate (zero) transition.
    """
    _, q = _unit(delta)
    if len(memory) == 0:
        return None, -math.inf, np.empty(0)
    h = _dot(memory.units, q)
    i = int(h.argmax())
    return int(memory.ids[i]), float(h[i]), h


def observe(memory: TransitionMemory, delta, reward: float) -> Optional[Observation]:
    """Store a transition or add ``reward`` to the node it matches.

    Zero transitions are skipped and return None.
    """
    if not math.isfinite(reward):
        raise ValueError(f"non-finite reward {reward!r}")
    d = np.asarray(delta, dtype=np.float64).reshape(STATE_DIM)
    norm = math.sqrt(float(_dot(d, d)))
    if norm < DEGENERATE_NORM:
        return None
    q = d / norm
    n = len(memory)
    if n:
        h = _dot(memory.units, q)
        i = int(h.argmax())
        if h[i] >= memory.match_threshold:
            memory._values[i] += reward
            memory._hits[i] += 1
            return Observation("updated", int(memory._ids[i]))
    return Observation("added", memory._append(d.copy(), q, float(reward), 1))


def hub_threshold(memory: TransitionMemory, cfg: HubConfig) -> float:
    """Mean plus ``alpha`` population standard deviations of the node values."""
    if len(memory) == 0:
        raise ValueError("hub threshold of an empty memory")
    v = memory.values
    return float(v.mean() + cfg.alpha * v.std())


def hub_mask(memory: TransitionMemory, cfg: HubConfig) -> np.ndarray:
    """Boolean mask over node positions; strict ``value > threshold``."""
    return memory.values > hub_threshold(memory, cfg)


def hub_set(memory: TransitionMemory, cfg: HubConfig) -> set:
    return set(int(i) for i in memory.ids[hub_mask(memory, cfg)])


def value_of(memory: TransitionMemory, delta) -> float:
    """Stored value of the matching node, or 0 for unknown transitions."""
    if len(memory) == 0 or is_degenerate(delta):
        return 0.0
    pos, best = memory.match_batch(np.asarray(delta, dtype=np.float64)[None, :])
    if best[0] >= memory.match_threshold:
        return float(memory.values[pos[0]])
    return 0.0


# -- planning --------------------------------------------------------------


@dataclass
class Plan:
    actions: List[int]
    predicted_states: List[np.ndarray]
    predicted_transitions: List[np.ndarray]
    hub_hit: Optional[Tuple[int, int]] = None  # (step index, node id)
    first_transition_value: float = 0.0
    rollout: int = 0


def _sample_rows(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(probs, axis=1)
    a = (cdf <= u[:, None]).sum(axis=1)
    return np.minimum(a, probs.shape[1] - 1)


def make_plan(memory: TransitionMemory, cfg: HubConfig, start, policy, dynamics,
              rng: np.random.Generator, L_max: int = 10, n_plans: int = 5,
              hubs: Optional[np.ndarray] = None) -> Plan:
    """Roll the policy through the learned dynamics looking for a hub transition.

    ``policy`` needs ``action_probs(states)`` and ``dynamics`` needs
    ``predict_batch(states, actions)``, both on ``(n, 8)`` batches. The
    ``n_plans`` rollouts are advanced together, but every rollout owns a
    fixed row of uniforms, so the result is the same as trying them one
    after another and keeping the first that reaches a hub. Without a hit,
    a one-step plan takes the first action of the rollout whose first
    predicted transition has the highest stored value.

    Args:
        hubs: precomputed ``hub_mask``; pass it when planning repeatedly
            against a frozen memory.
    """
    if L_max < 1 or n_plans < 1:
        raise ValueError("L_max and n_plans must be positive")
    if hubs is None:
        hubs = hub_mask(memory, cfg) if len(memory) else np.zeros(0, dtype=bool)
    any_hub = bool(hubs.any())
    start = np.asarray(start, dtype=np.float64)
    u = rng.random((n_plans, L_max))

    states = np.tile(start, (n_plans, 1))
    hist_s = np.empty((L_max, n_plans, STATE_DIM))
    hist_d = np.empty((L_max, n_plans, STATE_DIM))
    hist_a = np.empty((L_max, n_plans), dtype=np.int64)
    hit_step = np.full(n_plans, -1, dtype=np.int64)
    hit_node = np.full(n_plans, -1, dtype=np.int64)
    active = np.ones(n_plans, dtype=bool)
    thr = memory.match_threshold

    for k in range(L_max):
        rows = np.flatnonzero(active)
        s = states[rows]
        probs = policy.action_probs(s)
        acts = _sample_rows(probs, u[rows, k])
        nxt = np.asarray(dynamics.predict_batch(s, acts))
        if not np.isfinite(nxt).all():
            raise DivergenceError("dynamics model produced non-finite prediction")
        d = nxt - s
        hist_a[k, rows] = acts
        hist_s[k, rows] = nxt
        hist_d[k, rows] = d
        states[rows] = nxt
        if any_hub:
            pos, best = memory.match_batch(d)
            hit = (best >= thr) & (pos >= 0)
            hit[hit] = hubs[pos[hit]]
            for j in np.flatnonzero(hit):
                r = rows[j]
                hit_step[r] = k
                hit_node[r] = memory.ids[pos[j]]
                active[r] = False
        hit_rows = np.flatnonzero(hit_step >= 0)
        # the lowest hitting rollout wins once no earlier rollout is still open
        if len(hit_rows) and not active[: hit_rows[0]].any():
            break
        if not active.any():
            break

    hit_rows = np.flatnonzero(hit_step >= 0)
    if len(hit_rows):
        r = int(hit_rows[0])
        k = int(hit_step[r])
        return Plan(
            actions=[int(a) for a in hist_a[: k + 1, r]],
            predicted_states=[hist_s[i, r].copy() for i in range(k + 1)],
            predicted_transitions=[hist_d[i, r].copy() for i in range(k + 1)],
            hub_hit=(k, int(hit_node[r])),
            first_transition_value=value_of(memory, hist_d[0, r]),
            rollout=r,
        )

    first_vals = _values_of_rows(memory, hist_d[0])
    r = int(np.argmax(first_vals))
    return Plan(
        actions=[int(hist_a[0, r])],
        predicted_states=[hist_s[0, r].copy()],
        predicted_transitions=[hist_d[0, r].copy()],
        hub_hit=None,
        first_transition_value=float(first_vals[r]),
        rollout=r,
    )


def _values_of_rows(memory: TransitionMemory, deltas: np.ndarray) -> np.ndarray:
    out = np.zeros(len(deltas))
    if len(memory) == 0:
        return out
    pos, best = memory.match_batch(deltas)
    ok = best >= memory.match_threshold
    out[ok] = memory.values[pos[ok]]
    return out


def qs_run_episode(memory: TransitionMemory, cfg: HubConfig, env, policy, dynamics,
                   rng: np.random.Generator, L_max: int = 10, n_plans: int = 5) -> EpisodeTrace:
    """Plan, execute the plan open-loop in the real env, replan; until done.

    The memory is read only. The returned trace carries the plans in
    ``trace.plans``; executed actions are the concatenation of plan actions,
    the last one possibly cut short by termination.
    """
    hubs = hub_mask(memory, cfg) if len(memory) else np.zeros(0, dtype=bool)
    trace = EpisodeTrace()
    state = env.state.copy()
    done = env.done
    while not done:
        plan = make_plan(memory, cfg, state, policy, dynamics, rng, L_max, n_plans, hubs)
        trace.plans.append(plan)
        for a in plan.actions:
            res = env.step(a)
            trace.states.append(state)
            trace.actions.append(a)
            trace.log_probs.append(math.nan)
            trace.values.append(math.nan)
            trace.rewards.append(res.reward)
            trace.next_states.append(res.next_state)
            state = res.next_state
            done = res.done
            trace.outcome = res.outcome
            if done:
                break
    return trace


# -- editing ---------------------------------------------------------------


@dataclass(frozen=True)
class RemoveNode:
    node: int


@dataclass(frozen=True)
class AddNode:
    delta: Tuple[float, ...]
    value: float


@dataclass(frozen=True)
class SetValue:
    node: int
    value: float


Edit = Union[RemoveNode, AddNode, SetValue]


def apply_edit(memory: TransitionMemory, edit: Edit) -> TransitionMemory:
    """Apply a manual edit in place; other nodes are left untouched."""
    if isinstance(edit, RemoveNode):
        pos = memory.position(edit.node)
        n = len(memory)
        for name in ("_raw", "_unit", "_values", "_hits", "_ids"):
            arr = getattr(memory, name)
            arr[pos : n - 1] = arr[pos + 1 : n]
        memory._n -= 1
    elif isinstance(edit, AddNode):
        raw, unit = _unit(edit.delta)
        if not math.isfinite(edit.value):
            raise ValueError("non-finite value")
        memory._append(raw.copy(), unit, float(edit.value), 0)
    elif isinstance(edit, SetValue):
        if not math.isfinite(edit.value):
            raise ValueError("non-finite value")
        memory._values[memory.position(edit.node)] = float(edit.value)
    else:
        raise TypeError(f"unknown edit {edit!r}")
    return memory
