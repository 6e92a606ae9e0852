"""Learned one-step dynamics model (state, one-hot action) -> next state.

The network either regresses the next state directly (``absolute``) or the
change ``S' - S`` (``delta``), in which case the state is added back on
prediction. Either way ``predict_next`` returns the next state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from qsagent import nn
from qsagent.agent import lr_at
from qsagent.errors import DivergenceError
from qsagent.lander import N_ACTIONS, STATE_DIM

ABSOLUTE = "absolute"
DELTA = "delta"
TARGETS = (ABSOLUTE, DELTA)


def model_input(states, actions) -> np.ndarray:
    """Concatenate states (indices 0-7) with one-hot actions (indices 8-11)."""
    states = np.asarray(states, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.int64)
    if states.ndim == 1:
        x = np.zeros(STATE_DIM + N_ACTIONS)
        x[:STATE_DIM] = states
        x[STATE_DIM + int(actions)] = 1.0
        return x
    x = np.zeros((len(states), STATE_DIM + N_ACTIONS))
    x[:, :STATE_DIM] = states
    x[np.arange(len(states)), STATE_DIM + actions] = 1.0
    return x


@dataclass
class EnvNet:
    net: nn.Mlp
    opt: nn.OptimizerState
    base_lr: float = 0.05
    target: str = ABSOLUTE
    inputs: List[np.ndarray] = field(default_factory=list)
    targets: List[np.ndarray] = field(default_factory=list)
    loss_sum: float = 0.0

    @classmethod
    def create(cls, rng: np.random.Generator, base_lr: float = 0.05, hidden: int = 300,
               target: str = ABSOLUTE) -> "EnvNet":
        net = nn.init_mlp([STATE_DIM + N_ACTIONS, hidden, STATE_DIM], nn.LINEAR, rng)
        return cls(net, nn.OptimizerState.for_mlp(net), base_lr, target)

    def __post_init__(self):
        if self.target not in TARGETS:
            raise ValueError(f"target must be one of {TARGETS}, got {self.target!r}")

    def _target(self, state, actual_next) -> np.ndarray:
        y = np.asarray(actual_next, dtype=np.float64)
        return y - np.asarray(state, dtype=np.float64) if self.target == DELTA else y

    def predict_next(self, state, action) -> np.ndarray:
        out = nn.predict(self.net, model_input(state, action))
        if self.target == DELTA:
            out = out + np.asarray(state, dtype=np.float64)
        if not np.isfinite(out).all():
            raise DivergenceError("dynamics model produced non-finite prediction")
        return out

    # batched form used by the planner
    predict_batch = predict_next

    def observe_step(self, state, action, actual_next) -> float:
        """Accumulate this step's mean squared error into the episode buffer."""
        x = model_input(state, action)
        target = self._target(state, actual_next)
        err = nn.predict(self.net, x) - target
        contribution = float(np.mean(err * err))
        self.inputs.append(x)
        self.targets.append(target)
        self.loss_sum += contribution
        return contribution

    def end_episode_update(self, episode_index: int) -> float:
        """Single backprop step on the accumulated episode loss.

        Returns:
            The mean per-step MSE observed before the update.
        """
        if not self.inputs:
            raise ValueError("no observations accumulated since the last update")
        X = np.asarray(self.inputs)
        Y = np.asarray(self.targets)
        k = len(X)
        mse = self.loss_sum / k
        pred, cache = nn.forward(self.net, X)
        grad = 2.0 * (pred - Y) / STATE_DIM
        grads = nn.backward(self.net, cache, grad)
        self.inputs.clear()
        self.targets.clear()
        self.loss_sum = 0.0
        if not np.isfinite(mse):
            raise DivergenceError("non-finite dynamics model loss")
        nn.optimizer_step(self.net, grads, self.opt, lr_at(self.base_lr, episode_index))
        return mse
