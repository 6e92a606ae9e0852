"""A small, deterministic 2-D lunar lander.

Rigid body with explicit Euler integration, four discrete actions and a
potential-based shaped reward. The state vector is

    (x, y, vx, vy, theta, omega, leg_left, leg_right)

with ``y`` the altitude above the pad and ``theta = 0`` upright.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from enum import IntEnum

import numpy as np

from qsagent.errors import EpisodeFinishedError

STATE_DIM = 8
N_ACTIONS = 4

RUNNING = "running"
LANDED = "landed"
CRASHED = "crashed"
OUT_OF_BOUNDS = "out_of_bounds"
TIMEOUT = "timeout"
OUTCOMES = (RUNNING, LANDED, CRASHED, OUT_OF_BOUNDS, TIMEOUT)


class Action(IntEnum):
    NOP = 0
    LEFT = 1
    MAIN = 2
    RIGHT = 3


@dataclass
class EnvConfig:
    dt: float = 0.02
    gravity: float = 10.0
    main_accel: float = 15.0
    side_torque: float = 3.0
    side_accel: float = 1.0
    leg_height: float = 0.1
    crash_speed: float = 1.0
    crash_angle: float = 0.5
    x_bound: float = 1.5
    max_steps: int = 500
    fuel_cost_main: float = 0.3
    fuel_cost_side: float = 0.03
    terminal_bonus: float = 100.0
    land_speed: float = 0.1
    # fraction of lateral speed kept per step while resting on the ground
    ground_friction: float = 0.5

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class StepResult:
    next_state: np.ndarray
    reward: float
    done: bool
    outcome: str


def shaping(s) -> float:
    x, y, vx, vy, th, _, ll, lr = (float(v) for v in s)
    return (
        -100.0 * math.sqrt(x * x + y * y)
        - 100.0 * math.sqrt(vx * vx + vy * vy)
        - 100.0 * abs(th)
        + 10.0 * (ll + lr)
    )


def reward_of(prev, nxt, action: int, outcome: str, cfg: EnvConfig | None = None) -> float:
    """Shaped reward for one transition, including fuel costs and terminal bonus."""
    cfg = cfg or EnvConfig()
    r = shaping(nxt) - shaping(prev)
    if action == Action.MAIN:
        r -= cfg.fuel_cost_main
    elif action in (Action.LEFT, Action.RIGHT):
        r -= cfg.fuel_cost_side
    if outcome == LANDED:
        r += cfg.terminal_bonus
    elif outcome in (CRASHED, OUT_OF_BOUNDS):
        r -= cfg.terminal_bonus
    return r


class LanderEnv:
    def __init__(self, config: EnvConfig | None = None):
        self.config = config or EnvConfig()
        self.state: np.ndarray | None = None
        self.steps = 0
        self.done = True
        self.outcome = RUNNING

    def reset(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        x = rng.uniform(-0.3, 0.3)
        vx = rng.uniform(-0.5, 0.5)
        vy = rng.uniform(-0.5, 0.0)
        omega = rng.uniform(-0.1, 0.1)
        self.state = np.array([x, 1.4, vx, vy, 0.0, omega, 0.0, 0.0])
        self.steps = 0
        self.done = False
        self.outcome = RUNNING
        return self.state.copy()

    def step(self, action: int) -> StepResult:
        if self.done:
            raise EpisodeFinishedError("episode has terminated; call reset()")
        a = int(action)
        if not 0 <= a < N_ACTIONS:
            raise ValueError(f"invalid action {action!r}")
        c = self.config
        x, y, vx, vy, th, om = (float(v) for v in self.state[:6])
        sin_t, cos_t = math.sin(th), math.cos(th)

        ax, ay, alpha = 0.0, -c.gravity, 0.0
        if a == Action.MAIN:
            ax += -sin_t * c.main_accel
            ay += cos_t * c.main_accel
        elif a == Action.LEFT or a == Action.RIGHT:
            sign = 1.0 if a == Action.LEFT else -1.0
            alpha = sign * c.side_torque
            # lateral thrust along the body x-axis, opposite to the spin sense
            ax += -sign * c.side_accel * cos_t
            ay += -sign * c.side_accel * sin_t

        dt = c.dt
        nx = x + vx * dt
        ny = y + vy * dt
        nth = th + om * dt
        nvx = vx + ax * dt
        nvy = vy + ay * dt
        nom = om + alpha * dt
        self.steps += 1

        outcome = RUNNING
        if ny <= 0.0:
            if abs(nvy) > c.crash_speed or abs(nth) > c.crash_angle:
                outcome = CRASHED
            else:
                ny = 0.0
                nvy = max(nvy, 0.0)
                nvx *= c.ground_friction
                nom = 0.0
        legs = 1.0 if (ny <= c.leg_height and abs(nth) < c.crash_angle) else 0.0
        if outcome == RUNNING:
            if abs(nx) > c.x_bound:
                outcome = OUT_OF_BOUNDS
            elif legs == 1.0 and math.hypot(nvx, nvy) < c.land_speed:
                outcome = LANDED
            elif self.steps >= c.max_steps:
                outcome = TIMEOUT

        nxt = np.array([nx, ny, nvx, nvy, nth, nom, legs, legs])
        r = reward_of(self.state, nxt, a, outcome, c)
        self.state = nxt
        self.outcome = outcome
        self.done = outcome != RUNNING
        return StepResult(nxt.copy(), r, self.done, outcome)
