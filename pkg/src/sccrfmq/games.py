"""Benchmark environments: continuous climbing games and the boat problem.

Every environment exposes the same small surface used by the harness:

* ``reset() -> int`` returns the initial state id,
* ``step(actions, rng) -> Transition`` applies one joint action, where each
  agent's action is a real in [0, 1],
* ``n_agents`` and ``single_state``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import Interval, RandomSource, UsageError, project

Grid = tuple[tuple[float, float, float], ...]

# Rows are agent 1's actions (0, 0.5, 1), columns agent 2's.
CG_GRID: Grid = (
    (11.0, -30.0, 0.0),
    (-30.0, 7.0, 6.0),
    (0.0, 0.0, 5.0),
)
PSCG_GRIDS: tuple[Grid, Grid] = (
    ((11.0, -30.0, 0.0), (-30.0, 14.0, 6.0), (0.0, 0.0, 5.0)),
    ((11.0, -30.0, 0.0), (-30.0, 0.0, 6.0), (0.0, 0.0, 5.0)),
)


@dataclass(frozen=True, slots=True)
class Transition:
    next: int
    reward: float
    terminal: bool


def _as_grid(values) -> Grid:
    arr = np.asarray(values, dtype=float)
    if arr.shape != (3, 3) or not np.all(np.isfinite(arr)):
        raise UsageError(f"a reward grid must be a finite 3x3 array, got shape {arr.shape}")
    return tuple(tuple(float(v) for v in row) for row in arr)


def bilinear_eval(grid: Grid, a1: float, a2: float) -> float:
    """Bilinear interpolation of a 3x3 grid whose nodes sit at {0, 0.5, 1}^2."""
    if not (0.0 <= a1 <= 1.0 and 0.0 <= a2 <= 1.0):
        raise UsageError(f"actions must lie in [0, 1], got ({a1}, {a2})")
    s1 = a1 * 2.0
    i = 1 if s1 >= 1.0 else 0
    u = s1 - i
    s2 = a2 * 2.0
    j = 1 if s2 >= 1.0 else 0
    w = s2 - j
    r0 = grid[i]
    r1 = grid[i + 1]
    return ((1.0 - u) * ((1.0 - w) * r0[j] + w * r0[j + 1])
            + u * ((1.0 - w) * r1[j] + w * r1[j + 1]))


class MatrixGame:
    """Continuous two-agent climbing game built from one or two 3x3 grids.

    With two grids a fair coin picks the grid for each round, which is how
    the partially stochastic variant is produced.
    """

    n_agents = 2
    single_state = True

    def __init__(self, grids: Sequence, name: str = "custom-grid"):
        grids = [_as_grid(g) for g in grids]
        if len(grids) not in (1, 2):
            raise UsageError("a matrix game takes one or two grids")
        self.grids: tuple[Grid, ...] = tuple(grids)
        self.name = name

    @property
    def stochastic(self) -> bool:
        return len(self.grids) == 2

    def reset(self) -> int:
        return 0

    def evaluate(self, actions: Sequence[float], rng: RandomSource) -> float:
        a1, a2 = actions
        if len(self.grids) == 1:
            return bilinear_eval(self.grids[0], a1, a2)
        grid = self.grids[0] if rng.uniform() < 0.5 else self.grids[1]
        return bilinear_eval(grid, a1, a2)

    def step(self, actions: Sequence[float], rng: RandomSource) -> Transition:
        return Transition(0, self.evaluate(actions, rng), True)

    def expected(self, a1: float, a2: float) -> float:
        return sum(bilinear_eval(g, a1, a2) for g in self.grids) / len(self.grids)


def climbing_game() -> MatrixGame:
    return MatrixGame([CG_GRID], name="cg")


def stochastic_climbing_game() -> MatrixGame:
    return MatrixGame(PSCG_GRIDS, name="pscg")


def matrix_game_step(spec: MatrixGame, a1: float, a2: float, rng: RandomSource) -> Transition:
    return spec.step((a1, a2), rng)


class FunctionGame:
    """Single-state cooperative game with a deterministic reward function."""

    single_state = True

    def __init__(self, fn: Callable[..., float], n_agents: int = 2, name: str = "function"):
        self.fn = fn
        self.n_agents = n_agents
        self.name = name

    def reset(self) -> int:
        return 0

    def evaluate(self, actions: Sequence[float], rng: RandomSource) -> float:
        return float(self.fn(*actions))

    def step(self, actions: Sequence[float], rng: RandomSource) -> Transition:
        return Transition(0, self.evaluate(actions, rng), True)


def colormap_grid(spec: MatrixGame, resolution: int) -> np.ndarray:
    """Expected reward on a ``resolution`` x ``resolution`` lattice over [0, 1]^2.

    Row k corresponds to agent 1 playing ``k / (resolution - 1)``.
    """
    if resolution < 2:
        raise UsageError("resolution must be at least 2")
    pts = np.linspace(0.0, 1.0, resolution)
    out = np.empty((resolution, resolution))
    for r, a1 in enumerate(pts):
        for c, a2 in enumerate(pts):
            out[r, c] = spec.expected(float(a1), float(a2))
    return out


# --------------------------------------------------------------------- boat

X_RANGE = Interval(0.0, 50.0)
Y_RANGE = Interval(0.0, 100.0)
THETA_RANGE = Interval(-math.pi / 3, math.pi / 3)
V_RANGE = Interval(2.0, 5.0)
OMEGA_RANGE = Interval(-1.0, 1.0)
ACCEL_V = Interval(-1.0, 2.0)
ACCEL_OMEGA = Interval(-1.0, 1.0)

CURRENT_MEAN = 4.0
CURRENT_STD = 1.0
STEP_CAP = 200
N_BOAT_STATES = 50 * 100 * 10 * 10 * 10
_X_TOL = 1e-9


@dataclass(frozen=True, slots=True)
class BoatState:
    x: float
    y: float
    theta: float
    v: float
    omega: float
    steps: int = 0


def boat_reset() -> BoatState:
    return BoatState(0.0, 50.0, 0.0, 2.0, 0.0, 0)


def boat_reward(x: float, y: float) -> float:
    """Quay payoff: peaks of 15 at y=30, 10 at y=50 and 10 at y=80 on the right bank."""
    if x < X_RANGE.hi - _X_TOL:
        return 0.0
    if 25.0 < y <= 35.0:
        return 15.0 - 3.0 * abs(y - 30.0)
    if 40.0 < y <= 60.0:
        return 10.0 - abs(y - 50.0)
    if 60.0 < y <= 100.0:
        return 10.0 - abs(y - 80.0) / 2.0
    return 0.0


def current_effect(x: float, force: float) -> float:
    p = x / 50.0
    return force * (p - p * p)


def boat_step(s: BoatState, a_v: float, a_omega: float, rng: RandomSource | None,
              step_cap: int = STEP_CAP, force: float | None = None) -> tuple[BoatState, Transition]:
    """Advance the boat one unit of time with a forward-Euler step.

    ``force`` pins the current force instead of drawing it from N(4, 1);
    tests use it to check the kinematics.
    """
    if a_v not in ACCEL_V or a_omega not in ACCEL_OMEGA:
        raise UsageError(f"accelerations out of range: a_v={a_v}, a_omega={a_omega}")
    if force is None:
        force = rng.normal(CURRENT_MEAN, CURRENT_STD)
    x, y, th, v, om = s.x, s.y, s.theta, s.v, s.omega
    p = x / 50.0
    nx = min(max(x + v * math.cos(th), 0.0), 50.0)
    ny = min(max(y + v * math.sin(th) + force * (p - p * p), 0.0), 100.0)
    nth = min(max(th + om, THETA_RANGE.lo), THETA_RANGE.hi)
    nv = min(max(v + a_v, 2.0), 5.0)
    nom = min(max(om + a_omega, -1.0), 1.0)
    steps = s.steps + 1
    ns = BoatState(nx, ny, nth, nv, nom, steps)
    terminal = nx >= 50.0 - _X_TOL or ny == 0.0 or ny == 100.0 or steps >= step_cap
    reward = boat_reward(nx, ny) - 0.1 * steps if terminal else 0.0
    return ns, Transition(boat_state_index(ns), reward, terminal)


def _bin10(value: float, iv: Interval) -> int:
    b = int((value - iv.lo) / (iv.hi - iv.lo) * 10.0)
    return 9 if b > 9 else (0 if b < 0 else b)


def boat_state_index(s: BoatState) -> int:
    """Cell id: unit bins for x and y, ten equal bins for theta, v and omega."""
    xb = min(int(s.x), 49)
    yb = min(int(s.y), 99)
    tb = _bin10(s.theta, THETA_RANGE)
    vb = _bin10(s.v, V_RANGE)
    wb = _bin10(s.omega, OMEGA_RANGE)
    return (((xb * 100 + yb) * 10 + tb) * 10 + vb) * 10 + wb


class BoatGame:
    """Two controllers steer one boat: agent 0 sets the forward acceleration,
    agent 1 the angular acceleration. Agent actions in [0, 1] are mapped
    affinely onto the acceleration ranges.
    """

    n_agents = 2
    single_state = False
    name = "boat"

    def __init__(self, step_cap: int = STEP_CAP):
        self.step_cap = step_cap
        self.state = boat_reset()

    def reset(self) -> int:
        self.state = boat_reset()
        return boat_state_index(self.state)

    def step(self, actions: Sequence[float], rng: RandomSource) -> Transition:
        u_v, u_w = actions
        a_v = ACCEL_V.lo + u_v * ACCEL_V.width
        a_w = ACCEL_OMEGA.lo + u_w * ACCEL_OMEGA.width
        self.state, tr = boat_step(self.state, a_v, a_w, rng, self.step_cap)
        return tr
