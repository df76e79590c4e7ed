"""Small episodic MDPs with scripted experts.

Three families: a 1D line, a 2D gridworld (plus an out-and-back "loop"
layout) and a continuous 2D point mass with eight discrete headings.
Observations are real vectors in environment units; actions are integer
indices whose real-vector encoding (the displacement) is what the metric sees.

The functional core is ``env_reset`` / ``env_step``. ``Env`` wraps it for
evaluation, and ``ImitationEnv`` is the training-side handle, which cannot
see the task reward at all.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from .core import Point, Trajectory

Policy = Callable[[np.ndarray, int], int]


class EnvKind(str, enum.Enum):
    LINE = "line"
    GRID = "grid"
    POINT_MASS = "pointmass"


class InvalidActionError(ValueError):
    pass


GRID_MOVES = ((1, 0), (-1, 0), (0, 1), (0, -1))  # right, left, down, up
LINE_MOVES = (-1.0, 0.0, 1.0)
HEADINGS = tuple(
    (math.cos(k * math.pi / 4), math.sin(k * math.pi / 4)) for k in range(8)
)


@dataclass(frozen=True)
class EnvSpec:
    """Static description of one task.

    ``start`` fixes the initial state; ``start_low``/``start_high`` make it
    uniform over a box instead. ``layout="loop"`` selects the out-and-back
    gridworld, whose expert runs along the first row and returns.
    """

    kind: EnvKind
    horizon: int
    size: float = 8
    start: Optional[tuple[float, ...]] = None
    start_low: Optional[tuple[float, ...]] = None
    start_high: Optional[tuple[float, ...]] = None
    goal: Optional[tuple[float, ...]] = None
    step_length: float = 1.0
    goal_radius: float = 0.5
    layout: str = "standard"

    def __post_init__(self):
        object.__setattr__(self, "kind", EnvKind(self.kind))
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.start is None and (self.start_low is None or self.start_high is None):
            raise ValueError("either a fixed start or a start box is required")
        if self.layout not in ("standard", "loop"):
            raise ValueError(f"unknown layout {self.layout!r}")

    @property
    def state_dim(self) -> int:
        return 1 if self.kind is EnvKind.LINE else 2

    @property
    def action_dim(self) -> int:
        return self.state_dim

    @property
    def n_actions(self) -> int:
        return {EnvKind.LINE: len(LINE_MOVES), EnvKind.GRID: len(GRID_MOVES),
                EnvKind.POINT_MASS: len(HEADINGS)}[self.kind]

    def obs_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind is EnvKind.GRID:
            return np.zeros(2), np.full(2, self.size - 1.0)
        return np.zeros(self.state_dim), np.full(self.state_dim, float(self.size))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnvSpec":
        d = dict(d)
        for k in ("start", "start_low", "start_high", "goal"):
            if d.get(k) is not None:
                d[k] = tuple(d[k])
        return cls(**d)


def gridworld(size: int = 8, horizon: Optional[int] = None) -> EnvSpec:
    """Fixed start in one corner, absorbing goal in the opposite corner.

    The default horizon is twice the shortest path, so the expert spends the
    second half of every episode parked on the goal.
    """
    shortest = 2 * (size - 1)
    return EnvSpec(EnvKind.GRID, horizon=horizon or 2 * shortest, size=size,
                   start=(0.0, 0.0), goal=(size - 1.0, size - 1.0))


def loop_gridworld(size: int = 8) -> EnvSpec:
    """Expert climbs a staircase to the far corner and retraces it home; no terminal cell."""
    return EnvSpec(EnvKind.GRID, horizon=4 * (size - 1), size=size, start=(0.0, 0.0),
                   goal=(size - 1.0, size - 1.0), layout="loop")


def line_world(length: float = 10.0, target: float = 10.0, horizon: int = 10, start: float = 0.0) -> EnvSpec:
    return EnvSpec(EnvKind.LINE, horizon=horizon, size=length, start=(start,), goal=(target,))


def point_mass(size: float = 10.0, horizon: int = 40, step_length: float = 0.5,
               goal_radius: float = 0.5) -> EnvSpec:
    """Uniform start in the lower-left quarter, goal near the upper-right corner."""
    return EnvSpec(EnvKind.POINT_MASS, horizon=horizon, size=size,
                   start_low=(0.0, 0.0), start_high=(size / 4, size / 4),
                   goal=(0.9 * size, 0.9 * size), step_length=step_length, goal_radius=goal_radius)


@dataclass(frozen=True)
class EnvState:
    pos: tuple[float, ...]
    t: int = 0
    start_dist: float = 1.0
    reached_far: bool = False
    returned: bool = False


def observe(state: EnvState) -> np.ndarray:
    return np.array(state.pos, dtype=np.float64)


def action_vector(spec: EnvSpec, action: int) -> np.ndarray:
    _check_action(spec, action)
    if spec.kind is EnvKind.GRID:
        return np.array(GRID_MOVES[action], dtype=np.float64)
    if spec.kind is EnvKind.LINE:
        return np.array([LINE_MOVES[action]])
    return np.array(HEADINGS[action])


def _check_action(spec: EnvSpec, action) -> None:
    if not isinstance(action, (int, np.integer)) or not 0 <= action < spec.n_actions:
        raise InvalidActionError(f"action {action!r} invalid for {spec.kind.value} (n_actions={spec.n_actions})")


def _goal_distance(spec: EnvSpec, pos) -> float:
    p = np.asarray(pos, dtype=np.float64)
    g = np.asarray(spec.goal, dtype=np.float64)
    if spec.kind is EnvKind.GRID:
        return float(np.abs(p - g).sum())
    return float(np.linalg.norm(p - g))


def env_reset(spec: EnvSpec, rng: np.random.Generator) -> EnvState:
    if spec.start is not None:
        pos = tuple(float(v) for v in spec.start)
    else:
        lo = np.asarray(spec.start_low, dtype=np.float64)
        hi = np.asarray(spec.start_high, dtype=np.float64)
        pos = tuple(float(v) for v in rng.uniform(lo, hi))
    start_dist = _goal_distance(spec, pos) if spec.goal is not None else 1.0
    return EnvState(pos=pos, t=0, start_dist=start_dist)


def env_step(spec: EnvSpec, state: EnvState, action: int) -> tuple[EnvState, bool, float]:
    """Deterministic transition; returns ``(next_state, done, hidden_reward)``."""
    _check_action(spec, action)
    pos = np.asarray(state.pos, dtype=np.float64)
    lo, hi = spec.obs_bounds()
    nxt = np.clip(pos + spec.step_length * action_vector(spec, action), lo, hi)
    t = state.t + 1
    if spec.layout == "loop":
        return _loop_step(spec, state, nxt, t)
    if spec.kind is EnvKind.GRID and _goal_distance(spec, pos) == 0.0:
        nxt = pos

    # Progress toward the goal, normalized so a full approach sums to 1.
    floor = 0.0 if spec.kind is EnvKind.GRID else spec.goal_radius
    d_prev = max(_goal_distance(spec, pos), floor)
    d_next = max(_goal_distance(spec, nxt), floor)
    span = max(state.start_dist - floor, 1e-12)
    hidden = (d_prev - d_next) / span
    at_goal = spec.kind is EnvKind.POINT_MASS and _goal_distance(spec, nxt) <= spec.goal_radius
    done = at_goal or t >= spec.horizon
    nxt_state = EnvState(pos=tuple(nxt.tolist()), t=t, start_dist=state.start_dist)
    return nxt_state, done, float(hidden)


def _loop_step(spec: EnvSpec, state: EnvState, nxt: np.ndarray, t: int):
    far = tuple(spec.goal)
    home = tuple(spec.start)
    pos = tuple(nxt.tolist())
    hidden = 0.0
    reached, returned = state.reached_far, state.returned
    if not reached and pos == far:
        reached = True
        hidden = 0.5
    elif state.reached_far and not returned and pos == home:
        returned = True
        hidden = 0.5
    done = t >= spec.horizon
    nxt_state = EnvState(pos=pos, t=t, start_dist=state.start_dist, reached_far=reached, returned=returned)
    return nxt_state, done, hidden


class Env:
    """Stateful wrapper around the functional dynamics (evaluation side)."""

    def __init__(self, spec: EnvSpec):
        self.spec = spec
        self.state: Optional[EnvState] = None

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self.state = env_reset(self.spec, rng)
        return observe(self.state)

    def step(self, action: int) -> tuple[np.ndarray, bool, float]:
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        self.state, done, hidden = env_step(self.spec, self.state, action)
        return observe(self.state), done, hidden


class ImitationEnv:
    """Training-side handle: same dynamics, no access to the task reward."""

    def __init__(self, spec: EnvSpec):
        self._env = Env(spec)
        self.spec = spec

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        return self._env.reset(rng)

    def step(self, action: int) -> tuple[np.ndarray, bool]:
        obs, done, _ = self._env.step(action)
        return obs, done

    def __getattr__(self, name):
        if name.startswith("_"):
            raise AttributeError(name)
        raise AttributeError(f"{name!r} is not available on the imitation interface")


def scripted_expert(spec: EnvSpec) -> Policy:
    """Deterministic optimal policy for the task's hidden reward."""
    if spec.kind is EnvKind.GRID and spec.layout == "loop":
        half = 2 * (int(spec.size) - 1)

        def loop_policy(obs, t):
            # out: right, down, right, ...; back: up, left, up, ...
            if t < half:
                return 0 if t % 2 == 0 else 2
            return 3 if t % 2 == 0 else 1

        return loop_policy

    if spec.kind is EnvKind.GRID:
        gx, gy = spec.goal

        def grid_policy(obs, t):
            x, y = obs
            if x < gx:
                return 0
            if x > gx:
                return 1
            if y < gy:
                return 2
            if y > gy:
                return 3
            return 2

        return grid_policy

    if spec.kind is EnvKind.LINE:
        target = spec.goal[0]

        def line_policy(obs, t):
            delta = target - obs[0]
            if abs(delta) < 1e-12:
                return 1
            return 2 if delta > 0 else 0

        return line_policy

    goal = np.asarray(spec.goal, dtype=np.float64)
    moves = np.array(HEADINGS) * spec.step_length

    def heading_policy(obs, t):
        lo, hi = spec.obs_bounds()
        cand = np.clip(obs[None, :] + moves, lo, hi)
        return int(np.argmin(np.linalg.norm(cand - goal, axis=1)))

    return heading_policy


def rollout(spec: EnvSpec, policy: Policy, rng: np.random.Generator,
            episode_id: int = 0) -> tuple[Trajectory, float]:
    """Run one episode; returns the visited (state, action) points and the task return."""
    state = env_reset(spec, rng)
    points = []
    total = 0.0
    for t in range(spec.horizon):
        obs = observe(state)
        a = policy(obs, t)
        points.append(Point(obs, action_vector(spec, a), key=(episode_id, t)))
        state, done, hidden = env_step(spec, state, a)
        total += hidden
        if done:
            break
    return Trajectory(tuple(points), episode_id=episode_id, nominal_horizon=spec.horizon), total


def generate_demos(spec: EnvSpec, policy: Policy, n_episodes: int,
                   rng: np.random.Generator) -> list[Trajectory]:
    return [rollout(spec, policy, rng, episode_id=k)[0] for k in range(n_episodes)]


def optimal_return(spec: EnvSpec) -> float:
    """Hidden-reward optimum; every task is normalized so a solved episode scores 1."""
    return 1.0
