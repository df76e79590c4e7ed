"""Shared domain types: atoms, trajectories, empirical measures and couplings."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

MARGINAL_TOL = 1e-9


class EmptySupportError(ValueError):
    pass


def _frozen_vector(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Point:
    """One state-action atom.

    ``action`` is ``None`` in learning-from-observation mode. ``key`` is the
    ``(episode, t)`` pair the point was recorded at, when known; it is used
    for embedding lookups and for the agent's time index.
    """

    state: np.ndarray
    action: Optional[np.ndarray] = None
    key: Optional[tuple[int, int]] = None

    def __post_init__(self):
        object.__setattr__(self, "state", _frozen_vector(self.state, "state"))
        if self.action is not None:
            object.__setattr__(self, "action", _frozen_vector(self.action, "action"))
        if self.key is not None:
            object.__setattr__(self, "key", (int(self.key[0]), int(self.key[1])))

    @property
    def has_action(self) -> bool:
        return self.action is not None

    def vector(self, state_only: bool = False) -> np.ndarray:
        """Concatenated state-action vector (state alone if requested or absent)."""
        if state_only or self.action is None:
            return self.state
        return np.concatenate([self.state, self.action])

    def __eq__(self, other):
        if not isinstance(other, Point):
            return NotImplemented
        if (self.action is None) != (other.action is None):
            return False
        same_action = self.action is None or np.array_equal(self.action, other.action)
        return np.array_equal(self.state, other.state) and same_action and self.key == other.key

    def __hash__(self):
        act = None if self.action is None else tuple(self.action)
        return hash((tuple(self.state), act, self.key))


@dataclass(frozen=True)
class Trajectory:
    """Ordered visitation of points; list index is the timestep."""

    points: tuple[Point, ...]
    episode_id: int = 0
    nominal_horizon: Optional[int] = None

    def __post_init__(self):
        pts = tuple(self.points)
        object.__setattr__(self, "points", pts)
        horizon = self.nominal_horizon if self.nominal_horizon is not None else max(len(pts), 1)
        if horizon < 1:
            raise ValueError("nominal_horizon must be positive")
        if len(pts) > horizon:
            raise ValueError(f"trajectory has {len(pts)} points but horizon is {horizon}")
        object.__setattr__(self, "nominal_horizon", int(horizon))
        if pts:
            ds = {p.state.shape[0] for p in pts}
            if len(ds) != 1:
                raise ValueError("inconsistent state dimensions within trajectory")
            acts = {None if p.action is None else p.action.shape[0] for p in pts}
            if len(acts) != 1:
                raise ValueError("inconsistent action dimensions within trajectory")

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, idx):
        return self.points[idx]

    @property
    def state_dim(self) -> int:
        return self.points[0].state.shape[0]

    @property
    def action_dim(self) -> int:
        a = self.points[0].action
        return 0 if a is None else a.shape[0]

    @property
    def is_full(self) -> bool:
        return len(self.points) == self.nominal_horizon

    @classmethod
    def from_arrays(cls, states, actions=None, episode_id: int = 0, nominal_horizon=None) -> "Trajectory":
        states = np.asarray(states, dtype=np.float64)
        if states.ndim == 1:
            states = states[:, None]
        pts = []
        for t, s in enumerate(states):
            a = None if actions is None else np.atleast_1d(np.asarray(actions[t], dtype=np.float64))
            pts.append(Point(s, a, key=(episode_id, t)))
        return cls(tuple(pts), episode_id=episode_id, nominal_horizon=nominal_horizon)


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Finitely supported measure over points."""

    points: tuple[Point, ...]
    weights: np.ndarray

    def __post_init__(self):
        pts = tuple(self.points)
        if not pts:
            raise EmptySupportError("empty support")
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if w.shape[0] != len(pts):
            raise ValueError("one weight per atom required")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if abs(math.fsum(w) - 1.0) > MARGINAL_TOL:
            raise ValueError(f"weights sum to {math.fsum(w)!r}, expected 1")
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, points: Iterable[Point]) -> "EmpiricalMeasure":
        pts = tuple(points)
        if not pts:
            raise EmptySupportError("empty support")
        return cls(pts, np.full(len(pts), 1.0 / len(pts)))

    def __len__(self):
        return len(self.points)

    @property
    def atoms(self) -> list[tuple[Point, float]]:
        return list(zip(self.points, self.weights.tolist()))

    @property
    def is_uniform(self) -> bool:
        return bool(np.allclose(self.weights, 1.0 / len(self.points), rtol=0, atol=1e-15))


def measure_from_trajectory(traj: Trajectory) -> EmpiricalMeasure:
    """Uniform measure over the realized points of ``traj``.

    Shorter-than-horizon trajectories are renormalized over their realized
    support, so each atom carries ``1/len(traj)``.
    """
    if len(traj) == 0:
        raise EmptySupportError("empty support")
    return EmpiricalMeasure.uniform(traj.points)


def measure_from_demos(demos: Sequence[Trajectory]) -> EmpiricalMeasure:
    """Pool a demonstration set into one uniform measure of size D."""
    pts = [p for traj in demos for p in traj.points]
    if not pts:
        raise EmptySupportError("empty support")
    return EmpiricalMeasure.uniform(pts)


@dataclass(frozen=True, eq=False)
class Coupling:
    """Dense T x D transport plan.

    ``partial`` marks greedy couplings of episodes that ended before the
    nominal horizon; their rows do not all carry ``1/T``.
    """

    entries: np.ndarray
    partial: bool = False
    transported_mass: float = 1.0

    def __post_init__(self):
        e = np.array(self.entries, dtype=np.float64)
        if e.ndim != 2:
            raise ValueError("coupling entries must be a matrix")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def cost(self, dist_matrix: np.ndarray) -> float:
        return float(np.sum(np.asarray(dist_matrix) * self.entries))


@dataclass(frozen=True)
class CouplingReport:
    row_error: float
    col_error: float
    min_entry: float
    total_mass: float
    passed: bool


def validate_coupling(c: Coupling | np.ndarray, T: int, D: int, tol: float = MARGINAL_TOL) -> CouplingReport:
    """Check membership of the uniform-marginal polytope (rows 1/T, columns 1/D)."""
    entries = c.entries if isinstance(c, Coupling) else np.asarray(c, dtype=np.float64)
    if entries.shape != (T, D):
        raise ValueError(f"coupling shape {entries.shape} does not match ({T}, {D})")
    row_err = max(abs(math.fsum(row) - 1.0 / T) for row in entries)
    col_err = max(abs(math.fsum(col) - 1.0 / D) for col in entries.T)
    min_entry = float(entries.min())
    total = math.fsum(entries.ravel())
    passed = row_err <= tol and col_err <= tol and min_entry >= 0.0 and abs(total - 1.0) <= tol
    return CouplingReport(float(row_err), float(col_err), min_entry, total, passed)
