"""Online greedy-coupling reward.

Expert atoms start with capacity ``1/D`` and every agent step must ship
``1/T`` of mass to the nearest atoms that still have capacity. Masses are
integers in units of ``1/(T*D)``: an atom holds ``T`` units and a step ships
``D`` units, so the "remaining mass > 0" test is exact.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import Coupling, EmpiricalMeasure, Point, Trajectory, measure_from_demos
from .metric import MetricMismatchError, MetricSpec


class MassExhaustedError(RuntimeError):
    pass


class Normalizer(str, enum.Enum):
    DIM_SCALED = "dim"
    HORIZON_ONLY = "horizon"


@dataclass(frozen=True)
class RewardParams:
    """``r = alpha * exp(-scale * c)``."""

    alpha: float
    beta: float
    scale: float

    def __post_init__(self):
        if not self.alpha > 0 or not self.beta > 0:
            raise ValueError("alpha and beta must be positive")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValueError("reward scale must be positive and finite")

    @classmethod
    def build(cls, alpha: float, beta: float, horizon: int, dim: int,
              normalizer: Normalizer | str = Normalizer.DIM_SCALED) -> "RewardParams":
        normalizer = Normalizer(normalizer)
        if normalizer is Normalizer.DIM_SCALED:
            scale = beta * horizon / math.sqrt(dim)
        else:
            scale = beta * horizon
        return cls(alpha=alpha, beta=beta, scale=scale)

    def reward(self, cost: float) -> float:
        return self.alpha * math.exp(-self.scale * cost)


@dataclass
class RewarderState:
    """Remaining expert capacity for the episode in progress.

    ``remaining_units[j]`` is atom j's capacity in units of ``1/(T*D)``.
    """

    nominal_T: int
    n_atoms: int
    remaining_units: np.ndarray
    steps_taken: int = 0
    coupling_log: list[tuple[int, int, int]] = field(default_factory=list)

    @property
    def unit(self) -> float:
        return 1.0 / (self.nominal_T * self.n_atoms)

    @property
    def remaining(self) -> list[tuple[int, float]]:
        """Live atoms as ``(demo index, remaining weight)``; popped atoms are absent."""
        return [(int(j), int(w) * self.unit) for j, w in enumerate(self.remaining_units) if w > 0]

    @property
    def remaining_mass(self) -> float:
        return int(self.remaining_units.sum()) * self.unit

    @property
    def transported_mass(self) -> float:
        return self.steps_taken / self.nominal_T


class PWILRewarder:
    """Greedy-coupling rewarder over a fixed demonstration measure.

    Usage per episode: ``reset()``, then one ``step`` (or ``step_support``)
    per agent transition, then optionally ``finish_episode()``.
    """

    def __init__(self, demos: EmpiricalMeasure | Sequence[Trajectory], metric: MetricSpec,
                 params: RewardParams, nominal_T: int):
        if not isinstance(demos, EmpiricalMeasure):
            demos = measure_from_demos(demos)
        if not demos.is_uniform:
            raise ValueError("demonstration measure must be uniform")
        if nominal_T < 1:
            raise ValueError("nominal_T must be positive")
        self.demos = demos
        self.metric = metric
        self.params = params
        self.nominal_T = int(nominal_T)
        self._expert_features = metric.features(demos.points)
        self.state = self.reset()

    @property
    def n_atoms(self) -> int:
        return len(self.demos)

    def reset(self) -> RewarderState:
        D = self.n_atoms
        self.state = RewarderState(
            nominal_T=self.nominal_T,
            n_atoms=D,
            remaining_units=np.full(D, self.nominal_T, dtype=np.int64),
        )
        return self.state

    def distances(self, x: Point) -> np.ndarray:
        fx = self.metric.features([x])[0]
        if fx.shape[0] != self._expert_features.shape[1]:
            raise MetricMismatchError(
                f"point dimension {fx.shape[0]} does not match demonstrations ({self._expert_features.shape[1]})"
            )
        diff = self._expert_features - fx
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))

    def step(self, x: Point) -> tuple[float, float]:
        """Ship ``1/T`` of mass from ``x`` greedily; returns ``(cost, reward)``."""
        st = self.state
        if st.steps_taken >= st.nominal_T:
            raise MassExhaustedError(
                f"mass exhausted: step {st.steps_taken} exceeds nominal horizon {st.nominal_T}"
            )
        dist = self.distances(x)
        remaining = st.remaining_units
        live = np.where(remaining > 0, dist, np.inf)
        need = st.n_atoms
        weighted = 0.0
        i = st.steps_taken
        while need > 0:
            j = int(np.argmin(live))
            if not np.isfinite(live[j]):
                raise MassExhaustedError(f"mass exhausted at step {i}")
            take = min(need, int(remaining[j]))
            weighted += take * dist[j]
            remaining[j] -= take
            need -= take
            st.coupling_log.append((i, j, take))
            if remaining[j] == 0:
                live[j] = np.inf
        st.steps_taken += 1
        cost = weighted * st.unit
        return cost, self.params.reward(cost)

    def step_support(self, x: Point) -> tuple[float, float]:
        """Support-estimation cost: ``min_j d(x, e_j) / T`` over all atoms, nothing popped."""
        st = self.state
        if st.steps_taken >= st.nominal_T:
            raise MassExhaustedError(
                f"mass exhausted: step {st.steps_taken} exceeds nominal horizon {st.nominal_T}"
            )
        cost = float(self.distances(x).min()) / st.nominal_T
        st.steps_taken += 1
        return cost, self.params.reward(cost)

    def finish_episode(self) -> Coupling:
        """Materialize the greedy coupling built so far.

        The result is flagged ``partial`` when fewer than ``nominal_T`` steps
        were taken (its total mass is then ``steps_taken / nominal_T``).
        Support-variant steps leave no coupling log.
        """
        st = self.state
        partial = st.steps_taken < st.nominal_T
        return Coupling(self.coupling_units() * st.unit, partial=partial, transported_mass=st.transported_mass)

    def coupling_units(self) -> np.ndarray:
        """Integer flow matrix (steps x atoms) in units of ``1/(T*D)``."""
        st = self.state
        flow = np.zeros((st.steps_taken, st.n_atoms), dtype=np.int64)
        for i, j, units in st.coupling_log:
            flow[i, j] += units
        return flow


def greedy_step_costs(traj: Trajectory | Sequence[Point], demos, metric: MetricSpec,
                      nominal_T: Optional[int] = None) -> np.ndarray:
    points = list(traj.points if isinstance(traj, Trajectory) else traj)
    T = nominal_T if nominal_T is not None else len(points)
    if len(points) != T:
        raise ValueError(f"trajectory length {len(points)} does not match nominal horizon {T}")
    rw = PWILRewarder(demos, metric, RewardParams(1.0, 1.0, 1.0), T)
    return np.array([rw.step(p)[0] for p in points])


def greedy_cost_total(traj: Trajectory | Sequence[Point], demos, metric: MetricSpec,
                      nominal_T: Optional[int] = None) -> float:
    """Total greedy transport cost of a full-horizon trajectory (an upper bound on W1)."""
    return float(sum(greedy_step_costs(traj, demos, metric, nominal_T).tolist()))
