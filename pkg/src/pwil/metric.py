"""Distances between state-action atoms."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import Point, Trajectory

logger = logging.getLogger(__name__)

STD_FLOOR = 1e-8


class MetricKind(str, enum.Enum):
    STANDARDIZED = "standardized"
    L2 = "l2"
    STATE_STANDARDIZED = "state"
    EMBEDDING = "embedding"


class MetricMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MetricSpec:
    """Which distance to use and its fitted parameters.

    Standardized kinds carry ``inv_std``; the embedding kind carries a table
    keyed by ``(episode, t)``.
    """

    kind: MetricKind
    inv_std: Optional[np.ndarray] = None
    embedding_table: Optional[Mapping[tuple[int, int], np.ndarray]] = None

    def __post_init__(self):
        kind = MetricKind(self.kind)
        object.__setattr__(self, "kind", kind)
        standardized = kind in (MetricKind.STANDARDIZED, MetricKind.STATE_STANDARDIZED)
        if standardized:
            if self.inv_std is None:
                raise ValueError(f"{kind.value} metric requires inv_std")
            w = np.array(self.inv_std, dtype=np.float64).reshape(-1)
            if not np.all(np.isfinite(w)) or np.any(w <= 0):
                raise ValueError("inv_std entries must be finite and positive")
            w.setflags(write=False)
            object.__setattr__(self, "inv_std", w)
        elif self.inv_std is not None:
            raise ValueError(f"{kind.value} metric does not take inv_std")
        if kind is MetricKind.EMBEDDING and self.embedding_table is None:
            raise ValueError("embedding metric requires an embedding table")

    @classmethod
    def plain(cls) -> "MetricSpec":
        return cls(MetricKind.L2)

    @property
    def state_only(self) -> bool:
        return self.kind is MetricKind.STATE_STANDARDIZED

    def features(self, points: Sequence[Point]) -> np.ndarray:
        """Map points into the space where the metric is plain L2.

        Returns an ``(n, k)`` array. Raises ``MetricMismatchError`` on ragged
        dimensions, mixed action presence, or missing embeddings.
        """
        if self.kind is MetricKind.EMBEDDING:
            rows = []
            for p in points:
                if p.key is None or p.key not in self.embedding_table:
                    raise MetricMismatchError(f"missing embedding for point key {p.key}")
                rows.append(np.asarray(self.embedding_table[p.key], dtype=np.float64))
            return _stack(rows)
        rows = [p.vector(state_only=self.state_only) for p in points]
        if len({p.action is None for p in points}) > 1 and not self.state_only:
            raise MetricMismatchError("points mix state-only and state-action atoms")
        feats = _stack(rows)
        if self.inv_std is not None:
            if feats.shape[1] != self.inv_std.shape[0]:
                raise MetricMismatchError(
                    f"point dimension {feats.shape[1]} does not match inv_std length {self.inv_std.shape[0]}"
                )
            feats = feats * self.inv_std
        return feats

    def feature_dim(self, point: Point) -> int:
        return self.features([point]).shape[1]

    def pairwise(self, xs: Sequence[Point], ys: Sequence[Point]) -> np.ndarray:
        """Dense distance matrix between two point lists."""
        fx = self.features(xs)
        fy = self.features(ys)
        if fx.shape[1] != fy.shape[1]:
            raise MetricMismatchError(f"dimension mismatch: {fx.shape[1]} vs {fy.shape[1]}")
        return pairwise_l2(fx, fy)


def _stack(rows) -> np.ndarray:
    if not rows:
        return np.zeros((0, 0))
    dims = {r.shape[0] for r in rows}
    if len(dims) != 1:
        raise MetricMismatchError(f"ragged point dimensions: {sorted(dims)}")
    return np.vstack(rows)


def pairwise_l2(fx: np.ndarray, fy: np.ndarray) -> np.ndarray:
    # Explicit differences rather than the Gram identity: keeps d(x, x) == 0
    # exactly and symmetry bitwise.
    diff = fx[:, None, :] - fy[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def fit_standardizer(demos: Sequence[Trajectory], state_only: bool = False, floor: float = STD_FLOOR) -> np.ndarray:
    """Inverse per-dimension population std over all pooled demonstration atoms."""
    rows = [p.vector(state_only=state_only) for traj in demos for p in traj.points]
    if len(rows) < 2:
        raise ValueError("fitting a standardizer needs at least 2 demonstration points")
    data = _stack(rows)
    sigma = data.std(axis=0)
    flat = sigma < floor
    if np.any(flat):
        logger.warning(
            "demonstration dimensions %s have zero variance; flooring std at %g",
            np.flatnonzero(flat).tolist(),
            floor,
        )
        sigma = np.where(flat, floor, sigma)
    return 1.0 / sigma


def fit_metric(demos: Sequence[Trajectory], kind: MetricKind | str = MetricKind.STANDARDIZED,
               embedding_table=None) -> MetricSpec:
    kind = MetricKind(kind)
    if kind is MetricKind.STANDARDIZED:
        return MetricSpec(kind, inv_std=fit_standardizer(demos))
    if kind is MetricKind.STATE_STANDARDIZED:
        return MetricSpec(kind, inv_std=fit_standardizer(demos, state_only=True))
    if kind is MetricKind.EMBEDDING:
        return MetricSpec(kind, embedding_table=embedding_table)
    return MetricSpec(kind)


def distance(spec: MetricSpec, x: Point, y: Point) -> float:
    f = spec.features([x, y])
    d = f[0] - f[1]
    return float(np.sqrt(np.dot(d, d)))
