"""JSONL readers and writers for trajectories, embeddings and rewards.

Trajectory lines look like ``{"episode": 0, "t": 3, "obs": [...], "act": [...]}``
with ``"act": null`` for state-only data. Embedding sidecars use
``{"episode": 0, "t": 3, "emb": [...]}``.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import IO, Iterable, Iterator, Optional, Sequence

import numpy as np

from .core import Point, Trajectory


class JSONLParseError(ValueError):
    def __init__(self, path, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path = path
        self.lineno = lineno


def _iter_records(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise JSONLParseError(path, lineno, f"invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise JSONLParseError(path, lineno, "expected a JSON object")
            yield lineno, rec


def _float_list(path, lineno, rec, name, allow_null=False):
    if name not in rec:
        raise JSONLParseError(path, lineno, f"missing field {name!r}")
    val = rec[name]
    if val is None and allow_null:
        return None
    if not isinstance(val, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in val):
        raise JSONLParseError(path, lineno, f"field {name!r} must be a list of numbers")
    return val


def _int_field(path, lineno, rec, name):
    val = rec.get(name)
    if not isinstance(val, int) or isinstance(val, bool):
        raise JSONLParseError(path, lineno, f"field {name!r} must be an integer")
    return val


def read_trajectories(path: str | Path, nominal_horizon: Optional[int] = None) -> list[Trajectory]:
    """Group lines by ``episode`` (first-appearance order), points ordered by ``t``.

    Lines carrying a ``"totals"`` key (reward summaries) are skipped.
    """
    episodes: dict[int, list[tuple[int, Point]]] = {}
    for lineno, rec in _iter_records(path):
        if "totals" in rec:
            continue
        ep = _int_field(path, lineno, rec, "episode")
        t = _int_field(path, lineno, rec, "t")
        obs = _float_list(path, lineno, rec, "obs")
        act = _float_list(path, lineno, rec, "act", allow_null=True)
        try:
            pt = Point(obs, act, key=(ep, t))
        except ValueError as exc:
            raise JSONLParseError(path, lineno, str(exc)) from None
        episodes.setdefault(ep, []).append((t, pt))
    trajs = []
    for ep, items in episodes.items():
        items.sort(key=lambda it: it[0])
        pts = tuple(p for _, p in items)
        horizon = nominal_horizon if nominal_horizon is not None else len(pts)
        trajs.append(Trajectory(pts, episode_id=ep, nominal_horizon=max(horizon, len(pts))))
    return trajs


def trajectory_records(traj: Trajectory) -> Iterator[dict]:
    for k, p in enumerate(traj.points):
        t = p.key[1] if p.key is not None else k
        yield {
            "episode": traj.episode_id,
            "t": t,
            "obs": p.state.tolist(),
            "act": None if p.action is None else p.action.tolist(),
        }


def dump_record(rec: dict, fh: IO[str]) -> None:
    # json uses repr() for floats, which round-trips exactly.
    fh.write(json.dumps(rec, allow_nan=False))
    fh.write("\n")


def write_trajectories(trajs: Iterable[Trajectory], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for traj in trajs:
            for rec in trajectory_records(traj):
                dump_record(rec, fh)


def read_embeddings(path: str | Path) -> dict[tuple[int, int], np.ndarray]:
    table = {}
    for lineno, rec in _iter_records(path):
        ep = _int_field(path, lineno, rec, "episode")
        t = _int_field(path, lineno, rec, "t")
        emb = _float_list(path, lineno, rec, "emb")
        table[(ep, t)] = np.asarray(emb, dtype=np.float64)
    return table


def write_embeddings(table: dict[tuple[int, int], Sequence[float]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for (ep, t), emb in sorted(table.items()):
            dump_record({"episode": ep, "t": t, "emb": [float(v) for v in emb]}, fh)
