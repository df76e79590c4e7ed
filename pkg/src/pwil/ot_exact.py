"""Exact 1-Wasserstein distance between uniform empirical measures.

The solver is a transportation simplex over integer supplies. Masses are
expressed in units of ``1/lcm(T, D)`` so every basic solution is integral and
the "is this flow zero" question never depends on float rounding.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .core import Coupling, EmpiricalMeasure
from .metric import MetricSpec

MAX_ORACLE_SIZE = 8


class UnsupportedMeasureError(ValueError):
    pass


@dataclass
class TransportSolution:
    """Integral optimal flow plus dual potentials of the final basis."""

    flow: np.ndarray
    u: np.ndarray
    v: np.ndarray
    basis: list[tuple[int, int]]
    pivots: int

    def objective(self, cost: np.ndarray):
        return (np.asarray(cost) * self.flow).sum()


def _least_cost_basis(cost, supply, demand):
    """Initial basic feasible solution by the least-cost rule.

    Exactly ``T + D - 1`` cells are returned; when a row and a column run out
    simultaneously only the row is retired, so a zero-flow basic cell appears
    later in that column.
    """
    T, D = cost.shape
    s = supply.astype(np.int64).copy()
    d = demand.astype(np.int64).copy()
    flow = np.zeros((T, D), dtype=np.int64)
    row_alive = np.ones(T, dtype=bool)
    col_alive = np.ones(D, dtype=bool)
    masked = cost.astype(np.float64).copy()
    basis = []
    for _ in range(T + D - 1):
        k = int(np.argmin(masked))
        i, j = divmod(k, D)
        x = min(s[i], d[j])
        flow[i, j] = x
        s[i] -= x
        d[j] -= x
        basis.append((i, j))
        if s[i] == 0 and row_alive.sum() > 1:
            row_alive[i] = False
            masked[i, :] = np.inf
        else:
            col_alive[j] = False
            masked[:, j] = np.inf
    return flow, basis


def _potentials(cost, row_adj, col_adj, T, D):
    u = np.zeros(T, dtype=cost.dtype)
    v = np.zeros(D, dtype=cost.dtype)
    seen_r = np.zeros(T, dtype=bool)
    seen_c = np.zeros(D, dtype=bool)
    seen_r[0] = True
    queue = deque([(0, 0)])
    while queue:
        side, node = queue.popleft()
        if side == 0:
            for j in row_adj[node]:
                if not seen_c[j]:
                    seen_c[j] = True
                    v[j] = cost[node, j] - u[node]
                    queue.append((1, j))
        else:
            for i in col_adj[node]:
                if not seen_r[i]:
                    seen_r[i] = True
                    u[i] = cost[i, node] - v[node]
                    queue.append((0, i))
    return u, v


def _tree_path(row_adj, col_adj, start_row, end_col):
    """Cells on the unique basis-tree path from row ``start_row`` to column ``end_col``."""
    parent = {(0, start_row): None}
    queue = deque([(0, start_row)])
    target = (1, end_col)
    while queue:
        node = queue.popleft()
        if node == target:
            break
        side, k = node
        nbrs = row_adj[k] if side == 0 else col_adj[k]
        for m in nbrs:
            nxt = (1 - side, m)
            if nxt not in parent:
                parent[nxt] = node
                queue.append(nxt)
    cells = []
    node = target
    while parent[node] is not None:
        prev = parent[node]
        if node[0] == 1:
            cells.append((prev[1], node[1]))
        else:
            cells.append((node[1], prev[1]))
        node = prev
    cells.reverse()
    return cells


def transportation_simplex(cost, supply, demand, max_pivots: int | None = None) -> TransportSolution:
    """Solve ``min <cost, x>`` over integral transport plans.

    ``supply`` and ``demand`` are nonnegative integers with equal totals.
    Entering cells follow Bland's rule (lowest flat index with negative
    reduced cost); leaving-cell ties go to the lowest flat index.
    Integer ``cost`` arrays are handled in exact integer arithmetic.
    """
    cost = np.asarray(cost)
    if not np.issubdtype(cost.dtype, np.integer):
        cost = cost.astype(np.float64)
    supply = np.asarray(supply, dtype=np.int64)
    demand = np.asarray(demand, dtype=np.int64)
    T, D = cost.shape
    if supply.shape != (T,) or demand.shape != (D,):
        raise ValueError("supply/demand lengths must match the cost matrix")
    if supply.sum() != demand.sum():
        raise ValueError("total supply must equal total demand")
    if np.any(supply < 0) or np.any(demand < 0):
        raise ValueError("supplies and demands must be nonnegative")

    flow, basis = _least_cost_basis(cost, supply, demand)
    row_adj = [set() for _ in range(T)]
    col_adj = [set() for _ in range(D)]
    for i, j in basis:
        row_adj[i].add(j)
        col_adj[j].add(i)
    in_basis = np.zeros((T, D), dtype=bool)
    for i, j in basis:
        in_basis[i, j] = True

    if np.issubdtype(cost.dtype, np.integer):
        tol = 0
    else:
        tol = 1e-12 * max(1.0, float(np.abs(cost).max(initial=0.0)))
    limit = max_pivots if max_pivots is not None else 50 * (T * D + T + D) + 1000

    pivots = 0
    while True:
        u, v = _potentials(cost, row_adj, col_adj, T, D)
        reduced = cost - u[:, None] - v[None, :]
        candidates = np.flatnonzero((reduced < -tol) & ~in_basis)
        if candidates.size == 0:
            break
        if pivots >= limit:
            raise RuntimeError(f"transportation simplex exceeded {limit} pivots")
        ei, ej = divmod(int(candidates[0]), D)
        path = _tree_path(row_adj, col_adj, ei, ej)
        minus = path[0::2]
        plus = path[1::2]
        theta = min(flow[c] for c in minus)
        leaving = min((c for c in minus if flow[c] == theta), key=lambda c: c[0] * D + c[1])
        for c in minus:
            flow[c] -= theta
        for c in plus:
            flow[c] += theta
        flow[ei, ej] += theta
        li, lj = leaving
        row_adj[li].discard(lj)
        col_adj[lj].discard(li)
        in_basis[li, lj] = False
        row_adj[ei].add(ej)
        col_adj[ej].add(ei)
        in_basis[ei, ej] = True
        pivots += 1

    final_basis = [(i, j) for i in range(T) for j in row_adj[i]]
    return TransportSolution(flow=flow, u=u, v=v, basis=final_basis, pivots=pivots)


def uniform_units(T: int, D: int) -> tuple[np.ndarray, np.ndarray, int]:
    """Integer supplies for uniform T- and D-atom measures, in units of 1/lcm."""
    L = math.lcm(T, D)
    return np.full(T, L // T, dtype=np.int64), np.full(D, L // D, dtype=np.int64), L


def solve_w1_matrix(dist: np.ndarray) -> tuple[float, Coupling]:
    """Exact W1 for uniform marginals given a precomputed T x D distance matrix."""
    dist = np.asarray(dist, dtype=np.float64)
    T, D = dist.shape
    supply, demand, L = uniform_units(T, D)
    sol = transportation_simplex(dist, supply, demand)
    coupling = Coupling(sol.flow / L)
    value = math.fsum((dist * sol.flow).ravel()) / L
    return value, coupling


def _check_uniform(m: EmpiricalMeasure, name: str):
    if not m.is_uniform:
        raise UnsupportedMeasureError(f"{name} has non-uniform weights; only uniform measures are supported")


def solve_w1(mu: EmpiricalMeasure, nu: EmpiricalMeasure, metric: MetricSpec) -> tuple[float, Coupling]:
    """Exact 1-Wasserstein distance and an optimal coupling."""
    _check_uniform(mu, "mu")
    _check_uniform(nu, "nu")
    dist = metric.pairwise(mu.points, nu.points)
    return solve_w1_matrix(dist)


def permutation_oracle(dist: np.ndarray) -> float:
    """Mean matched distance of the best permutation (square matrices only)."""
    dist = np.asarray(dist, dtype=np.float64)
    n, m = dist.shape
    if n != m:
        raise ValueError("permutation oracle needs a square matrix")
    if n > MAX_ORACLE_SIZE:
        raise ValueError(f"instance too large for enumeration (n={n} > {MAX_ORACLE_SIZE})")
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
    totals = dist[np.arange(n)[None, :], perms].sum(axis=1)
    return float(totals.min()) / n


def replicate_distance_matrix(dist: np.ndarray) -> np.ndarray:
    T, D = dist.shape
    L = math.lcm(T, D)
    return np.repeat(np.repeat(dist, L // T, axis=0), L // D, axis=1)


def solve_w1_unequal_oracle(mu: EmpiricalMeasure, nu: EmpiricalMeasure, metric: MetricSpec) -> float:
    """Brute-force W1 for tiny T != D via atom replication to a common size."""
    _check_uniform(mu, "mu")
    _check_uniform(nu, "nu")
    dist = metric.pairwise(mu.points, nu.points)
    return unequal_oracle_matrix(dist)


def unequal_oracle_matrix(dist: np.ndarray) -> float:
    T, D = np.shape(dist)
    if math.lcm(T, D) > MAX_ORACLE_SIZE:
        raise ValueError(f"instance too large for enumeration (lcm({T}, {D}) > {MAX_ORACLE_SIZE})")
    return permutation_oracle(replicate_distance_matrix(np.asarray(dist, dtype=np.float64)))


def per_step_costs(coupling: Coupling | np.ndarray, dist_matrix: np.ndarray) -> np.ndarray:
    """Row-wise transport cost: entry i is sum_j d[i, j] * coupling[i, j]."""
    entries = coupling.entries if isinstance(coupling, Coupling) else np.asarray(coupling, dtype=np.float64)
    dist_matrix = np.asarray(dist_matrix, dtype=np.float64)
    if entries.shape != dist_matrix.shape:
        raise ValueError(f"coupling shape {entries.shape} does not match distances {dist_matrix.shape}")
    return (entries * dist_matrix).sum(axis=1)
