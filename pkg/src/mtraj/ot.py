"""Exact optimal transport between equal-size sampled trajectory sets.

The distance between two sets of K sampled trajectories is the uniform-
weight 1-Wasserstein distance of their empirical distributions: a
minimum-cost perfect matching between the samples, divided by K. The
ground metric between two trajectories is the mean pointwise Euclidean
distance over timesteps, so the value is commensurate with displacement
error metrics.

The assignment is solved exactly (shortest augmenting path with dual
potentials, O(K^3)); no entropic approximation is involved, which keeps
results deterministic and checkable against brute-force enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import LengthMismatch, MtrajError, PredictionSet, SizeMismatch, Trajectory


class InvalidMatrix(MtrajError):
    pass


@dataclass(frozen=True)
class Assignment:
    """A perfect matching: row i is assigned to column ``perm[i]``."""

    perm: tuple[int, ...]
    total_cost: float


def ground_distance(a: Trajectory, b: Trajectory) -> float:
    """Mean pointwise Euclidean distance between two equal-length trajectories."""
    if len(a) != len(b):
        raise LengthMismatch(f"trajectory lengths differ: {len(a)} vs {len(b)}")
    diff = a.xy - b.xy
    return float(np.sqrt((diff * diff).sum(axis=1)).mean())


def cost_matrix(a: PredictionSet, b: PredictionSet) -> np.ndarray:
    """Pairwise ground distances: ``C[i, j] = d(a[i], b[j])``."""
    if a.k != b.k:
        raise SizeMismatch(f"set sizes differ: {a.k} vs {b.k}")
    if a.horizon != b.horizon:
        raise LengthMismatch(f"trajectory lengths differ: {a.horizon} vs {b.horizon}")
    diff = a.stacked[:, None, :, :] - b.stacked[None, :, :, :]
    return np.sqrt((diff * diff).sum(axis=3)).mean(axis=2)


def _validate_cost(c) -> np.ndarray:
    arr = np.asarray(c, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise InvalidMatrix(f"cost matrix must be square, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise InvalidMatrix("cost matrix contains non-finite entries")
    if (arr < 0).any():
        raise InvalidMatrix("cost matrix contains negative entries")
    return arr


def solve_assignment(c) -> Assignment:
    """Exact minimum-total-cost perfect matching of a square cost matrix.

    Shortest-augmenting-path formulation with dual potentials; the
    returned total equals the global minimum over all K! permutations.
    """
    arr = _validate_cost(c)
    n = arr.shape[0]
    cost = arr.tolist()

    inf = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    match = [0] * (n + 1)  # match[j] = row assigned to column j (1-based, 0 = free)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = inf
            j1 = -1
            row = cost[i0 - 1]
            ui0 = u[i0]
            for j in range(1, n + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1

    perm = [0] * n
    for j in range(1, n + 1):
        perm[match[j] - 1] = j - 1
    # fsum: the total is correctly rounded, hence independent of row order
    total = math.fsum(cost[i][perm[i]] for i in range(n))
    return Assignment(perm=tuple(perm), total_cost=total)


def wasserstein(a: PredictionSet, b: PredictionSet) -> float:
    """Exact 1-Wasserstein distance between two equal-size trajectory sets."""
    c = cost_matrix(a, b)
    return solve_assignment(c).total_cost / a.k
