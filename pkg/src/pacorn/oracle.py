"""Test oracles: exact small-instance solver and random instance generation."""

from __future__ import annotations

import numpy as np
from numba import njit

from .instance import Instance

MAX_EXACT_N = 14


@njit(cache=True)
def _held_karp(dmat):
    n = dmat.shape[0]
    m = n - 1  # cities 1..n-1 live in the bitmask; city 0 is the anchor
    full = 1 << m
    inf = np.int64(1) << 60
    dp = np.full((full, m), inf, dtype=np.int64)
    parent = np.full((full, m), -1, dtype=np.int64)
    for j in range(m):
        dp[1 << j, j] = dmat[0, j + 1]
    for mask in range(1, full):
        for j in range(m):
            if (mask >> j) & 1 == 0:
                continue
            cur = dp[mask, j]
            if cur >= inf:
                continue
            for j2 in range(m):
                if (mask >> j2) & 1:
                    continue
                nmask = mask | (1 << j2)
                cand = cur + dmat[j + 1, j2 + 1]
                if cand < dp[nmask, j2]:
                    dp[nmask, j2] = cand
                    parent[nmask, j2] = j
    best = inf
    best_j = 0
    last = full - 1
    for j in range(m):
        cand = dp[last, j] + dmat[j + 1, 0]
        if cand < best:
            best = cand
            best_j = j
    order = np.empty(n, np.int64)
    order[0] = 0
    mask = last
    j = best_j
    for pos in range(n - 1, 0, -1):
        order[pos] = j + 1
        pj = parent[mask, j]
        mask ^= np.int64(1) << j
        j = pj
    return best, order


def exact_optimum(inst: Instance):
    """Provably optimal (order, length) for the current coordinates.

    Exponential dynamic program; refuses instances beyond 14 cities.
    """
    if inst.n > MAX_EXACT_N:
        raise ValueError(f"exact solver limited to n <= {MAX_EXACT_N}, got {inst.n}")
    dmat = np.empty((inst.n, inst.n), dtype=np.int64)
    for i in range(inst.n):
        dmat[i] = inst.distance_row(i)
    length, order = _held_karp(dmat)
    return order, int(length)


def generate_random_instance(n, bbox=(0.0, 1000.0, 0.0, 1000.0), seed=0, candidate_k=20) -> Instance:
    """Uniform random points in bbox = (x_min, x_max, y_min, y_max)."""
    if n < 3:
        raise ValueError("need at least 3 cities")
    x_min, x_max, y_min, y_max = bbox
    rng = np.random.default_rng(seed)
    coords = np.empty((n, 2), dtype=np.float64)
    coords[:, 0] = rng.uniform(x_min, x_max, n)
    coords[:, 1] = rng.uniform(y_min, y_max, n)
    return Instance(f"rnd{n}s{seed}", coords, candidate_k=candidate_k)
