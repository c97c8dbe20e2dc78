"""Exact TSP oracles and classical baselines used to validate everything else."""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .errors import OddParity, TooLarge
from .metric import MetricSpace
from .tours import (Tour, dedupe_visits, euler_trail, mst, odd_matching_by_tree,
                    tour_weight)

BRUTE_MAX = 10
HELD_KARP_MAX = 18
MATCHING_BRUTE_MAX = 12
MATCHING_EXACT_MAX = 16


@dataclass
class OracleResult:
    tour: Tour
    weight: float
    method: str
    exact: bool


def brute_force_tsp(space: MetricSpace, max_n: int = BRUTE_MAX) -> OracleResult:
    """Minimum over all (n-1)!/2 closed tours anchored at point 0."""
    n = space.n
    if n > max_n:
        raise TooLarge(f"n={n} exceeds brute-force ceiling {max_n}")
    if n == 1:
        return OracleResult(Tour((0,)), 0.0, "brute", True)
    d = space.pairwise()
    best = math.inf
    best_seq = None
    rest = list(range(1, n))
    for perm in itertools.permutations(rest):
        if n > 2 and perm[0] > perm[-1]:
            continue
        w = d[0, perm[0]] + d[perm[-1], 0]
        for a, b in zip(perm, perm[1:]):
            w += d[a, b]
        if w < best:
            best = w
            best_seq = (0,) + perm
    return OracleResult(Tour(best_seq), float(best), "brute", True)


def held_karp_tsp(space: MetricSpace, max_n: int = HELD_KARP_MAX) -> OracleResult:
    """Exact optimum by dynamic programming over vertex subsets.

    States are (visited mask, last vertex) anchored at vertex 0; layers are
    processed by subset size with the transition minimization vectorized.
    """
    n = space.n
    if n > max_n:
        raise TooLarge(f"n={n} exceeds held-karp ceiling {max_n}")
    if n == 1:
        return OracleResult(Tour((0,)), 0.0, "held_karp", True)
    if n == 2:
        w = 2.0 * space.dist(0, 1)
        return OracleResult(Tour((0, 1)), w, "held_karp", True)
    d = space.pairwise()
    size = 1 << n
    dp = np.full((size, n), np.inf)
    parent = np.full((size, n), -1, dtype=np.int8)
    dp[1, 0] = 0.0
    masks_by_count = defaultdict(list)
    for mask in range(size):
        if mask & 1:
            masks_by_count[bin(mask).count("1")].append(mask)
    for count in range(1, n):
        for mask in masks_by_count[count]:
            row = dp[mask]
            active = np.flatnonzero(np.isfinite(row))
            if len(active) == 0:
                continue
            cand = row[active, None] + d[active, :]
            pick = np.argmin(cand, axis=0)
            vals = cand[pick, np.arange(n)]
            for j in range(n):
                if mask & (1 << j):
                    continue
                nm = mask | (1 << j)
                if vals[j] < dp[nm, j]:
                    dp[nm, j] = vals[j]
                    parent[nm, j] = active[pick[j]]
    full = size - 1
    totals = dp[full] + d[:, 0]
    totals[0] = np.inf
    last = int(np.argmin(totals))
    weight = float(totals[last])
    seq = []
    mask = full
    cur = last
    while cur != -1:
        seq.append(cur)
        prev = int(parent[mask, cur])
        mask ^= 1 << cur
        cur = prev
    seq.reverse()
    return OracleResult(Tour(tuple(seq)), weight, "held_karp", True)


def nearest_neighbor_tsp(space: MetricSpace) -> OracleResult:
    """Greedy baseline from point 0, ties to the lowest index."""
    n = space.n
    seq = [0]
    remaining = set(range(1, n))
    cur = 0
    while remaining:
        row = space.row(cur)
        nxt = min(remaining, key=lambda p: (row[p], p))
        seq.append(nxt)
        remaining.discard(nxt)
        cur = nxt
    t = Tour(tuple(seq))
    return OracleResult(t, tour_weight(space, t), "nearest_neighbor", False)


def brute_force_matching(space: MetricSpace, vertices, max_n: int = MATCHING_BRUTE_MAX):
    """Exact minimum-weight perfect matching by recursion over pairings."""
    verts = sorted(set(int(p) for p in vertices))
    if len(verts) % 2 != 0:
        raise OddParity(f"{len(verts)} vertices cannot be perfectly matched")
    if len(verts) > max_n:
        raise TooLarge(f"{len(verts)} vertices exceeds matching ceiling {max_n}")
    if not verts:
        return [], 0.0

    best = {"w": math.inf, "pairs": None}

    def rec(pool, acc, w):
        if w >= best["w"]:
            return
        if not pool:
            best["w"] = w
            best["pairs"] = list(acc)
            return
        a = pool[0]
        for t in range(1, len(pool)):
            b = pool[t]
            rest = pool[1:t] + pool[t + 1:]
            acc.append((a, b))
            rec(rest, acc, w + space.dist(a, b))
            acc.pop()

    rec(verts, [], 0.0)
    return best["pairs"], float(best["w"])


def _exact_matching_dp(space: MetricSpace, verts):
    """Min-weight perfect matching over up to MATCHING_EXACT_MAX vertices (bitmask DP)."""
    k = len(verts)
    d = space.pairwise(verts, verts)
    size = 1 << k
    dp = np.full(size, np.inf)
    choice = np.full(size, -1, dtype=np.int64)
    dp[0] = 0.0
    for mask in range(size):
        if not np.isfinite(dp[mask]):
            continue
        free = [t for t in range(k) if not mask & (1 << t)]
        if not free:
            continue
        a = free[0]
        for b in free[1:]:
            nm = mask | (1 << a) | (1 << b)
            w = dp[mask] + d[a, b]
            if w < dp[nm]:
                dp[nm] = w
                choice[nm] = a * k + b
    pairs = []
    mask = size - 1
    while mask:
        enc = int(choice[mask])
        a, b = divmod(enc, k)
        pairs.append((int(verts[a]), int(verts[b])))
        mask ^= (1 << a) | (1 << b)
    return pairs, float(dp[size - 1])


def christofides(space: MetricSpace, exact_matching_max: int = MATCHING_EXACT_MAX) -> OracleResult:
    """MST + matching on odd-degree vertices + Euler circuit + shortcut.

    The matching is exact (subset DP) when at most ``exact_matching_max`` odd
    vertices exist, else the tree-based matching is used; the method tag
    records which, since only the exact mode carries the 1.5 guarantee.
    """
    n = space.n
    if n < 2:
        return OracleResult(Tour((0,)), 0.0, "christofides_exact", False)
    tree = mst(space, range(n))
    deg = defaultdict(int)
    for u, v in tree:
        deg[u] += 1
        deg[v] += 1
    odd = sorted(v for v in range(n) if deg[v] % 2 == 1)
    if len(odd) <= exact_matching_max:
        pairs, _ = _exact_matching_dp(space, odd) if odd else ([], 0.0)
        method = "christofides_exact"
    else:
        pairs = odd_matching_by_tree(space, tree, odd)
        method = "christofides_tree"
    edges = list(tree) + list(pairs)
    if not edges:
        seq = tuple(range(n))
        t = Tour(seq)
        return OracleResult(t, tour_weight(space, t), method, False)
    verts, _ = euler_trail(edges, min(min(e) for e in edges), min(min(e) for e in edges))
    t = dedupe_visits(Tour(tuple(verts[:-1] if len(verts) > 1 else verts), closed=True))
    missing = set(range(n)) - t.visits()
    if missing:
        # Isolated points only occur for n == 1; guarded above.
        raise AssertionError(f"christofides missed points {sorted(missing)}")
    return OracleResult(t, tour_weight(space, t), method, False)
