"""Random-radius ball carving: single-scale partitions and their hierarchy.

Cluster centers are the net points of one level, processed in ascending index
order. Each center draws a radius from a truncated exponential on
[scale, 2*scale] whose density decays by a factor controlled by the dimension
parameter; every still-unassigned point inside the ball joins that center's
cluster.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import FilterStarvation
from .metric import REL_TOL, MetricSpace
from .nets import NetHierarchy
from .tours import Tour


def _thread_count() -> int:
    """Worker cap from TSP_THREADS; 0 (the default) means sequential."""
    try:
        return max(0, int(os.environ.get("TSP_THREADS", "0")))
    except ValueError:
        return 0


@dataclass(frozen=True)
class RadiusDistribution:
    """Truncated exponential on [a, 2a] with decay rate 8*ddim*ln2/a."""

    a: float
    ddim: float

    @property
    def beta(self) -> float:
        return 8.0 * self.ddim

    def pdf(self, r):
        r = np.asarray(r, dtype=float)
        b = self.beta
        norm = 2.0 ** b / (1.0 - 2.0 ** (-b)) * (b * math.log(2) / self.a)
        val = norm * np.power(2.0, -b * r / self.a)
        return np.where((r >= self.a) & (r <= 2 * self.a), val, 0.0)

    def cdf(self, r):
        r = np.asarray(r, dtype=float)
        b = self.beta
        inner = (2.0 ** (-b) - np.power(2.0, -b * np.clip(r, self.a, 2 * self.a) / self.a))
        val = inner * 2.0 ** b / (1.0 - 2.0 ** (-b))
        return np.where(r < self.a, 0.0, np.where(r > 2 * self.a, 1.0, val))

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        b = self.beta
        inner = 1.0 - u * (1.0 - 2.0 ** (-b))
        r = self.a * (1.0 - np.log2(inner) / b)
        return np.clip(r, self.a, 2 * self.a)


def sample_radius(a: float, ddim: float, rng) -> float:
    """Inverse-CDF draw from the truncated exponential on [a, 2a]."""
    if a <= 0 or ddim < 1:
        raise ValueError("need a > 0 and ddim >= 1")
    dist = RadiusDistribution(a=a, ddim=ddim)
    return float(dist.ppf(rng.random()))


def sample_radii(a: float, ddim: float, rng, size: int) -> np.ndarray:
    dist = RadiusDistribution(a=a, ddim=ddim)
    return dist.ppf(rng.random(size))


def _starvation_limit(n: int) -> int:
    return max(8, int(math.ceil(64 * math.log(max(n, 2)))))


@dataclass
class SingleScalePartition:
    level: int
    order: np.ndarray              # centers in carving order (ascending index)
    radii: dict                    # center -> drawn radius in [s^i, 2 s^i]
    assign_center: dict            # point -> assigned center
    assign_rank: dict              # point -> rank of that center in the order

    def clusters(self) -> dict:
        out = {}
        for p, c in self.assign_center.items():
            out.setdefault(c, []).append(p)
        return {c: sorted(v) for c, v in out.items()}


def partition_with_radii(space: MetricSpace, subset, h: NetHierarchy, level: int,
                         radii: dict) -> SingleScalePartition:
    """Carve ``subset`` by the level's centers with fixed radii."""
    subset = np.asarray(sorted(set(int(p) for p in subset)), dtype=np.intp)
    centers = h.net(level)
    d = space.pairwise(centers, subset)
    assign_center = {}
    assign_rank = {}
    unassigned = np.ones(len(subset), dtype=bool)
    for rank, c in enumerate(centers):
        r = radii[int(c)]
        thr = r + REL_TOL * max(1.0, r)
        hit = unassigned & (d[rank] <= thr)
        for t in np.flatnonzero(hit):
            assign_center[int(subset[t])] = int(c)
            assign_rank[int(subset[t])] = rank
        unassigned &= ~hit
        if not unassigned.any():
            break
    if unassigned.any():
        left = subset[unassigned].tolist()
        raise AssertionError(f"points {left} not covered at level {level}")
    return SingleScalePartition(level=level, order=np.asarray(centers),
                                radii=radii, assign_center=assign_center,
                                assign_rank=assign_rank)


def draw_level_radii(space: MetricSpace, h: NetHierarchy, level: int, ddim: float,
                     rng, radius_filter=None) -> dict:
    """One radius per center in carving order, resampling while the filter rejects."""
    a = h.radius(level)
    limit = _starvation_limit(space.n)
    radii = {}
    for c in h.net(level):
        c = int(c)
        for attempt in range(limit + 1):
            r = sample_radius(a, ddim, rng)
            if radius_filter is None or radius_filter(c, r):
                radii[c] = r
                break
        else:
            raise FilterStarvation(
                f"filter rejected {limit} consecutive radii for center {c} at level {level}")
    return radii


def single_scale_partition(space: MetricSpace, subset, h: NetHierarchy, level: int,
                           ddim: float, rng, radius_filter=None) -> SingleScalePartition:
    """Partition ``subset`` with freshly drawn radii at one level.

    radius_filter, when given, is a predicate (center, radius) -> bool; draws
    are repeated until accepted, bailing out after 64*log(n) consecutive
    rejections for one center.
    """
    radii = draw_level_radii(space, h, level, ddim, rng, radius_filter)
    return partition_with_radii(space, subset, h, level, radii)


@dataclass
class ClusterNode:
    level: int
    center: int
    radius: float
    members: tuple
    children: list = field(default_factory=list)

    def walk(self):
        yield self
        for ch in self.children:
            yield from ch.walk()


@dataclass
class ClusterTree:
    root: ClusterNode
    s: float

    def nodes(self):
        return list(self.root.walk())

    def max_branching(self) -> int:
        return max((len(n.children) for n in self.nodes()), default=0)


def hierarchical_clustering(space: MetricSpace, h: NetHierarchy, ddim: float, rng,
                            radius_filters=None) -> ClusterTree:
    """Stack single-scale partitions from the top level down to level 0.

    Each node's members are carved by the next level down; the recursion stops
    at level 0, so leaves are bottom-level clusters (small by packing, but not
    necessarily singletons).
    """
    all_points = tuple(range(space.n))
    filt = (radius_filters or {}).get(h.top)
    top_part = single_scale_partition(space, all_points, h, h.top, ddim, rng, filt)
    top_clusters = top_part.clusters()
    if len(top_clusters) != 1:
        raise AssertionError("top-level partition must produce a single cluster")
    center, members = next(iter(top_clusters.items()))
    root = ClusterNode(level=h.top, center=center, radius=top_part.radii[center],
                       members=tuple(members))

    def subdivide(node):
        if node.level == 0:
            return
        lvl = node.level - 1
        f = (radius_filters or {}).get(lvl)
        part = single_scale_partition(space, node.members, h, lvl, ddim, rng, f)
        for c, mem in sorted(part.clusters().items()):
            child = ClusterNode(level=lvl, center=c, radius=part.radii[c],
                                members=tuple(mem))
            node.children.append(child)
            subdivide(child)

    subdivide(root)
    return ClusterTree(root=root, s=h.s)


def estimate_cut_probability(space: MetricSpace, h: NetHierarchy, u: int, v: int,
                             level: int, trials: int, ddim: float, rng) -> float:
    """Fraction of independent level partitions assigning u and v to different centers.

    Vectorized over trials: a point's cluster is the first center in carving
    order whose drawn ball covers it, so only the two distance rows matter.
    Per-trial generators are split deterministically from ``rng``, making the
    estimate independent of any worker-level parallelism.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if u == v:
        return 0.0
    centers = h.net(level)
    a = h.radius(level)
    du = space.pairwise([u], centers)[0]
    dv = space.pairwise([v], centers)[0]
    streams = rng.spawn(trials)
    dist = RadiusDistribution(a=a, ddim=ddim)

    def draw(g):
        return dist.ppf(g.random(len(centers)))

    workers = _thread_count()
    if workers > 0:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            radii = np.stack(list(pool.map(draw, streams)))
    else:
        radii = np.stack([draw(g) for g in streams])
    tol = REL_TOL * max(1.0, 2 * a)
    cover_u = radii >= du[None, :] - tol
    cover_v = radii >= dv[None, :] - tol
    first_u = np.argmax(cover_u, axis=1)
    first_v = np.argmax(cover_v, axis=1)
    # Covering at radius >= a guarantees some ball covers each point.
    cut = int(np.sum(first_u != first_v))
    return cut / trials


@dataclass
class ValidRadiusSet:
    """Radii in [a, 2a] that cut few nearby short tour edges around one center.

    Cut counting is piecewise constant between the sorted endpoint distances,
    so membership, rejected length, and rejected probability mass are exact.
    """

    a: float
    threshold: float
    spans: list                    # (d_near, d_far) per relevant edge

    def cut_count(self, r: float) -> int:
        tol = REL_TOL * max(1.0, r)
        return sum(1 for lo, hi in self.spans if lo <= r + tol and r + tol < hi)

    def __call__(self, center: int, r: float) -> bool:
        return self.cut_count(r) < self.threshold

    def accepts(self, r: float) -> bool:
        return self.cut_count(r) < self.threshold

    def rejected_intervals(self) -> list:
        lo, hi = self.a, 2 * self.a
        points = sorted({lo, hi} | {x for s in self.spans for x in s if lo < x < hi})
        out = []
        for left, right in zip(points, points[1:]):
            mid = 0.5 * (left + right)
            if not self.accepts(mid):
                out.append((left, right))
        return out

    def rejected_measure(self) -> float:
        return sum(r - l for l, r in self.rejected_intervals())

    def rejected_mass(self, ddim: float) -> float:
        dist = RadiusDistribution(a=self.a, ddim=ddim)
        return float(sum(dist.cdf(r) - dist.cdf(l) for l, r in self.rejected_intervals()))


def valid_radius_set(space: MetricSpace, h: NetHierarchy, u: int, level: int,
                     tour: Tour, q: float, ddim: float) -> ValidRadiusSet:
    """Predicate over [s^level, 2 s^level] accepting radii that cut fewer than
    9*q*2^(3 ddim)*ddim of the tour's short edges near ``u``.

    Short edges are transitions of length at most s^level with an endpoint
    within 2 s^level of u; a radius cuts an edge when the ball around u
    separates its endpoints.
    """
    a = h.radius(level)
    threshold = 9.0 * q * (2.0 ** (3 * ddim)) * ddim
    tol_len = a + REL_TOL * max(1.0, a)
    near = 2 * a + REL_TOL * max(1.0, 2 * a)
    row = space.row(u)
    spans = []
    for x, y in tour.transitions():
        if x == y:
            continue
        if space.dist(x, y) > tol_len:
            continue
        if row[x] > near and row[y] > near:
            continue
        lo, hi = sorted((float(row[x]), float(row[y])))
        if lo != hi:
            spans.append((lo, hi))
    return ValidRadiusSet(a=a, threshold=threshold, spans=spans)
