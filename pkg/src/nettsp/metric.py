"""Finite metric spaces: validation, normalization, ball queries, doubling estimates.

A space is backed either by a coordinate array (Euclidean, distances computed
on demand) or by an explicit symmetric matrix. All boundary comparisons against
a radius resolve toward inclusion at relative tolerance 1e-9, so "on the ball
boundary" ties are deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateInstance

REL_TOL = 1e-9


def within(d, radius):
    """True iff d <= radius, breaking boundary ties toward inclusion."""
    return d <= radius + REL_TOL * max(1.0, abs(radius))


def below(d, threshold):
    """True iff d < threshold by a clear margin (the strict counterpart of within)."""
    return d < threshold - REL_TOL * max(1.0, abs(threshold))


@dataclass(frozen=True)
class MetricSpace:
    """Finite point set 0..n-1 with a symmetric distance oracle.

    Exactly one of ``coords`` / ``matrix`` is set. ``scale`` is the cumulative
    factor applied by :func:`normalize`; divide reported weights by it to
    recover the input's units.
    """

    coords: Optional[np.ndarray] = None
    matrix: Optional[np.ndarray] = None
    scale: float = 1.0

    def __post_init__(self):
        if (self.coords is None) == (self.matrix is None):
            raise ValueError("exactly one of coords/matrix must be given")

    @property
    def n(self) -> int:
        if self.coords is not None:
            return self.coords.shape[0]
        return self.matrix.shape[0]

    def dist(self, i: int, j: int) -> float:
        if self.matrix is not None:
            return float(self.matrix[i, j])
        return float(np.linalg.norm(self.coords[i] - self.coords[j]))

    def pairwise(self, rows=None, cols=None) -> np.ndarray:
        """Distance submatrix, computed fresh on every call (no caching)."""
        if rows is None:
            rows = np.arange(self.n)
        else:
            rows = np.asarray(rows, dtype=np.intp)
        if cols is None:
            cols = np.arange(self.n)
        else:
            cols = np.asarray(cols, dtype=np.intp)
        if self.matrix is not None:
            return self.matrix[np.ix_(rows, cols)].astype(float)
        a = self.coords[rows]
        b = self.coords[cols]
        diff = a[:, None, :] - b[None, :, :]
        return np.sqrt(np.sum(diff * diff, axis=2))

    def row(self, i: int) -> np.ndarray:
        """Distances from point i to every point."""
        if self.matrix is not None:
            return self.matrix[i].astype(float)
        diff = self.coords - self.coords[i]
        return np.sqrt(np.sum(diff * diff, axis=1))

    def diameter(self) -> float:
        if self.n < 2:
            return 0.0
        return float(max(self.row(i).max() for i in range(self.n)))

    def min_gap(self):
        """Smallest interpoint distance and one pair attaining it."""
        best = math.inf
        pair = (0, 0)
        for i in range(self.n - 1):
            r = self.row(i)[i + 1:]
            j = int(np.argmin(r))
            if r[j] < best:
                best = float(r[j])
                pair = (i, i + 1 + j)
        return best, pair


def from_points(points) -> MetricSpace:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    return MetricSpace(coords=arr)


def from_matrix(matrix, scale: float = 1.0) -> MetricSpace:
    arr = np.asarray(matrix, dtype=float)
    return MetricSpace(matrix=arr, scale=scale)


def restrict(space: MetricSpace, indices) -> MetricSpace:
    """Sub-space induced by ``indices`` (local index k maps to indices[k])."""
    idx = np.asarray(sorted(indices), dtype=np.intp)
    if space.coords is not None:
        return MetricSpace(coords=space.coords[idx], scale=space.scale)
    return MetricSpace(matrix=space.matrix[np.ix_(idx, idx)], scale=space.scale)


@dataclass
class ValidationReport:
    passed: bool
    violations: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)


def validate_metric(space: MetricSpace, max_listed: int = 100, seed: int = 0) -> ValidationReport:
    """Check symmetry, zero diagonal, nonnegativity and the triangle inequality.

    Triangles are checked exhaustively for n <= 200 and on 10*n^2 sampled
    triples above that. Failures are reported, never raised.
    """
    n = space.n
    report = ValidationReport(passed=True)
    d = space.pairwise()
    report.checks["finite"] = bool(np.isfinite(d).all())
    report.checks["nonnegative"] = bool((d >= -REL_TOL).all())
    report.checks["zero_diagonal"] = bool(np.abs(np.diag(d)).max(initial=0.0) <= REL_TOL)
    sym_err = float(np.abs(d - d.T).max(initial=0.0))
    report.checks["symmetric"] = sym_err <= REL_TOL * max(1.0, float(d.max(initial=0.0)))
    tol = REL_TOL * max(1.0, float(d.max(initial=0.0)))

    if n <= 200:
        exhaustive = True
        for k in range(n):
            slack = d - (d[:, k][:, None] + d[k][None, :])
            bad = np.argwhere(slack > tol)
            for i, j in bad:
                report.violations.append((int(i), int(j), int(k), float(slack[i, j])))
    else:
        exhaustive = False
        rng = np.random.default_rng(seed)
        m = 10 * n * n
        ii = rng.integers(0, n, size=m)
        jj = rng.integers(0, n, size=m)
        kk = rng.integers(0, n, size=m)
        slack = d[ii, jj] - (d[ii, kk] + d[kk, jj])
        for t in np.flatnonzero(slack > tol):
            report.violations.append((int(ii[t]), int(jj[t]), int(kk[t]), float(slack[t])))
    report.checks["triangle_exhaustive"] = exhaustive
    report.violations = report.violations[:max_listed]

    report.passed = (
        report.checks["finite"]
        and report.checks["nonnegative"]
        and report.checks["zero_diagonal"]
        and report.checks["symmetric"]
        and not report.violations
    )
    return report


def normalize(space: MetricSpace, eps: float = 0.05, snap: bool = False) -> MetricSpace:
    """Rescale so the minimum interpoint distance is exactly 1.

    With ``snap=True`` and coordinates present, points are first moved onto a
    grid of pitch eps*diam/n, which bounds the diameter relative to n at the
    cost of perturbing the optimum by an eps fraction. Raises
    DegenerateInstance if two points coincide (before or after snapping).
    """
    if space.n < 2:
        raise ValueError("normalize requires at least 2 points")
    if snap and space.coords is not None:
        diam = space.diameter()
        pitch = eps * diam / space.n
        if pitch > 0:
            snapped = np.round(space.coords / pitch) * pitch
            space = MetricSpace(coords=snapped, scale=space.scale)
    gap, pair = space.min_gap()
    if gap <= 0:
        raise DegenerateInstance(f"points {pair[0]} and {pair[1]} coincide")
    factor = 1.0 / gap
    if space.coords is not None:
        return MetricSpace(coords=space.coords * factor, scale=space.scale * factor)
    return MetricSpace(matrix=space.matrix * factor, scale=space.scale * factor)


def ball(space: MetricSpace, center: int, radius: float) -> np.ndarray:
    """Indices of points at distance <= radius from center (center included)."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    row = space.row(center)
    return np.flatnonzero(row <= radius + REL_TOL * max(1.0, radius))


def annulus(space: MetricSpace, center: int, r1: float, r2: float) -> np.ndarray:
    """ball(center, r2) minus ball(center, r1)."""
    if not 0 <= r1 <= r2:
        raise ValueError("need 0 <= r1 <= r2")
    outer = ball(space, center, r2)
    inner = set(ball(space, center, r1).tolist())
    return np.array([p for p in outer if p not in inner], dtype=np.intp)


@dataclass
class DoublingEstimate:
    """Greedy-cover upper estimate of the doubling constant.

    lambda_upper is the largest number of half-radius balls the farthest-point
    greedy needed for any audited ball; ddim_upper = log2(lambda_upper),
    floored at 1. Exact doubling constants are not computed.
    """

    lambda_upper: int
    ddim_upper: float
    audited: int


def greedy_half_cover(space: MetricSpace, center: int, radius: float) -> int:
    """Number of radius/2 balls the farthest-point greedy uses to cover B(center, radius)."""
    pts = ball(space, center, radius)
    if len(pts) == 0:
        return 1
    sub = space.pairwise(pts, pts)
    half = radius / 2.0
    thr = half + REL_TOL * max(1.0, half)
    start = int(np.flatnonzero(pts == center)[0]) if center in pts else 0
    mind = sub[start].copy()
    count = 1
    while True:
        far = int(np.argmax(mind))
        if mind[far] <= thr:
            return count
        mind = np.minimum(mind, sub[far])
        count += 1


def estimate_doubling(space: MetricSpace, audit_balls: int = 64, seed: int = 0) -> DoublingEstimate:
    """Audit sampled balls with greedy half-radius covers; report the worst count.

    The result upper-bounds the cover number of every audited ball, which is
    the only guarantee downstream packing checks rely on.
    """
    n = space.n
    if n < 2:
        return DoublingEstimate(lambda_upper=1, ddim_upper=1.0, audited=0)
    rng = np.random.default_rng(seed)
    diam = space.diameter()
    lam = 1
    audited = 0
    # Always audit the whole space a few times from distinct centers.
    fixed_centers = list(range(min(n, 4)))
    for c in fixed_centers:
        for r in (diam, diam / 2.0):
            if r > 0:
                lam = max(lam, greedy_half_cover(space, c, r))
                audited += 1
    while audited < audit_balls:
        c = int(rng.integers(0, n))
        anchor = int(rng.integers(0, n))
        r = space.dist(c, anchor) * float(rng.uniform(0.5, 1.5))
        if r <= 0:
            r = diam
        lam = max(lam, greedy_half_cover(space, c, min(r, diam)))
        audited += 1
    return DoublingEstimate(lambda_upper=lam, ddim_upper=max(1.0, math.log2(lam)), audited=audited)
