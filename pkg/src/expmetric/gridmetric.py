"""Discretization of the singular path metric on a planar grid.

An 8-neighbor weighted grid graph realizes the path metric d_rho; shortest
paths approximate geodesic lengths, and log-log regression on sampled pairs
recovers the Hoelder exponent of the equivalence with the Euclidean metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .metrics import SingularMetric

# Octile metrics overestimate straight-line length by at most this factor
ANISOTROPY_FACTOR = 1.082


@dataclass
class PathMetricGrid:
    lo: complex
    hi: complex
    n_cols: int
    n_rows: int
    h: float
    metric: Optional[SingularMetric]
    graph: "coo_matrix" = field(repr=False)
    _dist_cache: dict = field(default_factory=dict, repr=False)

    def node_coords(self) -> Tuple[np.ndarray, np.ndarray]:
        xs = self.lo.real + self.h * np.arange(self.n_cols)
        ys = self.lo.imag + self.h * np.arange(self.n_rows)
        return xs, ys

    def nearest_node(self, z: complex) -> Tuple[int, complex]:
        i = int(round((z.real - self.lo.real) / self.h))
        j = int(round((z.imag - self.lo.imag) / self.h))
        i = min(max(i, 0), self.n_cols - 1)
        j = min(max(j, 0), self.n_rows - 1)
        node = j * self.n_cols + i
        pos = complex(self.lo.real + i * self.h, self.lo.imag + j * self.h)
        return node, pos

    def local_density(self, z: complex) -> float:
        if self.metric is None:
            return 1.0
        return self.metric.density_from_dist(
            max(self.metric.cloud.dist(z), self.h / 2.0)
        )

    def contains(self, z: complex) -> bool:
        return (self.lo.real <= z.real <= self.hi.real
                and self.lo.imag <= z.imag <= self.hi.imag)


def build_grid(
    metric: Optional[SingularMetric],
    bbox: Tuple[complex, complex],
    resolution: int,
) -> PathMetricGrid:
    """Grid over ``bbox`` with ``resolution`` columns; edge weights are
    density(midpoint) * edge length, with the distance to the singular set
    capped below by h/2 so weights stay finite.

    ``metric=None`` builds the Euclidean (density 1) grid.
    """
    if resolution < 16:
        raise ValueError("resolution must be >= 16")
    lo, hi = bbox
    width = hi.real - lo.real
    height = hi.imag - lo.imag
    if width <= 0 or height <= 0:
        raise ValueError("bbox must have positive width and height")
    n_cols = resolution
    h = width / (n_cols - 1)
    n_rows = int(round(height / h)) + 1
    hi = complex(hi.real, lo.imag + (n_rows - 1) * h)

    if metric is not None:
        margin = 2.0 * h
        pts = metric.cloud.points_complex
        if (pts.real.min() < lo.real + margin or pts.real.max() > hi.real - margin
                or pts.imag.min() < lo.imag + margin
                or pts.imag.max() > hi.imag - margin):
            raise ValueError("bbox must contain the cloud with margin >= 2h")

    xs = lo.real + h * np.arange(n_cols)
    ys = lo.imag + h * np.arange(n_rows)
    X, Y = np.meshgrid(xs, ys)  # index [row, col]
    Z = X + 1j * Y
    idx = np.arange(n_cols * n_rows).reshape(n_rows, n_cols)

    rows_e, cols_e, weights = [], [], []
    # (di, dj) over half the 8-neighborhood; the graph is symmetrized below
    for di, dj in ((1, 0), (0, 1), (1, 1), (1, -1)):
        if dj >= 0:
            a = idx[: n_rows - dj if dj else n_rows, : n_cols - di if di else n_cols]
            b = idx[dj:, di:]
            za = Z[: n_rows - dj if dj else n_rows, : n_cols - di if di else n_cols]
            zb = Z[dj:, di:]
        else:
            a = idx[-dj:, : n_cols - di]
            b = idx[:dj, di:]
            za = Z[-dj:, : n_cols - di]
            zb = Z[:dj, di:]
        length = h * math.hypot(di, dj)
        mid = ((za + zb) / 2.0).ravel()
        if metric is None:
            w = np.full(mid.shape, length)
        else:
            w = metric.density_array(mid, dist_floor=h / 2.0) * length
        rows_e.append(a.ravel())
        cols_e.append(b.ravel())
        weights.append(w)

    r = np.concatenate(rows_e)
    c = np.concatenate(cols_e)
    w = np.concatenate(weights)
    n = n_cols * n_rows
    graph = coo_matrix(
        (np.concatenate([w, w]), (np.concatenate([r, c]), np.concatenate([c, r]))),
        shape=(n, n),
    ).tocsr()
    return PathMetricGrid(lo, hi, n_cols, n_rows, h, metric, graph)


def _distances_from(grid: PathMetricGrid, source: int) -> np.ndarray:
    if source not in grid._dist_cache:
        grid._dist_cache[source] = dijkstra(
            grid.graph, directed=False, indices=source
        )
    return grid._dist_cache[source]


def grid_distance(grid: PathMetricGrid, z0: complex, z1: complex) -> float:
    """Shortest-path d_rho between the nodes nearest z0 and z1, plus a snapping
    correction of density * offset at each endpoint (each <= h * rho_local)."""
    if not (grid.contains(z0) and grid.contains(z1)):
        raise ValueError("query points must lie inside the grid bbox")
    if z0 == z1:
        return 0.0
    n0, p0 = grid.nearest_node(z0)
    n1, p1 = grid.nearest_node(z1)
    if n0 == n1:
        base = 0.0
    else:
        # query from the smaller index so (z0,z1) and (z1,z0) share a cache entry
        a, b = (n0, n1) if n0 <= n1 else (n1, n0)
        base = float(_distances_from(grid, a)[b])
    snap = (abs(z0 - p0) * grid.local_density(z0)
            + abs(z1 - p1) * grid.local_density(z1))
    return base + snap


def verify_lower_bound(grid: PathMetricGrid, samples: Sequence[Tuple[complex, complex]]):
    """Audit d_rho(z0,z1) >= |z0-z1| - 2h*rho_local on every sampled pair."""
    violations = []
    for z0, z1 in samples:
        d = grid_distance(grid, z0, z1)
        slack = 2.0 * grid.h * max(grid.local_density(z0), grid.local_density(z1))
        if d < abs(z0 - z1) - slack:
            violations.append((z0, z1, d))
    return {"checked": len(samples), "violations": violations}


@dataclass(frozen=True)
class HoelderFit:
    exponent: float
    constant: float
    r_squared: float
    sample_count: int

    def __post_init__(self):
        if not 0.0 < self.exponent <= 1.05:
            raise ValueError(f"degenerate fitted exponent {self.exponent}")


def holder_fit(
    grid: PathMetricGrid, samples: Sequence[Tuple[complex, complex]]
) -> HoelderFit:
    """Least-squares fit of log d_rho against log |z0 - z1|.

    Requires at least 50 pairs whose separations span two decades.
    """
    seps = np.array([abs(z1 - z0) for z0, z1 in samples])
    if len(samples) < 50:
        raise ValueError("need at least 50 sample pairs")
    if np.any(seps <= 0) or np.any(seps >= 1):
        raise ValueError("pair separations must lie in (0, 1)")
    if seps.max() / seps.min() < 100.0:
        raise ValueError("pair separations must span at least two decades")
    dists = np.array([grid_distance(grid, z0, z1) for z0, z1 in samples])
    slope, intercept = np.polyfit(np.log(seps), np.log(dists), 1)
    pred = slope * np.log(seps) + intercept
    resid = np.log(dists) - pred
    ss_tot = np.sum((np.log(dists) - np.log(dists).mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return HoelderFit(float(slope), float(math.exp(intercept)), float(r2), len(samples))


def uniform_upper_constant(
    grid: PathMetricGrid,
    samples: Sequence[Tuple[complex, complex]],
    alpha: float,
) -> float:
    """Smallest single C with d_rho(z0,z1) <= C |z0-z1|^(1-alpha) over the samples."""
    best = 0.0
    for z0, z1 in samples:
        sep = abs(z1 - z0)
        if sep == 0:
            continue
        best = max(best, grid_distance(grid, z0, z1) / sep ** (1.0 - alpha))
    return best
