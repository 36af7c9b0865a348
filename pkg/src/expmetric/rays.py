"""External-ray tracing through the escape potential, John-constant
estimation along rays, and singular-metric length accounting."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from .dynamics import UnicriticalMap
from .errors import DomainError, RayTracingError
from .metrics import SingularMetric

LANDING_TOL = 1e-6
NEWTON_MAX_ITER = 120


@dataclass(frozen=True)
class ExternalRay:
    theta: float
    polyline: List[complex]  # from potential G0 down toward the Julia set
    potentials: List[float]
    landing: Optional[complex]

    def arclengths_from_landing(self) -> np.ndarray:
        """Cumulative Euclidean arclength from the deep end of the polyline."""
        pts = np.array(self.polyline)
        segs = np.abs(np.diff(pts))
        return np.concatenate([[0.0], np.cumsum(segs[::-1])])[::-1]


def _boettcher_top(fmap: UnicriticalMap) -> float:
    # high enough that the Boettcher map is the identity to ~1e-10
    return max(12.0, 25.0 / (fmap.d - 1))


def _iterate(fmap: UnicriticalMap, z: complex, k: int):
    w = z
    dw = 1.0 + 0.0j
    for _ in range(k):
        if abs(w) > 1e120:
            # overshoot past the target equipotential: the partial values
            # still point the Newton step back toward the ray
            break
        dw = fmap.deriv(w) * dw
        w = fmap.evaluate(w)
    return w, dw


def _ray_point(fmap: UnicriticalMap, g: float, theta: float, seed: complex) -> complex:
    """The point of potential g on the ray of angle theta, by Newton iteration
    on f^m(z) = target, where m pushes the potential above the Boettcher
    regime and the target is the Boettcher-coordinate point there."""
    g_top = _boettcher_top(fmap)
    m = 0
    p = g
    while p < g_top:
        p *= fmap.d
        m += 1
    angle = (theta * fmap.d**m) % 1.0
    target = cmath.exp(p + 2j * math.pi * angle)
    z = seed
    best_z = seed
    best_raw = math.inf
    prev_raw = math.inf
    bounces = 0
    for _ in range(NEWTON_MAX_ITER):
        w, dw = _iterate(fmap, z, m)
        step = (w - target) / dw
        raw = abs(step)
        # damp: potential errors amplify doubly exponentially through f^m
        cap = 0.5 * max(abs(z), 1e-6)
        if raw > cap:
            step *= cap / raw
        z = z - step
        # roundoff through f^m limits the attainable residual, so the
        # tolerance must scale with |z| rather than stay absolute
        if raw < max(1e-14, 1e-7 * abs(z)):
            return z
        if raw < 0.5 * best_raw:
            best_raw = raw
            best_z = z
            bounces = 0
        elif raw > prev_raw:
            # the step size grew: roundoff noise, not the monotone
            # far-field phase where the log residual shrinks by ~1/iter
            bounces += 1
            if bounces >= 6 and best_raw < 1e-5 * max(abs(best_z), 1e-12):
                return best_z
        prev_raw = raw
    raise RayTracingError(
        f"Newton failed at potential {g:.3e}, angle {theta} (depth {m})"
    )


def trace_ray(
    fmap: UnicriticalMap,
    theta: float,
    depth: int,
    g0: float = 1.0,
    substeps: int = 4,
) -> ExternalRay:
    """Trace the external ray of angle ``theta`` (in turns) from potential g0
    down to g0/d^depth, one stored point per level.

    Each level is reached through ``substeps`` intermediate Newton solves so
    the seed never jumps far.  The landing estimate is set when the last two
    points differ by less than 1e-6.
    """
    if not 0.0 <= theta < 1.0:
        raise DomainError(f"angle must lie in [0, 1) turns, got {theta}")
    if depth > 60:
        raise DomainError("depth must be <= 60")

    # walk the seed down from the Boettcher regime to potential g0
    g_top = _boettcher_top(fmap)
    g = g_top
    z = cmath.exp(g + 2j * math.pi * theta)
    while g > g0:
        g = max(g0, g / fmap.d)
        z = _ray_point(fmap, g, theta, z)

    polyline = [z]
    potentials = [g0]
    shrink = fmap.d ** (-1.0 / substeps)
    for k in range(1, depth + 1):
        target_g = g0 / fmap.d**k
        try:
            for s in range(1, substeps + 1):
                g_sub = potentials[-1] * shrink**s if s < substeps else target_g
                z = _ray_point(fmap, g_sub, theta, z)
        except RayTracingError:
            # deep levels near an ill-conditioned landing point (e.g. a ray
            # landing on the critical point) eventually exceed the reachable
            # precision; keep the converged prefix, but propagate failures
            # that happen before the ray is meaningfully resolved
            if len(polyline) >= 5:
                break
            raise
        polyline.append(z)
        potentials.append(target_g)

    landing = None
    if abs(polyline[-1] - polyline[-2]) < LANDING_TOL:
        landing = polyline[-1]
    else:
        landing = _extrapolated_landing(polyline)
    return ExternalRay(theta, polyline, potentials, landing)


def _aitken(z0: complex, z1: complex, z2: complex) -> Optional[complex]:
    d1 = z1 - z0
    d2 = z2 - z1
    if abs(d1) == 0.0 or abs(d2) == 0.0:
        return z2
    if abs(d2) >= 0.9 * abs(d1):
        return None
    denom = d2 - d1
    if abs(denom) == 0.0:
        return z2
    return z2 - d2 * d2 / denom


def _extrapolated_landing(polyline: List[complex]) -> Optional[complex]:
    """Aitken limit of a geometrically contracting tail, accepted only when
    two sliding-window extrapolants agree within the landing tolerance."""
    if len(polyline) < 4:
        return None
    latest = _aitken(polyline[-3], polyline[-2], polyline[-1])
    previous = _aitken(polyline[-4], polyline[-3], polyline[-2])
    if latest is None or previous is None:
        return None
    if abs(latest - previous) >= LANDING_TOL:
        return None
    return latest


@dataclass(frozen=True)
class JohnRayEntry:
    theta: float
    constant: float
    worst_point: complex


def john_constant_along_ray(
    ray: ExternalRay, dist_to_julia: Callable[[complex], float]
) -> JohnRayEntry:
    """inf over ray points of dist(z, J) / arclength(landing -> z): the John
    condition specialized to geodesics terminating on the boundary."""
    if ray.landing is None:
        raise RayTracingError("ray has no landing estimate")
    arcs = ray.arclengths_from_landing()
    best = math.inf
    worst = ray.polyline[0]
    for z, a in zip(ray.polyline, arcs):
        if a <= 0.0:
            continue
        ratio = dist_to_julia(z) / a
        if ratio < best:
            best = ratio
            worst = z
    return JohnRayEntry(ray.theta, best, worst)


@dataclass(frozen=True)
class JohnReport:
    constant: float
    worst_point: complex
    ray_count: int
    entries: List[JohnRayEntry]


def john_report(entries: List[JohnRayEntry]) -> JohnReport:
    """Aggregate per-ray infima; the reported constant is capped at 1 since
    dist(z, J) never exceeds the path length to the boundary and any excess
    comes from the factor-bounded distance estimator."""
    worst = min(entries, key=lambda e: e.constant)
    return JohnReport(min(1.0, worst.constant), worst.worst_point, len(entries), list(entries))


def rho_length_of_ray(
    ray: ExternalRay,
    metric: SingularMetric,
    from_radius: float,
    base: Optional[complex] = None,
    refine: int = 8,
) -> float:
    """Midpoint-rule rho-length of the part of the ray inside B(base, 2r),
    where base defaults to the landing estimate.

    Each polyline segment is subdivided ``refine`` times; the density is
    integrable (alpha < 1) so the sum converges under refinement even when the
    landing point lies on the singular set.
    """
    if base is None:
        if ray.landing is None:
            raise RayTracingError("ray has no landing estimate to use as base")
        base = ray.landing
    radius = 2.0 * from_radius
    pts = np.array(ray.polyline)
    inside = np.abs(pts - base) <= radius
    if not inside.any():
        raise DomainError("no ray points inside B(base, 2r)")
    total = 0.0
    for a, b, ok_a, ok_b in zip(pts[:-1], pts[1:], inside[:-1], inside[1:]):
        if not (ok_a or ok_b):
            continue
        # clip the segment to the disk boundary where it straddles it
        if not ok_a:
            a = _clip_to_circle(a, b, base, radius)
        elif not ok_b:
            b = _clip_to_circle(b, a, base, radius)
        ts = (np.arange(refine) + 0.5) / refine
        mids = a + (b - a) * ts
        dens = metric.density_array(mids)
        seg = abs(b - a) / refine
        total += float(np.sum(dens[np.isfinite(dens)]) * seg)
    return total


def _clip_to_circle(outside: complex, inside: complex, center: complex, radius: float) -> complex:
    lo, hi = 0.0, 1.0  # parameter from inside toward outside
    for _ in range(60):
        mid = (lo + hi) / 2.0
        z = inside + (outside - inside) * mid
        if abs(z - center) <= radius:
            lo = mid
        else:
            hi = mid
    return inside + (outside - inside) * lo
