"""Branch-resolved backward orbits of small disks and expansion verification.

A backward orbit pulls a disk B(z0, eps) through inverse branches of f,
tracking the center orbit, boundary polygons, diameter estimates, and a
per-level case classification (univalent away from the postcritical cloud,
univalent meeting it, or passing through the critical point).  Expansion
ratios weighted by the singular density are fitted for exponential growth.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from .dynamics import PostcriticalCloud, UnicriticalMap, orbit_derivative_magnitude
from .errors import BranchResolutionError, SamplingResolutionError
from .metrics import SingularMetric

CONSISTENCY_TOL = 1e-10
CLOUD_EXCLUSION = 1e-9


class CaseLabel(enum.Enum):
    UNIVALENT_NO_P = "univalent-no-p"
    UNIVALENT_MEETS_P = "univalent-meets-p"
    CRITICAL = "critical"


def preimages(fmap: UnicriticalMap, z: complex) -> List[complex]:
    """The d solutions of w^d = z - c: principal root times the d-th roots of
    unity.  All collapse to 0 at the critical value z = c."""
    w = z - fmap.c
    if w == 0:
        return [0.0 + 0.0j] * fmap.d
    r = abs(w) ** (1.0 / fmap.d)
    phi = cmath.phase(w) / fmap.d
    return [
        r * cmath.exp(1j * (phi + 2.0 * math.pi * k / fmap.d))
        for k in range(fmap.d)
    ]


def _nearest_preimage(
    fmap: UnicriticalMap, z: complex, anchor: complex, strict: bool = True
) -> complex:
    cands = preimages(fmap, z)
    dists = sorted((abs(w - anchor), i) for i, w in enumerate(cands))
    if (strict and len(dists) > 1
            and dists[1][0] - dists[0][0] < 1e-12 and dists[0][0] > 1e-9):
        raise BranchResolutionError(
            f"ambiguous inverse branch at {z}: two preimages nearly equidistant"
        )
    return cands[dists[0][1]]


@dataclass
class BackwardDiskOrbit:
    fmap: UnicriticalMap
    z0: complex
    epsilon: float
    cloud: Optional[PostcriticalCloud] = None
    n_boundary: int = 64
    points: List[complex] = field(default_factory=list)
    branch_choices: List[int] = field(default_factory=list)
    boundary: List[np.ndarray] = field(default_factory=list)
    diams: List[float] = field(default_factory=list)
    labels: List[Optional[CaseLabel]] = field(default_factory=list)

    def __post_init__(self):
        if not self.points:
            self.points = [complex(self.z0)]
            angles = 2.0 * math.pi * np.arange(self.n_boundary) / self.n_boundary
            circle = self.z0 + self.epsilon * np.exp(1j * angles)
            self.boundary = [circle]
            self.diams = [_polygon_diameter(circle)]
            self.labels = [None]  # level 0 is the reference disk, not a pullback

    @property
    def depth(self) -> int:
        return len(self.points) - 1

    def critical_level(self) -> Optional[int]:
        for n, lab in enumerate(self.labels):
            if lab is CaseLabel.CRITICAL:
                return n
        return None


def _polygon_diameter(samples: np.ndarray) -> float:
    d = np.abs(samples[:, None] - samples[None, :])
    return float(d.max())


def winding_number(polygon: np.ndarray, point: complex) -> int:
    """Winding number of a closed sample polygon around ``point``."""
    v = polygon - point
    angles = np.angle(v)
    d = np.diff(np.concatenate([angles, angles[:1]]))
    d = (d + math.pi) % (2.0 * math.pi) - math.pi
    return int(round(d.sum() / (2.0 * math.pi)))


def point_in_polygon(polygon: np.ndarray, point: complex) -> bool:
    """Even-odd (ray casting) test against the closed sample polygon."""
    x, y = point.real, point.imag
    px = polygon.real
    py = polygon.imag
    qx = np.roll(px, -1)
    qy = np.roll(py, -1)
    crosses = (py <= y) != (qy <= y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = px + (y - py) * (qx - px) / (qy - py)
    hits = crosses & (xint > x)
    return bool(hits.sum() % 2 == 1)


BranchRule = Union[str, Callable[[List[complex], int], int]]


def _choose_branch(
    rule: BranchRule, cands: List[complex], level: int, rng: Optional[np.random.Generator]
) -> int:
    if callable(rule):
        return rule(cands, level)
    if rule == "random-seeded":
        if rng is None:
            raise ValueError("random-seeded branch rule requires an rng")
        return int(rng.integers(len(cands)))
    if rule.startswith("fixed-index"):
        parts = rule.split(":")
        return int(parts[1]) if len(parts) > 1 else 0
    if rule == "toward-critical":
        return min(range(len(cands)), key=lambda i: abs(cands[i]))
    raise ValueError(f"unknown branch rule {rule!r}")


def _predicted_lift(
    fmap: UnicriticalMap, target: complex, prev_target: complex, prev_lift: complex
) -> complex:
    """First-order prediction of the continuous lift of ``target`` from the
    lift of the neighboring sample: an inverse-derivative Euler step.  Breaks
    ties cleanly where the lifted curve crosses a symmetry axis."""
    dw = fmap.deriv(prev_lift)
    step = target - prev_target
    if abs(dw) > 10.0 * abs(step):
        return prev_lift + step / dw
    return prev_lift


def _lift_boundary(
    fmap: UnicriticalMap, prev: np.ndarray, anchor: complex
) -> Tuple[np.ndarray, bool]:
    """Continuous lift of the boundary polygon through f^-1, anchored near the
    new center.  If the lift fails to close after one loop the level is a
    branched (critical) pullback and the loop is continued for d turns,
    returning a polygon with d times as many samples."""
    m = len(prev)
    pred0 = _predicted_lift(fmap, complex(prev[0]), fmap.evaluate(anchor), anchor)
    # a tie here only shifts where along the lifted loop we start
    lifted = [_nearest_preimage(fmap, complex(prev[0]), pred0, strict=False)]
    for turn in range(fmap.d):
        for j in range(1, m):
            pred = _predicted_lift(
                fmap, complex(prev[j]), complex(prev[j - 1]), lifted[-1]
            )
            lifted.append(_nearest_preimage(fmap, complex(prev[j]), pred))
        pred = _predicted_lift(fmap, complex(prev[0]), complex(prev[m - 1]), lifted[-1])
        closure = _nearest_preimage(fmap, complex(prev[0]), pred)
        # distinct preimages of prev[0] sit 2|w|sin(pi/d) apart
        sep = 2.0 * abs(closure) * math.sin(math.pi / fmap.d)
        if abs(closure - lifted[0]) < max(1e-12, 0.5 * sep):
            return np.array(lifted), turn > 0
        lifted.append(closure)  # closure starts the next turn around the loop
    raise SamplingResolutionError(
        "boundary lift failed to close after d turns; raise the sample count"
    )


def classify_level(
    orbit: BackwardDiskOrbit, n: int, cloud: Optional[PostcriticalCloud] = None
) -> CaseLabel:
    """Pullback case at level n: Critical when the boundary polygon winds
    around 0, Univalent-MeetsP when a cloud point lies inside, else
    Univalent-NoP."""
    if n < 1 or n > orbit.depth:
        raise ValueError(f"level {n} not populated")
    poly = orbit.boundary[n]
    if winding_number(poly, 0.0 + 0.0j) != 0:
        return CaseLabel.CRITICAL
    cloud = cloud or orbit.cloud
    if cloud is not None:
        lo = complex(poly.real.min(), poly.imag.min())
        hi = complex(poly.real.max(), poly.imag.max())
        for p in cloud.points_complex:
            if lo.real <= p.real <= hi.real and lo.imag <= p.imag <= hi.imag:
                if point_in_polygon(poly, complex(p)):
                    return CaseLabel.UNIVALENT_MEETS_P
    return CaseLabel.UNIVALENT_NO_P


def pull_back(
    fmap: UnicriticalMap,
    orbit: BackwardDiskOrbit,
    steps: int,
    branch_rule: BranchRule = "random-seeded",
    rng: Optional[np.random.Generator] = None,
) -> BackwardDiskOrbit:
    """Extend the orbit by ``steps`` inverse images: center by the branch rule,
    boundary by the continuous lift, plus diameters and case labels."""
    for _ in range(steps):
        z_prev = orbit.points[-1]
        cands = preimages(fmap, z_prev)
        k = _choose_branch(branch_rule, cands, orbit.depth + 1, rng)
        z_new = cands[k]
        lifted, branched = _lift_boundary(fmap, orbit.boundary[-1], z_new)
        orbit.points.append(z_new)
        orbit.branch_choices.append(k)
        orbit.boundary.append(lifted)
        orbit.diams.append(_polygon_diameter(lifted))
        orbit.labels.append(None)
        orbit.labels[-1] = classify_level(orbit, orbit.depth)
        if branched and orbit.labels[-1] is not CaseLabel.CRITICAL:
            # a non-closing lift always winds around the branch point
            orbit.labels[-1] = CaseLabel.CRITICAL
    return orbit


@dataclass(frozen=True)
class ExpansionReport:
    ratios: List[float]
    levels: List[int]
    skipped_levels: List[int]
    log_slope: float
    lam: float
    constant: float
    case_counts: dict

    def predicted(self, n: int) -> float:
        return self.constant * self.lam**n


def expansion_ratios(
    orbit: BackwardDiskOrbit, metric: SingularMetric
) -> ExpansionReport:
    """Ratios R_n = |(f^n)'(z_n)| density(z0) / density(z_n) along the orbit,
    with a least-squares fit log R_n = log C + n log lambda.

    Levels whose center sits within 1e-9 of the cloud are skipped (the density
    would be infinite there; the expansion bound only concerns z not in P(f)).
    """
    dens0 = metric.density(orbit.points[0])
    ratios, levels, skipped = [], [], []
    for n in range(1, orbit.depth + 1):
        z_n = orbit.points[n]
        if metric.cloud.dist(z_n) < CLOUD_EXCLUSION:
            skipped.append(n)
            continue
        deriv = orbit_derivative_magnitude(orbit.fmap, z_n, n)
        ratios.append(deriv * dens0 / metric.density(z_n))
        levels.append(n)
    if not ratios:
        raise ValueError("all levels skipped; orbit unusable for ratio fitting")
    ns = np.array(levels, dtype=float)
    logs = np.log(ratios)
    if len(ratios) >= 2:
        slope, intercept = np.polyfit(ns, logs, 1)
    else:
        slope, intercept = 0.0, logs[0]
    counts = {lab: 0 for lab in CaseLabel}
    for lab in orbit.labels[1:]:
        counts[lab] += 1
    return ExpansionReport(
        ratios=ratios,
        levels=levels,
        skipped_levels=skipped,
        log_slope=float(slope),
        lam=float(math.exp(slope)),
        constant=float(math.exp(intercept)),
        case_counts={lab.value: v for lab, v in counts.items()},
    )


@dataclass(frozen=True)
class RadiusProxy:
    value: float
    from_diameter: bool


def conformal_radius_proxy(orbit: BackwardDiskOrbit, n: int) -> RadiusProxy:
    """Conformal radius of the level-n pullback with respect to its center.

    At univalent levels this is the exact derivative transport eps/|(f^n)'(z_n)|;
    past a critical level the sampled diameter is the (flagged) fallback."""
    if n == 0:
        return RadiusProxy(orbit.epsilon, False)
    if n > orbit.depth:
        raise ValueError(f"level {n} not populated")
    if orbit.labels[n] is CaseLabel.CRITICAL:
        raise ValueError(
            "conformal-radius transport is not defined at the critical level"
        )
    n_crit = orbit.critical_level()
    if n_crit is not None and n > n_crit:
        return RadiusProxy(orbit.diams[n], True)
    deriv = orbit_derivative_magnitude(orbit.fmap, orbit.points[n], n)
    return RadiusProxy(orbit.epsilon / deriv, False)


def shrink_fit(orbit: BackwardDiskOrbit) -> Tuple[float, float]:
    """Fit diam U_n ~ C0 theta^n by least squares on log diameters.

    Returns (C0, theta); theta >= 1 is reported as-is, falsifying contraction."""
    if orbit.depth < 10:
        raise ValueError("need at least 10 pullback levels")
    ns = np.arange(orbit.depth + 1, dtype=float)
    logs = np.log(orbit.diams)
    slope, intercept = np.polyfit(ns, logs, 1)
    return float(math.exp(intercept)), float(math.exp(slope))


@dataclass(frozen=True)
class Case3Report:
    critical_level: int
    w0: complex
    deriv_lower_margin: float
    sigma_upper_margin: float
    sigma_lower_margin: float


def case3_bound_check(
    orbit: BackwardDiskOrbit, metric: SingularMetric
) -> Case3Report:
    """Check the critical-branch inequalities with the diameter proxy for the
    final conformal radius, recording signed margins (>= 0 means satisfied).

    w0 is the forward image of the critical point at the critical level."""
    n0 = orbit.critical_level()
    if n0 is None:
        raise ValueError("orbit has no critical level")
    fmap = orbit.fmap
    d = fmap.d
    w0 = 0.0 + 0.0j
    for _ in range(n0):
        w0 = fmap.evaluate(w0)
    n = orbit.depth
    z0 = orbit.points[0]
    z_n = orbit.points[n]
    r_n = orbit.diams[n]  # diameter-based proxy, upper-bound flavor
    deriv = orbit_derivative_magnitude(fmap, z_n, n)
    lower = orbit.epsilon ** (1.0 / d) * abs(z0 - w0) ** (1.0 - 1.0 / d) / r_n
    sigma_n = metric.density(z_n)
    sigma_0 = metric.density(z0)
    return Case3Report(
        critical_level=n0,
        w0=w0,
        deriv_lower_margin=deriv - lower,
        sigma_upper_margin=(4.0 / r_n) ** (1.0 - 1.0 / d) - sigma_n,
        sigma_lower_margin=sigma_0 - abs(z0 - w0) ** (-(1.0 - 1.0 / d)),
    )
