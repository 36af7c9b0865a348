"""Closed-form metric densities and distortion bounds.

Singular densities over a postcritical cloud, the orbifold/hyperbolic
comparison function F_d, pseudo-hyperbolic and hyperbolic disk densities,
conformal-radius relations, and Koebe distortion bounds.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import PostcriticalCloud
from .errors import DomainError


class Variant(enum.Enum):
    SIGMA = "sigma"  # dist^(-alpha)
    RHO = "rho"      # 1 + dist^(-alpha)


@dataclass(frozen=True)
class SingularMetric:
    """Density rho(z) = 1 + dist(z, P)^(-alpha) or sigma(z) = dist(z, P)^(-alpha)
    over a finite postcritical cloud, with alpha = 1 - 1/d."""

    cloud: PostcriticalCloud
    alpha: float
    variant: Variant = Variant.RHO

    @classmethod
    def for_degree(cls, cloud: PostcriticalCloud, d: int,
                   variant: Variant = Variant.RHO) -> "SingularMetric":
        return cls(cloud, 1.0 - 1.0 / d, variant)

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")

    def density(self, z: complex) -> float:
        """Metric density at z; +inf on the cloud itself."""
        dist = self.cloud.dist(z)
        return self.density_from_dist(dist)

    def density_from_dist(self, dist: float) -> float:
        if dist <= 0.0:
            return math.inf
        sing = dist ** (-self.alpha)
        return 1.0 + sing if self.variant is Variant.RHO else sing

    def density_array(self, zs: np.ndarray, dist_floor: float = 0.0) -> np.ndarray:
        """Vectorized density with distances capped below by ``dist_floor``."""
        dist = self.cloud.dist_many(zs)
        if dist_floor > 0.0:
            dist = np.maximum(dist, dist_floor)
        with np.errstate(divide="ignore"):
            sing = dist ** (-self.alpha)
        return 1.0 + sing if self.variant is Variant.RHO else sing


def series_F_times_power(d: int, t: float) -> float:
    """F_d(t) * t^(1-1/d) as the finite geometric sum
    (1 + t^(2/d) + ... + t^((2d-2)/d)) / d, stable on all of [0, 1)."""
    if d < 2:
        raise DomainError("degree must be >= 2")
    if not 0.0 <= t < 1.0:
        raise DomainError(f"t must lie in [0, 1), got {t}")
    if t == 0.0:
        return 1.0 / d
    u = t ** (2.0 / d)
    acc = 1.0
    term = 1.0
    for _ in range(d - 1):
        term *= u
        acc += term
    return acc / d


def comparison_F(d: int, t: float) -> float:
    """Ratio of the one-cone-point orbifold density to the hyperbolic density
    at pseudo-hyperbolic distance t from the cone point."""
    if not 0.0 < t < 1.0:
        raise DomainError(f"t must lie in (0, 1), got {t}")
    return series_F_times_power(d, t) * t ** (-(1.0 - 1.0 / d))


def comparison_F_closed_form(d: int, t: float) -> float:
    """(1 - t^2) / (d t^(1-1/d) (1 - t^(2/d))); cancels catastrophically as
    t -> 1, kept only as a cross-check against the series form."""
    if not 0.0 < t < 1.0:
        raise DomainError(f"t must lie in (0, 1), got {t}")
    return (1.0 - t * t) / (d * t ** (1.0 - 1.0 / d) * (1.0 - t ** (2.0 / d)))


def pseudo_hyperbolic_unit(z: complex, w: complex) -> float:
    """|(z - w) / (1 - conj(w) z)| on the unit disk."""
    if abs(z) >= 1.0 or abs(w) >= 1.0:
        raise DomainError("both points must lie inside the unit disk")
    # quotient of moduli, not modulus of the quotient: the denominators for
    # (z, w) and (w, z) are conjugates, so this form is exactly symmetric
    return abs(z - w) / abs(1.0 - w.conjugate() * z)


def pseudo_hyperbolic_disk_center(z0: complex, r: float, z: complex) -> float:
    """Pseudo-hyperbolic distance from the center z0 of B(z0, r) to z: |z-z0|/r."""
    if abs(z - z0) >= r:
        raise DomainError("z must lie inside the disk")
    return abs(z - z0) / r


def hyperbolic_from_pseudo(p: float) -> float:
    """Hyperbolic distance 2 atanh(p) = log((1+p)/(1-p)) from pseudo-hyperbolic p."""
    if not 0.0 <= p < 1.0:
        raise DomainError(f"p must lie in [0, 1), got {p}")
    return math.log((1.0 + p) / (1.0 - p))


def hyperbolic_density_disk(r: float, z: complex) -> float:
    """Hyperbolic density 2r / (r^2 - |z|^2) of B(0, r)."""
    if abs(z) >= r:
        raise DomainError("z must lie inside B(0, r)")
    return 2.0 * r / (r * r - abs(z) ** 2)


def orbifold_density_disk(d: int, z: complex) -> float:
    """Hyperbolic orbifold density of the unit disk with one cone point of
    order d at 0: 2 / (d |z|^(1-1/d) (1 - |z|^(2/d))).  +inf at the cone point."""
    if d < 2:
        raise DomainError("degree must be >= 2")
    t = abs(z)
    if t >= 1.0:
        raise DomainError("z must lie inside the unit disk")
    if t == 0.0:
        return math.inf
    return 2.0 / (d * t ** (1.0 - 1.0 / d) * (1.0 - t ** (2.0 / d)))


@dataclass(frozen=True)
class KoebeBounds:
    """Distortion sandwich for |g(z)-g(z0)| / |z-z0| of a univalent map on
    B(z0, r) at radius s, plus the guaranteed 1/4-theorem image radius."""

    lower: float
    upper: float
    quarter_radius: float

    def __post_init__(self):
        if not 0.0 < self.lower <= self.upper or self.quarter_radius <= 0.0:
            raise ValueError("inconsistent Koebe bounds")

    def contains_ratio(self, ratio: float, slack: float = 0.0) -> bool:
        return self.lower * (1.0 - slack) <= ratio <= self.upper * (1.0 + slack)


def koebe_bounds(deriv_mag: float, r: float, s: float) -> KoebeBounds:
    if deriv_mag <= 0.0:
        raise DomainError("derivative magnitude must be positive")
    if not 0.0 <= s < r:
        raise DomainError("need 0 <= s < r")
    u = s / r
    return KoebeBounds(
        lower=deriv_mag / (1.0 + u) ** 2,
        upper=deriv_mag / (1.0 - u) ** 2,
        quarter_radius=deriv_mag * r / 4.0,
    )


def density_from_conformal_radius(r: float) -> float:
    """Hyperbolic density at the base point from the conformal radius: 2/r."""
    if r <= 0.0:
        raise DomainError("conformal radius must be positive")
    return 2.0 / r
