"""External-ray tracing, landing, John constants, and rho-lengths."""

import math

import numpy as np
import pytest

import expmetric as em
from expmetric.errors import DomainError, RayTracingError
from expmetric.metrics import SingularMetric, Variant
from expmetric.rays import (
    ExternalRay,
    JohnRayEntry,
    _aitken,
    _extrapolated_landing,
    john_constant_along_ray,
    john_report,
    rho_length_of_ray,
    trace_ray,
)


def cheb():
    return em.UnicriticalMap(2, -2)


def dist_to_segment(z):
    # exact distance to J = [-2, 2] for the Chebyshev parameter
    x = min(2.0, max(-2.0, z.real))
    return abs(z - x)


def dist_to_circle(z):
    # exact distance to the unit circle for c = 0
    return abs(abs(z) - 1.0)


# ------------------------------------------------------------------ tracing


def test_ray_domain_errors():
    with pytest.raises(DomainError):
        trace_ray(cheb(), 1.0, 10)
    with pytest.raises(DomainError):
        trace_ray(cheb(), -0.1, 10)
    with pytest.raises(DomainError):
        trace_ray(cheb(), 0.25, 61)


def test_landing_oracles_chebyshev():
    ray = trace_ray(cheb(), 0.0, 30)
    assert ray.landing is not None
    assert abs(ray.landing - 2.0) < 1e-4
    ray = trace_ray(cheb(), 0.5, 30)
    assert abs(ray.landing - (-2.0)) < 1e-4


def test_landing_at_critical_point_via_extrapolation():
    # the 1/4-ray lands on the critical point 0, where Newton conditioning
    # degrades; the landing comes from the Aitken tail
    ray = trace_ray(cheb(), 0.25, 30)
    assert ray.landing is not None
    assert abs(ray.landing) < 1e-6


def test_landing_oracles_square_map():
    fmap = em.UnicriticalMap(2, 0)
    for k in range(8):
        ray = trace_ray(fmap, k / 8, 30)
        expected = np.exp(2j * np.pi * k / 8)
        assert abs(ray.landing - expected) < 1e-5


def test_cubic_ray_lands():
    fmap = em.UnicriticalMap(3, 0)
    ray = trace_ray(fmap, 1 / 3, 30)
    assert abs(ray.landing - np.exp(2j * np.pi / 3)) < 1e-5


def test_potential_schedule():
    ray = trace_ray(cheb(), 0.0, 20, g0=1.0)
    assert ray.potentials[0] == pytest.approx(1.0)
    for k, g in enumerate(ray.potentials):
        assert g == pytest.approx(1.0 / 2**k, abs=1e-8)
    assert all(b < a for a, b in zip(ray.potentials, ray.potentials[1:]))


def test_points_sit_on_stated_equipotentials():
    for fmap in (cheb(), em.UnicriticalMap(2, 1j)):
        ray = trace_ray(fmap, 0.3, 15)
        for z, g in zip(ray.polyline, ray.potentials):
            assert em.green_potential(fmap, z) == pytest.approx(g, abs=1e-6)


def test_ray_equivariance_under_f():
    # f maps the theta-ray to the (d theta)-ray, doubling the potential
    fmap = cheb()
    ray_a = trace_ray(fmap, 0.3, 12)
    ray_b = trace_ray(fmap, 0.6, 12)
    for k in range(1, 12):
        assert abs(fmap.evaluate(ray_a.polyline[k + 1]) - ray_b.polyline[k]) < 1e-6


def test_arclengths_from_landing():
    ray = trace_ray(cheb(), 0.0, 20)
    arcs = ray.arclengths_from_landing()
    assert len(arcs) == len(ray.polyline)
    assert arcs[-1] == 0.0
    assert all(a >= b for a, b in zip(arcs, arcs[1:]))
    # total arclength dominates the straight-line span
    assert arcs[0] >= abs(ray.polyline[0] - ray.polyline[-1]) - 1e-12


# ------------------------------------------------------------------- Aitken


def test_aitken_exact_on_geometric_tails():
    L = 0.7 - 0.2j
    seq = [L + 0.3 * (0.4 + 0.1j) ** n for n in range(3)]
    assert abs(_aitken(*seq) - L) < 1e-12
    # non-contracting differences are rejected
    assert _aitken(0.0, 1.0, 2.0) is None


def test_extrapolated_landing_gates():
    assert _extrapolated_landing([0j, 1j, 2j]) is None  # too short
    L = 1.5 + 0.5j
    seq = [L + (0.3 + 0.05j) ** n for n in range(8)]
    est = _extrapolated_landing(seq)
    assert est is not None and abs(est - L) < 1e-6


# ------------------------------------------------------------ John constant


def test_john_constant_square_map_is_one():
    # rays of z^2 are radial, so dist(z, J) equals the arclength exactly
    fmap = em.UnicriticalMap(2, 0)
    entries = []
    for k in range(8):
        ray = trace_ray(fmap, k / 8, 35)
        entries.append(john_constant_along_ray(ray, dist_to_circle))
    for e in entries:
        assert e.constant == pytest.approx(1.0, abs=0.05)
    rep = john_report(entries)
    assert rep.ray_count == 8
    assert 0.95 <= rep.constant <= 1.0


def test_john_constant_chebyshev_positive_and_stable():
    fmap = cheb()
    for theta in (0.1, 0.3):
        e40 = john_constant_along_ray(trace_ray(fmap, theta, 40), dist_to_segment)
        e50 = john_constant_along_ray(trace_ray(fmap, theta, 50), dist_to_segment)
        assert e40.constant >= 0.01
        assert abs(e40.constant - e50.constant) <= 0.25 * e40.constant


def test_john_report_clamps_at_one():
    entries = [JohnRayEntry(0.0, 2.5, 1 + 0j), JohnRayEntry(0.5, 3.0, -1 + 0j)]
    rep = john_report(entries)
    assert rep.constant == 1.0
    assert rep.entries[0].constant == 2.5  # raw per-ray values preserved


def test_john_constant_requires_landing():
    ray = ExternalRay(0.0, [3 + 0j, 2.5 + 0j], [1.0, 0.5], None)
    with pytest.raises(RayTracingError):
        john_constant_along_ray(ray, dist_to_segment)


# -------------------------------------------------------------- rho-length


def cheb_metric(variant=Variant.RHO):
    cloud = em.build_postcritical_cloud(cheb(), 50)
    return SingularMetric.for_degree(cloud, 2, variant)


def test_rho_length_matches_direct_quadrature():
    ray = trace_ray(cheb(), 0.1, 25)
    metric = cheb_metric()
    r = 0.2
    got = rho_length_of_ray(ray, metric, r, refine=8)
    # independent midpoint sum over the clipped polyline
    base = ray.landing
    total = 0.0
    pts = ray.polyline
    for a, b in zip(pts[:-1], pts[1:]):
        ts = np.linspace(0, 1, 400)
        seg = a + (b - a) * ts
        keep = np.abs(seg - base) <= 2 * r
        if not keep.any():
            continue
        mids = 0.5 * (seg[:-1] + seg[1:])
        ok = keep[:-1] & keep[1:]
        dens = metric.density_array(mids[ok])
        total += float(np.sum(dens) * abs(b - a) / 399)
    assert got == pytest.approx(total, rel=0.02)


def test_rho_length_finite_at_singular_landing():
    # the 0-ray lands on the cloud point 2; alpha < 1 keeps the length finite
    ray = trace_ray(cheb(), 0.0, 40)
    metric = cheb_metric(Variant.SIGMA)
    val = rho_length_of_ray(ray, metric, 0.1)
    assert math.isfinite(val) and val > 0.0


def test_rho_length_decreases_with_radius():
    ray = trace_ray(cheb(), 0.0, 40)
    metric = cheb_metric()
    vals = [rho_length_of_ray(ray, metric, r) for r in (0.2, 0.1, 0.05, 0.025)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_rho_length_scaling_exponent():
    # near a singular landing point, length(B(x, 2r) cap ray) ~ r^(1 - alpha)
    # or faster; the fitted exponent must not fall below 1 - alpha by much
    ray = trace_ray(cheb(), 0.0, 50)
    metric = cheb_metric(Variant.SIGMA)
    radii = np.array([0.2, 0.1, 0.05, 0.025, 0.0125])
    vals = np.array([rho_length_of_ray(ray, metric, r) for r in radii])
    slope = np.polyfit(np.log(radii), np.log(vals), 1)[0]
    assert slope >= (1.0 - metric.alpha) - 0.1


def test_rho_length_rejects_faraway_base():
    ray = trace_ray(cheb(), 0.0, 20)
    with pytest.raises(DomainError):
        rho_length_of_ray(ray, cheb_metric(), 0.05, base=100 + 100j)


def test_rho_length_requires_landing_or_base():
    ray = ExternalRay(0.0, [3 + 0j, 2.5 + 0j], [1.0, 0.5], None)
    with pytest.raises(RayTracingError):
        rho_length_of_ray(ray, cheb_metric(), 0.1)
