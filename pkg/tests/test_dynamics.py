"""Iteration, classification, cloud, and potential tests against hand oracles."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import expmetric as em
from expmetric.errors import EscapeError, InsideJuliaError

SQRT2 = math.sqrt(2.0)


def test_evaluate_oracles():
    assert em.UnicriticalMap(2, 0).evaluate(0) == 0
    assert em.UnicriticalMap(2, -2).evaluate(-2) == 2
    assert em.UnicriticalMap(2, 1j).evaluate(1j) == -1 + 1j


def test_deriv_oracles():
    assert em.UnicriticalMap(2, 0).deriv(0) == 0
    assert em.UnicriticalMap(2, -2).deriv(3) == 6
    assert em.UnicriticalMap(3, 0).deriv(2) == 12


def test_degree_below_two_rejected():
    with pytest.raises(ValueError):
        em.UnicriticalMap(1, 0)


def test_orbit_derivative_magnitude_oracles():
    m = em.UnicriticalMap(2, -2)
    assert em.orbit_derivative_magnitude(m, 0.7 + 0.1j, 0) == 1.0
    assert em.orbit_derivative_magnitude(m, 3, 2) == pytest.approx(84.0, rel=1e-12)
    assert em.orbit_derivative_magnitude(m, SQRT2, 1) == pytest.approx(2 * SQRT2, rel=1e-12)


def test_orbit_derivative_magnitude_deep_orbit_no_overflow():
    # 60 levels of |f'| ~ 4 would overflow a naive product of squared moduli
    m = em.UnicriticalMap(2, -2)
    val = em.orbit_derivative_magnitude(m, 2.0, 60)
    assert math.isfinite(val) and val > 1e30


@settings(max_examples=40, deadline=None)
@given(
    st.complex_numbers(max_magnitude=1.5, allow_nan=False, allow_infinity=False),
    st.integers(min_value=1, max_value=8),
)
def test_chain_rule_matches_finite_difference(z, n):
    m = em.UnicriticalMap(2, -1 + 0.2j)
    # keep intermediate iterates moderate so the difference quotient is sane
    w = z
    for _ in range(n):
        if abs(w) > 1e3:
            return
        w = m.evaluate(w)
    h = 1e-7
    fn = lambda x: _iterate(m, x, n)
    approx = abs((fn(z + h) - fn(z - h)) / (2 * h))
    exact = em.orbit_derivative_magnitude(m, z, n)
    if exact < 1e-3:
        return  # truncation error of the quotient swamps tiny derivatives
    assert approx == pytest.approx(exact, rel=1e-4)


def _iterate(m, z, n):
    for _ in range(n):
        z = m.evaluate(z)
    return z


def test_critical_orbit_oracles():
    orbit, esc = em.critical_orbit(em.UnicriticalMap(2, -2), 4)
    assert orbit == [-2, 2, 2, 2] and esc is None
    orbit, esc = em.critical_orbit(em.UnicriticalMap(2, 1j), 5)
    assert orbit == [1j, -1 + 1j, -1j, -1 + 1j, -1j] and esc is None
    orbit, esc = em.critical_orbit(em.UnicriticalMap(2, 0), 3)
    assert orbit == [0, 0, 0] and esc is None


def test_critical_orbit_escape_flag():
    orbit, esc = em.critical_orbit(em.UnicriticalMap(2, 1), 100)
    assert esc is not None
    assert len(orbit) == esc
    assert abs(orbit[-1]) > em.UnicriticalMap(2, 1).escape_radius()


def test_classify_parameter_oracles():
    cls = em.classify_parameter(em.UnicriticalMap(2, -2), 100, delta_rec=0.5)
    assert cls.kind is em.OrbitKind.BOUNDED_NONRECURRENT
    assert cls.recurrence_gap == pytest.approx(2.0)

    cls = em.classify_parameter(em.UnicriticalMap(2, 1), 100)
    assert cls.kind is em.OrbitKind.ESCAPING
    assert cls.escape_index is not None

    cls = em.classify_parameter(em.UnicriticalMap(2, 0), 10)
    assert cls.kind is em.OrbitKind.BOUNDED_RECURRENT
    assert cls.recurrence_gap == 0.0


def test_classify_parameter_undetermined_band():
    # gap 2 falls in (delta, 2*delta] for delta = 1.5
    cls = em.classify_parameter(em.UnicriticalMap(2, -2), 50, delta_rec=1.5)
    assert cls.kind is em.OrbitKind.UNDETERMINED


def test_classify_parameter_usage_errors():
    with pytest.raises(ValueError):
        em.classify_parameter(em.UnicriticalMap(2, -2), 0)
    with pytest.raises(ValueError):
        em.classify_parameter(em.UnicriticalMap(2, -2), 10, delta_rec=0.0)


def test_classification_escape_index_consistency():
    with pytest.raises(ValueError):
        em.OrbitClassification(em.OrbitKind.ESCAPING, 1.0, 5, escape_index=None)
    with pytest.raises(ValueError):
        em.OrbitClassification(em.OrbitKind.BOUNDED_RECURRENT, 0.0, 5, escape_index=3)


def test_cloud_oracles():
    cloud = em.build_postcritical_cloud(em.UnicriticalMap(2, -2), 50)
    assert sorted(cloud.points_complex.real) == [-2, 2]
    cloud_i = em.build_postcritical_cloud(em.UnicriticalMap(2, 1j), 50)
    assert len(cloud_i) == 3
    assert {complex(round(p.real), round(p.imag)) for p in cloud_i.points_complex} == {
        1j, -1 + 1j, -1j
    }
    assert len(em.build_postcritical_cloud(em.UnicriticalMap(2, 0), 10)) == 1


def test_cloud_escaping_rejected():
    with pytest.raises(EscapeError):
        em.build_postcritical_cloud(em.UnicriticalMap(2, 1), 50)


def test_cloud_forward_near_invariance():
    m = em.UnicriticalMap(2, 1j)
    cloud = em.build_postcritical_cloud(m, 50)
    pts = cloud.points_complex
    for p in pts:
        image = m.evaluate(p)
        assert min(abs(image - q) for q in pts) <= cloud.tol_dedup


def test_dist_to_cloud_oracles():
    cloud = em.build_postcritical_cloud(em.UnicriticalMap(2, -2), 50)
    assert em.dist_to_cloud(cloud, 0) == pytest.approx(2.0)
    assert em.dist_to_cloud(cloud, 2) == pytest.approx(0.0, abs=1e-15)
    cloud_i = em.build_postcritical_cloud(em.UnicriticalMap(2, 1j), 50)
    assert em.dist_to_cloud(cloud_i, 0) == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(
    st.complex_numbers(max_magnitude=4, allow_nan=False, allow_infinity=False),
    st.complex_numbers(max_magnitude=4, allow_nan=False, allow_infinity=False),
)
def test_dist_to_cloud_lipschitz(z1, z2):
    cloud = em.build_postcritical_cloud(em.UnicriticalMap(2, 1j), 50)
    d1, d2 = cloud.dist(z1), cloud.dist(z2)
    assert abs(d1 - d2) <= abs(z1 - z2) + 1e-12


def test_cloud_monotone_refinement():
    # a denser cloud can only decrease the distance
    m = em.UnicriticalMap(2, -0.2 + 0.75j)  # bounded, aperiodic-looking orbit
    if em.classify_parameter(m, 2000).kind is em.OrbitKind.ESCAPING:
        pytest.skip("parameter escaped; pick another refinement sample")
    small = em.build_postcritical_cloud(m, 50)
    large = em.build_postcritical_cloud(m, 500)
    rng = np.random.default_rng(0)
    for _ in range(50):
        z = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
        assert large.dist(z) <= small.dist(z) + 1e-12


def test_dist_many_matches_scalar():
    cloud = em.build_postcritical_cloud(em.UnicriticalMap(2, 1j), 50)
    zs = np.array([0 + 0j, 1 + 1j, -2 + 0.5j])
    np.testing.assert_allclose(cloud.dist_many(zs), [cloud.dist(z) for z in zs])


def test_cloud_diameter():
    cloud = em.build_postcritical_cloud(em.UnicriticalMap(2, -2), 50)
    assert cloud.diameter() == pytest.approx(4.0)
    assert em.build_postcritical_cloud(em.UnicriticalMap(2, 0), 5).diameter() == 0.0


def test_green_potential_oracles():
    m0 = em.UnicriticalMap(2, 0)
    assert em.green_potential(m0, 4) == pytest.approx(math.log(4), abs=1e-10)
    assert em.green_potential(m0, 0.5 + 0.5j) == 0.0
    m = em.UnicriticalMap(2, -2)
    expected = math.log((3 + math.sqrt(5)) / 2)
    assert em.green_potential(m, 3) == pytest.approx(expected, abs=1e-10)


def test_green_potential_functional_equation():
    m = em.UnicriticalMap(2, 1j)
    rng = np.random.default_rng(1)
    checked = 0
    while checked < 20:
        z = complex(rng.uniform(-3, 3), rng.uniform(-3, 3))
        g = em.green_potential(m, z)
        if g <= 0:
            continue
        assert em.green_potential(m, m.evaluate(z)) == pytest.approx(2 * g, abs=1e-6)
        checked += 1


def test_julia_distance_estimate_oracles():
    m0 = em.UnicriticalMap(2, 0)
    assert 0.25 <= em.julia_distance_estimate(m0, 2) <= 4.0
    m = em.UnicriticalMap(2, -2)
    assert 0.25 <= em.julia_distance_estimate(m, 3) <= 4.0
    near = em.julia_distance_estimate(m0, 1.0001)
    assert 0.0001 / 4 <= near <= 0.0004


def test_julia_distance_estimate_inside_raises():
    with pytest.raises(InsideJuliaError):
        em.julia_distance_estimate(em.UnicriticalMap(2, 0), 0.3 + 0.2j)


def test_sample_julia_points_near_julia_set():
    m = em.UnicriticalMap(2, -2)
    pts = em.sample_julia_points(m, 30, np.random.default_rng(7))
    # J = [-2, 2] on the real axis for the Chebyshev parameter
    for z in pts:
        assert abs(z.imag) < 1e-6
        assert -2 - 1e-6 <= z.real <= 2 + 1e-6


def test_sample_julia_points_deterministic():
    m = em.UnicriticalMap(2, 1j)
    a = em.sample_julia_points(m, 10, np.random.default_rng(42))
    b = em.sample_julia_points(m, 10, np.random.default_rng(42))
    assert a == b
