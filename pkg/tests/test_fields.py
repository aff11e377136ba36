import math

import numpy as np
import pytest

from conftest import random_rotation
from dyonlab.errors import DomainError, ProximityError, StringProximityError
from dyonlab.fields import (DyonCenter, Weight, dirac_vector_potential, duality_residual, fd_curl,
                            fd_divergence, fd_gradient, flux_through_sphere, magnetic_field_multi,
                            monopole_flux, sample_fields, scalar_potential_gradient, scalar_potential_multi,
                            vector_potential_multi)
from dyonlab.geometry import FLAT, MetricSpec

TWO = [DyonCenter((0.0, 0.0, 0.7), g=1.0, q=-1.0), DyonCenter((0.2, -0.1, -0.6), g=-0.5, q=0.3)]


def _points(rng, n, centers=TWO, clearance=0.2):
    out = []
    while len(out) < n:
        x = rng.uniform(-2, 2, 3)
        if all(np.linalg.norm(x - c.a) > clearance and not
               (x[2] < c.a[2] and math.hypot(*(x - c.a)[:2]) < clearance) for c in centers):
            out.append(x)
    return out


def test_potential_vanishes_on_regular_axis():
    c = DyonCenter((0.3, 0.1, -0.2), g=2.0)
    for t in (0.1, 1.0, 5.0):
        assert np.all(dirac_vector_potential(c.a + [0, 0, t], c) == 0.0)


def test_potential_raises_on_string():
    c = DyonCenter((0.0, 0.0, 0.0), g=1.0)
    with pytest.raises(StringProximityError):
        dirac_vector_potential([0.0, 0.0, -1.0], c)
    with pytest.raises(StringProximityError):
        dirac_vector_potential([0.0, 0.0, 1.0], c, string_axis=(0, 0, 1))


def test_curl_of_potential_is_monopole_field(rng):
    for x in _points(rng, 30):
        curl = fd_curl(lambda y: vector_potential_multi(y, TWO), x, 1e-5)
        np.testing.assert_allclose(curl, magnetic_field_multi(x, TWO), atol=1e-6)


def test_string_choice_is_a_gauge_transformation(rng):
    # the difference of two Dirac potentials is curl-free off both strings
    c = [DyonCenter((0.0, 0.0, 0.0), g=1.3)]
    for x in _points(rng, 20, c):
        if math.hypot(x[0], x[1]) < 0.2:
            continue
        diff = lambda y: (vector_potential_multi(y, c, (0, 0, -1)) - vector_potential_multi(y, c, (0, 0, 1)))
        np.testing.assert_allclose(fd_curl(diff, x, 1e-5), 0.0, atol=1e-6)


def test_field_is_divergence_and_curl_free(rng):
    B = lambda y: magnetic_field_multi(y, TWO)
    for x in _points(rng, 20):
        assert abs(fd_divergence(B, x, 1e-5)) < 1e-5
        np.testing.assert_allclose(fd_curl(B, x, 1e-5), 0.0, atol=1e-5)


def test_field_rotates_covariantly(rng):
    R = random_rotation(rng)
    rotated = [DyonCenter(tuple(R @ c.a), c.g, c.q) for c in TWO]
    for x in _points(rng, 10):
        np.testing.assert_allclose(magnetic_field_multi(R @ x, rotated), R @ magnetic_field_multi(x, TWO),
                                   rtol=1e-12, atol=1e-12)
        assert scalar_potential_multi(R @ x, rotated) == pytest.approx(scalar_potential_multi(x, TWO), rel=1e-12)


@pytest.mark.parametrize("metric", [FLAT, MetricSpec.sphere(1.5), MetricSpec.hyperboloid(1.0)])
def test_scalar_gradient_matches_differences(metric, rng):
    centers = [DyonCenter((0.1, 0.0, 0.2), g=0.7, q=-1.1), DyonCenter((-0.2, 0.1, -0.1), g=0.4, q=0.5)]
    for _ in range(10):
        x = rng.uniform(-0.4, 0.4, 3)
        if min(np.linalg.norm(x - c.a) for c in centers) < 0.1:
            continue
        for w in Weight:
            fd = fd_gradient(lambda y: scalar_potential_multi(y, centers, metric, w), x, 1e-6)
            np.testing.assert_allclose(scalar_potential_gradient(x, centers, metric, w), fd, rtol=1e-6, atol=1e-6)


def test_flat_duality_at_random_points(rng):
    worst = max(duality_residual(x, TWO, FLAT, 1e-5) for x in _points(rng, 50))
    assert worst <= 1e-5


def test_curved_duality_single_center(rng):
    sphere = MetricSpec.sphere(1.0)
    c = [DyonCenter((0.0, 0.0, 0.0), g=1.0)]
    for x in _points(rng, 10, c):
        x = 0.4 * x / np.linalg.norm(x) * rng.uniform(0.5, 1.5)
        if math.hypot(x[0], x[1]) < 0.05 and x[2] < 0:
            continue
        assert duality_residual(x, c, sphere, 1e-5) < 1e-6


def test_duality_exact_without_magnetic_charge():
    e_only = [DyonCenter((0, 0, 0), g=0.0, q=2.0)]
    assert duality_residual([0.3, 0.2, -0.5], e_only) == 0.0


@pytest.mark.parametrize("g", [1.0, -0.5, 2.5])
def test_flux_of_single_monopole(g):
    c = DyonCenter((0.1, 0.2, 0.3), g=g)
    assert monopole_flux(c, 0.7) == pytest.approx(4 * math.pi * g, rel=1e-12)


def test_flux_off_center_and_outside():
    c = DyonCenter((0.0, 0.0, 0.3), g=1.0)
    inside = flux_through_sphere([c], (0, 0, 0), 1.0, quadrature_order=128)
    outside = flux_through_sphere([c], (0, 0, 3.0), 1.0, quadrature_order=128)
    assert inside == pytest.approx(4 * math.pi, rel=1e-8)
    assert abs(outside) < 1e-8


def test_flux_is_additive():
    total = flux_through_sphere(TWO, (0, 0, 0), 1.5, quadrature_order=160)
    assert total == pytest.approx(4 * math.pi * (1.0 - 0.5), rel=1e-8)


def test_monopole_flux_rejects_enclosed_neighbours():
    with pytest.raises(DomainError):
        monopole_flux(TWO[0], 2.0, others=[TWO[1]])
    with pytest.raises(DomainError):
        flux_through_sphere([DyonCenter((1.0, 0, 0), g=1.0)], (0, 0, 0), 1.0)


def test_proximity_guard():
    with pytest.raises(ProximityError):
        magnetic_field_multi(TWO[0].a + 1e-8, TWO)
    with pytest.raises(ProximityError):
        scalar_potential_multi(TWO[1].a, TWO)


def test_sample_fields_bundles_components():
    x = np.array([0.5, 0.4, 0.1])
    s = sample_fields(x, TWO)
    np.testing.assert_array_equal(s.B, magnetic_field_multi(x, TWO))
    assert s.phi_q == pytest.approx(-1.0 / np.linalg.norm(x - TWO[0].a) + 0.3 / np.linalg.norm(x - TWO[1].a))
