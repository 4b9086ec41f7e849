import math

import numpy as np
import pytest

from pclab import Cone, polar_cone, reference_direction, boundary_directions, cap_quadrature
from pclab.cone_geometry import integrate_cap
from pclab.errors import DegenerateCone, UnsupportedDimension


def test_polar_of_quadrant_is_negative_quadrant(quadrant):
    P = polar_cone(quadrant)
    assert P.contains(np.array([[-1.0, -2.0], [-3.0, 0.0]])).all()
    assert not P.contains(np.array([[1.0, -1.0], [0.5, 0.5]])).any()


def test_polar_of_circular_cone_has_complementary_angle():
    C = Cone.circular([0, 0, 1], math.radians(30))
    P = polar_cone(C)
    np.testing.assert_allclose(P.axis, [0, 0, -1], atol=1e-15)
    assert P.half_angle == pytest.approx(math.radians(60), abs=1e-15)


def test_polar_of_polyhedral_matches_bruteforce_membership():
    C = Cone.polyhedral([[-1.0, 0.0], [0.0, -1.0]])
    P = polar_cone(C)
    rng = np.random.default_rng(0)
    xs = rng.uniform(0, 1, size=(200, 2))  # points of C
    ys = rng.uniform(-1, 1, size=(300, 2))
    brute = np.all(ys @ xs.T <= 1e-12, axis=1)
    # the sampled x's are dense enough that this agrees away from the boundary band
    margin = np.min(np.abs(ys / np.linalg.norm(ys, axis=1)[:, None]), axis=1)
    ok = margin > 0.05
    np.testing.assert_array_equal(P.contains(ys)[ok], brute[ok])


def test_bipolarity_on_random_points():
    C = Cone.polyhedral([[-1.0, 0.2, 0.0], [0.0, -1.0, 0.3], [0.1, 0.0, -1.0], [-0.5, -0.5, 0.4]])
    PP = polar_cone(polar_cone(C))
    rng = np.random.default_rng(1)
    X = rng.normal(size=(1000, 3))
    X /= np.linalg.norm(X, axis=1)[:, None]
    away = np.abs(X @ C.normals.T).min(axis=1) > 1e-12
    np.testing.assert_array_equal(PP.contains(X)[away], C.contains(X)[away])
    Ccirc = Cone.circular([0.0, 1.0, 1.0], 0.6)
    PPc = polar_cone(polar_cone(Ccirc))
    np.testing.assert_array_equal(PPc.contains(X), Ccirc.contains(X))


def test_reference_direction_examples(quadrant):
    np.testing.assert_allclose(reference_direction(quadrant), [math.sqrt(0.5)] * 2, atol=1e-15)
    C = Cone.circular([1.0, 2.0, 2.0], 0.3)
    np.testing.assert_allclose(reference_direction(C), np.array([1, 2, 2]) / 3, atol=1e-15)
    G = Cone.from_generators([[1.0, 0.0], [1.0, 1.0]])
    u = reference_direction(G)
    np.testing.assert_allclose(u, np.array([2.0, 1.0]) / math.sqrt(5), atol=1e-15)
    assert np.all(G.generators @ u > 0)


def test_reference_direction_positive_on_generators():
    C = Cone.polyhedral([[-1.0, 0.2, 0.0], [0.0, -1.0, 0.3], [0.1, 0.0, -1.0], [-0.5, -0.5, 0.4]])
    assert np.all(C.generators @ reference_direction(C) > 0)


def test_non_pointed_or_redundant_cones_rejected():
    with pytest.raises(DegenerateCone):
        Cone.polyhedral([[-1.0, 0.0], [1.0, 0.0]])
    with pytest.raises(DegenerateCone):
        Cone.polyhedral([[-1.0, 0.0], [0.0, -1.0], [-1.0, -1.0]])


def test_cap_quadrature_constant_on_quadrant(quadrant):
    Q = cap_quadrature(quadrant, 1e-10, 40)
    assert Q.integrate(lambda U: np.ones(len(U))) == pytest.approx(math.pi / 2, abs=1e-10)
    assert np.all(quadrant.interior_margin(Q.nodes) > 0)
    assert np.all(Q.weights > 0)


def test_cap_quadrature_circular_cap_area():
    beta = 0.7
    C = Cone.circular([0, 0, 1], beta)
    Q = cap_quadrature(C, 1e-10, 40)
    assert Q.integrate(lambda U: np.ones(len(U))) == pytest.approx(2 * math.pi * (1 - math.cos(beta)), abs=1e-9)


def test_cap_quadrature_linear_function(quadrant):
    u = reference_direction(quadrant)
    Q = cap_quadrature(quadrant, 1e-10, 40)
    assert Q.integrate(lambda U: U @ u) == pytest.approx(math.sqrt(2), abs=1e-10)


def test_quadrature_degree_two_on_circular_cap():
    # axial symmetry: integral of u_z**2 over the cap is 2 pi (1 - cos^3 b) / 3
    b = 0.9
    C = Cone.circular([0, 0, 1], b)
    val, err = integrate_cap(lambda U: U[:, 2] ** 2, C, 1e-10)
    assert val == pytest.approx(2 * math.pi * (1 - math.cos(b) ** 3) / 3, abs=1e-9)


def test_quadrature_degree_two_on_quadrant(quadrant):
    # integral of cos(t) sin(t) over [0, pi/2] is 1/2
    val, _ = integrate_cap(lambda U: U[:, 0] * U[:, 1], quadrant, 1e-12)
    assert val == pytest.approx(0.5, abs=1e-11)


def test_cap_quadrature_rejects_high_dimension():
    C = Cone.polyhedral(-np.eye(4))
    with pytest.raises(UnsupportedDimension):
        cap_quadrature(C, 1e-6, 10)


def test_boundary_directions_quadrant(quadrant):
    B = boundary_directions(quadrant, 2)
    got = sorted(map(tuple, np.round(B, 15)))
    assert got == sorted([(-1.0, 0.0), (0.0, -1.0)])


def test_boundary_directions_circular():
    C = Cone.circular([0, 0, 1], math.pi / 4)
    B = boundary_directions(C, 4)
    polar = np.degrees(np.arccos(B[:, 2]))
    np.testing.assert_allclose(polar, 135.0, atol=1e-12)
    az = np.sort(np.degrees(np.arctan2(B[:, 1], B[:, 0])) % 360)
    np.testing.assert_allclose(np.diff(az), 90.0, atol=1e-12)


def test_boundary_directions_polyhedral_arc_partition(octant):
    B = boundary_directions(octant, 30)
    np.testing.assert_allclose(np.linalg.norm(B, axis=1), 1.0, atol=1e-14)
    # every boundary direction of the negative octant cap has a zero coordinate
    assert np.all(np.min(np.abs(B), axis=1) < 1e-12)
    assert np.all(B <= 1e-12)
    # consecutive samples are equally spaced along the boundary (total length 3 pi / 2)
    ang = np.arccos(np.clip(np.sum(B * np.roll(B, -1, axis=0), axis=1), -1, 1))
    np.testing.assert_allclose(ang[ang < 0.2], 3 * math.pi / 2 / 30, rtol=1e-9)
