import math

import numpy as np
import pytest
from scipy.integrate import quad

from pclab import (DiscreteMeasure, ShiftedCone, WeightSpec, WulffShape, asymptotic_covolume,
                   cone_weighted_volume, covolume, directional_derivative_integral, dual_volume,
                   finiteness_probe, scale, surface_area_measure, surface_area_total, volume)
from pclab.errors import (ExponentOutOfRange, GradientUnavailable, SingularAtOrigin,
                          ValidationError)

from conftest import SQ2, radial_weight


def _polar(theta):
    return np.array([math.cos(theta), math.sin(theta)])


def _two_facet(quadrant, a1=200.0, a2=250.0, h=(1.0, 1.3)):
    V = [_polar(math.radians(a1)), _polar(math.radians(a2))]
    return WulffShape(quadrant, V, list(h))


# ---------------------------------------------------------------- co-volume

def test_covolume_wedge_is_triangle_area(quadrant, wedge):
    assert float(covolume(wedge, radial_weight(0))) == pytest.approx(2.0, rel=1e-9)


def test_covolume_hyperbola_matches_one_dimensional_oracle(quadrant, hyp):
    oracle = 2 * quad(lambda t: (math.sin(t) * math.cos(t)) ** -0.25, 0, math.pi / 2, limit=200)[0]
    beta = 2 ** 1.25 * math.sqrt(math.pi) / 2 * math.gamma(3 / 8) / math.gamma(7 / 8)
    assert oracle == pytest.approx(beta, rel=1e-10)
    assert float(covolume(hyp, radial_weight(1.5))) == pytest.approx(oracle, rel=1e-6)


def test_covolume_scales_with_degree_n_minus_q(quadrant, wedge):
    assert float(covolume(scale(wedge, 3.0), radial_weight(0))) == pytest.approx(18.0, rel=1e-9)


def test_covolume_rejects_q_at_least_n(wedge):
    with pytest.raises(ExponentOutOfRange):
        covolume(wedge, radial_weight(2.0))


def test_covolume_agrees_with_monte_carlo(quadrant):
    E = _two_facet(quadrant)
    theta = radial_weight(0.5)
    est = float(covolume(E, theta))
    rng = np.random.default_rng(11)
    L = 1.01 * float(E.vertices().max())
    X = rng.uniform(0, L, size=(400_000, 2))
    outside = ~E.contains(X)
    vals = np.where(outside, theta(X), 0.0) * L * L
    mc, sigma = vals.mean(), vals.std() / math.sqrt(len(vals))
    # the box holds all of C minus E
    assert E.contains(np.array([[L, 1e-9], [1e-9, L]])).all()
    assert abs(mc - est) <= 3 * sigma


def test_covolume_three_dimensional_methods_agree(octant):
    E = WulffShape(octant, [[-1.0, -1.0, -1.0], [-1.0, -0.5, -2.0]], [math.sqrt(3), 1.5])
    theta = radial_weight(0.5)
    a = float(covolume(E, theta, method="facets"))
    b = float(covolume(E, theta, method="cap", tol=1e-8))
    assert a == pytest.approx(b, rel=1e-5)


# ---------------------------------------------------------------- volume

def test_volume_shifted_cone(quadrant, shift):
    # (1/(q-n)) * integral of min(cos, sin) over the quarter circle
    oracle = quad(lambda t: min(math.cos(t), math.sin(t)), 0, math.pi / 2, points=[math.pi / 4])[0]
    assert oracle == pytest.approx(2 - SQ2, rel=1e-12)
    assert float(volume(shift, radial_weight(3))) == pytest.approx(oracle, rel=1e-9)
    assert float(volume(scale(shift, 2.0), radial_weight(3))) == pytest.approx(oracle / 2, rel=1e-9)


def test_volume_wedge(quadrant, wedge):
    oracle = quad(lambda t: (math.cos(t) + math.sin(t)) / 2, 0, math.pi / 2)[0]
    assert float(volume(wedge, radial_weight(3))) == pytest.approx(oracle, rel=1e-9)


def test_volume_rejects_q_at_most_n(wedge):
    with pytest.raises(ExponentOutOfRange):
        volume(wedge, radial_weight(2.0))


def test_cone_weighted_volume_boundary_point_cartesian_oracle(quadrant):
    # integral over x >= 1, y >= 0 of (x^2 + y^2)^(-3/2) equals 1
    assert float(cone_weighted_volume([1.0, 0.0], radial_weight(3), quadrant)) == pytest.approx(1.0, rel=1e-7)


def test_cone_weighted_volume_interior_and_scaling(quadrant, shift):
    theta = radial_weight(3)
    v1 = float(cone_weighted_volume([1.0, 1.0], theta, quadrant))
    assert v1 == pytest.approx(float(volume(shift, theta)), rel=1e-12)
    assert float(cone_weighted_volume([2.0, 2.0], theta, quadrant)) == pytest.approx(v1 / 2, rel=1e-9)
    with pytest.raises(SingularAtOrigin):
        cone_weighted_volume([0.0, 0.0], theta, quadrant)


# ---------------------------------------------------------------- asymptotic co-volume

def test_asymptotic_covolume_of_the_cone_itself_is_zero(quadrant):
    A = ShiftedCone(quadrant, [0.0, 0.0])
    assert float(asymptotic_covolume(A, [1.0, 1.0], radial_weight(3))) == pytest.approx(0.0, abs=1e-12)


def test_asymptotic_covolume_difference_form(quadrant, hyp):
    from pclab import translate
    theta = radial_weight(3)
    T = float(asymptotic_covolume(hyp, [1.0, 1.0], theta))
    direct = float(volume(ShiftedCone(quadrant, [1.0, 1.0]), theta)) - float(volume(translate(hyp, [1.0, 1.0]), theta))
    assert T == pytest.approx(direct, rel=1e-6)


def test_asymptotic_covolume_homogeneity(quadrant, hyp):
    theta = radial_weight(3)
    t1 = float(asymptotic_covolume(hyp, [1.0, 1.0], theta))
    t2 = float(asymptotic_covolume(scale(hyp, 2.0), [2.0, 2.0], theta))
    assert t2 == pytest.approx(t1 / 2, rel=1e-8)


def test_asymptotic_covolume_log_branch_is_finite(quadrant, hyp):
    est = asymptotic_covolume(hyp, [1.0, 1.0], radial_weight(2))
    assert np.isfinite(est.value) and est.value > 0


def test_asymptotic_covolume_origin_singular(hyp):
    with pytest.raises(SingularAtOrigin):
        asymptotic_covolume(hyp, [0.0, 0.0], radial_weight(2.5))


# ---------------------------------------------------------------- surface area measure

def test_sam_wedge_unit_weight_is_facet_length(wedge):
    mu = surface_area_measure(wedge, radial_weight(0))
    assert mu.masses[0] == pytest.approx(2 * SQ2, rel=1e-9)


def test_sam_wedge_directional_weight_constant_on_facet(wedge):
    theta = WeightSpec.directional_power(1.0, [1.0, 1.0])
    mu = surface_area_measure(wedge, theta)
    assert mu.masses[0] == pytest.approx(2.0, rel=1e-9)


def test_sam_symmetric_pair_has_equal_masses(quadrant):
    E = WulffShape(quadrant, [_polar(math.radians(200)), _polar(math.radians(250))], [1.0, 1.0])
    mu = surface_area_measure(E, radial_weight(0))
    assert mu.masses[0] == pytest.approx(mu.masses[1], rel=1e-9)


def _polyline_oracle(E, theta):
    P = E.vertices()
    P = P[np.argsort(np.arctan2(P[:, 1], P[:, 0]))]
    total = 0.0
    for a, b in zip(P[:-1], P[1:]):
        L = np.linalg.norm(b - a)
        total += L * quad(lambda s: float(theta((a + s * (b - a))[None])[0]), 0, 1, epsabs=0, epsrel=1e-12)[0]
    return total


@pytest.mark.parametrize("q", [0.0, 0.5, 1.5])
def test_sam_total_matches_arc_length_on_wulff(quadrant, q):
    E = _two_facet(quadrant)
    theta = radial_weight(q)
    mu = surface_area_measure(E, theta)
    assert mu.total == pytest.approx(_polyline_oracle(E, theta), rel=1e-6)


def test_sam_total_matches_arc_length_on_hyperbola(hyp):
    theta = radial_weight(1.5)
    f = lambda x: (x * x + x ** -2) ** -0.75 * math.sqrt(1 + x ** -4)
    oracle = quad(f, 0, 1, limit=400)[0] + quad(f, 1, np.inf, limit=400)[0]
    assert float(surface_area_total(hyp, theta)) == pytest.approx(oracle, rel=1e-6)


def test_sam_three_dimensional_total_is_face_area(octant):
    # one facet x + y + z = s cuts an equilateral triangle of side s*sqrt(2)
    s = 1.5
    E = WulffShape(octant, [[-1.0, -1.0, -1.0]], [s / math.sqrt(3)])
    mu = surface_area_measure(E, radial_weight(0))
    assert mu.masses[0] == pytest.approx(math.sqrt(3) / 4 * 2 * s * s, rel=1e-6)


def test_sam_returns_discrete_measure(wedge):
    mu = surface_area_measure(wedge, radial_weight(0))
    assert isinstance(mu, DiscreteMeasure)
    np.testing.assert_allclose(mu.directions, wedge.directions)


# ---------------------------------------------------------------- dual volume

def test_dual_volume_hyperbola(hyp):
    assert float(dual_volume(hyp, -2)) == pytest.approx(0.25, rel=1e-9)


def test_dual_volume_shift_and_scaling(shift):
    assert float(dual_volume(shift, -1)) == pytest.approx((2 - SQ2) / 2, rel=1e-9)
    base = float(dual_volume(shift, 0.5))
    assert float(dual_volume(scale(shift, 3.0), 0.5)) == pytest.approx(3 ** 0.5 * base, rel=1e-9)


@pytest.mark.parametrize("r", [0.0, 1.0, 2.0])
def test_dual_volume_rejects_exponent(hyp, r):
    with pytest.raises(ExponentOutOfRange):
        dual_volume(hyp, r)


# ---------------------------------------------------------------- derivative integral

def test_directional_derivative_integral_matches_cone_volume(quadrant):
    theta = radial_weight(3)
    for z in ([1.0, 1.0], [1.0, 1e-3]):
        lhs = float(cone_weighted_volume(z, theta, quadrant))
        rhs = directional_derivative_integral(z, theta, quadrant)
        assert rhs.value > 0
        assert rhs.value == pytest.approx(lhs, rel=1e-6)


def test_directional_derivative_needs_gradient(quadrant):
    theta = WeightSpec.custom(3.0, lambda X: np.linalg.norm(X, axis=1) ** -3.0)
    with pytest.raises(GradientUnavailable):
        directional_derivative_integral([1.0, 1.0], theta, quadrant)


def test_variational_consistency_finite_difference(quadrant):
    E = _two_facet(quadrant)
    theta = radial_weight(0.5)
    mu = surface_area_measure(E, theta).masses
    eps = 1e-5
    base = float(covolume(E, theta))
    for i in range(2):
        h = E.hbar.copy()
        h[i] += eps
        fd = (float(covolume(WulffShape(quadrant, E.directions, h), theta)) - base) / eps
        assert fd == pytest.approx(mu[i], rel=1e-3)


# ---------------------------------------------------------------- finiteness probe

def test_probe_volume_power_divergent(hyp):
    v = finiteness_probe("V", hyp, radial_weight(1.5))
    assert v.status == "power_divergent"
    assert v.growth_exponent == pytest.approx(0.5, abs=0.05)


def test_probe_covolume_log_divergent_at_q_equal_n(hyp):
    assert finiteness_probe("Vbar", hyp, radial_weight(2.0)).status == "log_divergent"


def test_probe_t_origin(hyp):
    assert finiteness_probe("T_origin", hyp, radial_weight(1.5)).status == "finite"
    assert finiteness_probe("T_origin", hyp, radial_weight(2.5)).status == "power_divergent"


def test_probe_finite_value_is_consistent(hyp):
    v = finiteness_probe("Vbar", hyp, radial_weight(1.5))
    assert v.status == "finite"
    assert v.value == pytest.approx(float(covolume(hyp, radial_weight(1.5))), rel=1e-4)


def test_probe_rejects_bad_input(hyp):
    with pytest.raises(ValidationError):
        finiteness_probe("nonsense", hyp, radial_weight(1.5))
    with pytest.raises(ValidationError):
        finiteness_probe("V", hyp, radial_weight(1.5), schedule=[1.0, 2.0])
    with pytest.raises(ValidationError):
        finiteness_probe("T", hyp, radial_weight(3.0))
