import math

import numpy as np
import pytest

from pclab import Cone, WeightSpec
from pclab.errors import GradientUnavailable, ValidationError

from conftest import SQ2


def _cone_points(cone, rng, m=100):
    G = np.asarray(cone.generators)
    w = rng.random((m, len(G))) + 1e-3
    return (w @ G) * rng.uniform(0.1, 10.0, size=(m, 1))


@pytest.mark.parametrize("theta", [
    WeightSpec.radial_power(1.5),
    WeightSpec.radial_power(0.0),
    WeightSpec.directional_power(1.0, [1.0, 1.0]),
    WeightSpec.directional_power(3.0, [2.0, 1.0]),
])
def test_homogeneity_and_euler_identity(quadrant, theta):
    X = _cone_points(quadrant, np.random.default_rng(0))
    base = theta(X)
    for t in (0.5, 2.0, 10.0):
        np.testing.assert_allclose(theta(t * X), t ** (-theta.q) * base, rtol=1e-12)
    euler = np.einsum("ij,ij->i", theta.gradient(X), X)
    np.testing.assert_allclose(euler, -theta.q * base, rtol=1e-10, atol=1e-14)


def test_directional_weight_matches_closed_form():
    theta = WeightSpec.directional_power(1.0, [1.0, 1.0])
    X = np.array([[1.0, 1.0], [2.0, 0.5]])
    np.testing.assert_allclose(theta(X), SQ2 / X.sum(axis=1), rtol=1e-14)


def test_validate_returns_comparison_constants(quadrant):
    # |x|^-2 against <x, u>^-2: the ratio (<u, uref>)^2 runs over [1/2, 1] on the quarter circle
    m, M = WeightSpec.radial_power(2.0).validate(quadrant)
    assert 0.5 <= m < 0.51
    assert M == pytest.approx(1.0, abs=1e-3)


def test_validate_rejects_non_homogeneous_custom(quadrant):
    bad = WeightSpec.custom(1.0, lambda X: 1.0 / (1.0 + np.linalg.norm(X, axis=1)))
    with pytest.raises(ValidationError):
        bad.validate(quadrant)


def test_validate_rejects_direction_negative_on_cone(quadrant):
    with pytest.raises(ValidationError):
        WeightSpec.directional_power(1.0, [1.0, -1.0]).validate(quadrant)


def test_custom_weight_validates_and_lacks_gradient(quadrant):
    theta = WeightSpec.custom(2.0, lambda X: 1.0 / np.sum(X * X, axis=1))
    theta.validate(quadrant)
    assert not theta.smooth
    with pytest.raises(GradientUnavailable):
        theta.gradient([[1.0, 1.0]])


def test_custom_gradient_checked_by_euler_identity(quadrant):
    wrong = WeightSpec.custom(2.0, lambda X: 1.0 / np.sum(X * X, axis=1), gradient=lambda X: X)
    with pytest.raises(ValidationError):
        wrong.validate(quadrant)


def test_circular_cone_validation():
    c = Cone.circular([0.0, 0.0, 1.0], math.pi / 6)
    m, M = WeightSpec.radial_power(1.0).validate(c)
    assert 0 < m <= M <= 1.0 + 1e-12


@pytest.mark.parametrize("spec", [
    {"kind": "radial_power", "q": 1.5},
    {"kind": "directional_power", "q": 1.0, "direction": [0.6, 0.8]},
])
def test_json_round_trip(spec):
    theta = WeightSpec.from_json(spec)
    again = WeightSpec.from_json(theta.to_json())
    X = np.array([[1.0, 2.0], [0.3, 0.1]])
    np.testing.assert_array_equal(theta(X), again(X))


@pytest.mark.parametrize("spec", [
    {"kind": "radial_power"},
    {"kind": "radial_power", "q": -1},
    {"kind": "directional_power", "q": 1.0},
    {"kind": "custom", "q": 1.0},
    {"kind": "bogus", "q": 1.0},
    [1, 2],
])
def test_bad_json_is_rejected(spec):
    with pytest.raises(ValidationError):
        WeightSpec.from_json(spec)
