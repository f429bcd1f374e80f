import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from riemstab.errors import DomainError, RangeError, UsageError
from riemstab.manifolds import (
    Euclidean,
    HalfPlane,
    Sphere,
    christoffel_symbols,
    flat,
    geodesic_shoot,
    inner,
    log_via_distance_gradient,
    norm,
    point,
    sharp,
    tangent,
)

from conftest import sample_half_plane, sample_tangent

E = math.e
coord = st.floats(-5, 5, allow_nan=False)
height = st.floats(0.05, 20, allow_nan=False)


# -- metric -------------------------------------------------------------------


def test_half_plane_metric_values(hp):
    np.testing.assert_allclose(hp.metric_at([0.0, 2.0]), np.eye(2) / 4)
    np.testing.assert_allclose(hp.metric_at([5.0, 1.0]), np.eye(2))


def test_flat_metric_is_identity(flat2):
    np.testing.assert_array_equal(flat2.metric_at([3.0, -7.0]), np.eye(2))


@pytest.mark.parametrize("x", [[0.0, 0.0], [1.0, -1e-3], [0.0, 1e-12], [np.nan, 1.0], [0.0, np.inf]])
def test_half_plane_rejects_off_chart_points(hp, x):
    with pytest.raises(DomainError):
        hp.metric_at(x)


def test_wrong_coordinate_count(hp):
    with pytest.raises(UsageError):
        hp.metric_at([1.0, 2.0, 3.0])


def test_metric_symmetric_positive_definite(hp, rng):
    x = sample_half_plane(rng, 500)
    G = hp.metric_at(x)
    assert np.max(np.abs(G - np.swapaxes(G, -1, -2))) <= 1e-12
    assert np.all(np.linalg.eigvalsh(G) > 0)


# -- inner products -----------------------------------------------------------


def test_inner_examples(hp, flat2):
    X = tangent(hp, [0.0, 2.0], [0.0, 2.0])
    assert inner(hp, X, X) == pytest.approx(1.0)
    Z = tangent(hp, [0.0, 2.0], [0.0, 0.0])
    assert inner(hp, Z, X) == 0.0
    Y = tangent(flat2, [0.0, 0.0], [3.0, 4.0])
    assert inner(flat2, Y, Y) == 25.0
    assert norm(flat2, Y) == 5.0
    assert Y.norm() == 5.0


def test_inner_rejects_different_bases(hp):
    X = tangent(hp, [0.0, 2.0], [1.0, 0.0])
    Y = tangent(hp, [0.0, 3.0], [1.0, 0.0])
    with pytest.raises(UsageError):
        inner(hp, X, Y)


def test_point_invariants(hp):
    p = point(hp, [1.0, 2.0])
    assert p.manifold_id == "half_plane_hyperbolic"
    with pytest.raises(DomainError):
        point(hp, [1.0, -2.0])
    with pytest.raises(UsageError):
        tangent(hp, [1.0, 2.0], [1.0, 2.0, 3.0])


@given(x1=coord, x2=height, a=coord, b=coord, c=coord, d=coord)
def test_inner_symmetric_bilinear(x1, x2, a, b, c, d):
    m = HalfPlane()
    x = [x1, x2]
    X, Y = np.array([a, b]), np.array([c, d])
    assert m.inner(x, X, Y) == pytest.approx(m.inner(x, Y, X), rel=1e-12, abs=1e-300)
    assert m.inner(x, 2 * X, Y) == pytest.approx(2 * m.inner(x, X, Y), rel=1e-12, abs=1e-300)


# -- flat / sharp -------------------------------------------------------------


def test_flat_examples(hp, flat2):
    eta = flat(hp, tangent(hp, [0.0, 2.0], [0.0, 1.0]))
    np.testing.assert_allclose(eta.comps, [0.0, 0.25])
    X = tangent(flat2, [1.0, 1.0], [3.0, -2.0])
    np.testing.assert_array_equal(flat(flat2, X).comps, X.comps)


@given(x1=coord, x2=height, a=coord, b=coord, c=coord, d=coord)
def test_sharp_flat_roundtrip_and_pairing(x1, x2, a, b, c, d):
    m = HalfPlane()
    X = tangent(m, [x1, x2], [a, b])
    Y = tangent(m, [x1, x2], [c, d])
    back = sharp(m, flat(m, X))
    np.testing.assert_allclose(back.comps, X.comps, rtol=1e-12, atol=1e-12 * (1 + abs(a) + abs(b)))
    eta = flat(m, X)
    assert eta(Y) == pytest.approx(inner(m, sharp(m, eta), Y), rel=1e-10, abs=1e-10)


# -- distance -----------------------------------------------------------------


def test_distance_examples(hp, flat2):
    assert hp.distance([0.0, 1.0], [0.0, E]) == pytest.approx(1.0, abs=1e-15)
    assert hp.distance([2.0, 3.0], [2.0, 3.0]) == 0.0
    assert flat2.distance([0.0, 0.0], [3.0, 4.0]) == 5.0


def test_distance_matches_log_ratio_form(hp, rng):
    # The ratio form: ln of (|x - conj y| + |x - y|) / (|x - conj y| - |x - y|).
    x, y = sample_half_plane(rng, 300), sample_half_plane(rng, 300)
    plus = np.hypot(x[:, 0] - y[:, 0], x[:, 1] + y[:, 1])
    minus = np.hypot(x[:, 0] - y[:, 0], x[:, 1] - y[:, 1])
    ref = np.log((plus + minus) / (plus - minus))
    np.testing.assert_allclose(hp.distance(x, y), ref, rtol=1e-10)


def test_distance_symmetry_and_triangle(hp, rng):
    x, y, z = (sample_half_plane(rng, 1000) for _ in range(3))
    assert np.max(np.abs(hp.distance(x, y) - hp.distance(y, x))) < 1e-12
    assert np.all(hp.distance(x, z) <= hp.distance(x, y) + hp.distance(y, z) + 1e-9)


def test_distance_rejects_off_chart(hp):
    with pytest.raises(DomainError):
        hp.distance([0.0, 1.0], [0.0, -1.0])


# -- exp / log ----------------------------------------------------------------


def test_log_examples(hp, flat2):
    np.testing.assert_allclose(hp.log_map([0.0, E], [0.0, 1.0]), [0.0, -E], atol=1e-12)
    np.testing.assert_array_equal(hp.log_map([1.0, 2.0], [1.0, 2.0]), [0.0, 0.0])
    np.testing.assert_array_equal(flat2.log_map([1.0, 1.0], [4.0, 5.0]), [3.0, 4.0])


def test_exp_examples(hp, flat2):
    np.testing.assert_array_equal(hp.exp_map([1.0, 2.0], [0.0, 0.0]), [1.0, 2.0])
    X = hp.log_map([0.0, 1.0], [3.0, 2.0])
    np.testing.assert_allclose(hp.exp_map([0.0, 1.0], X), [3.0, 2.0], atol=1e-8)
    np.testing.assert_array_equal(flat2.exp_map([1.0, 1.0], [3.0, 4.0]), [4.0, 5.0])


def test_vertical_geodesic(hp):
    np.testing.assert_allclose(hp.exp_map([0.0, 1.0], [0.0, 1.0]), [0.0, E], rtol=1e-14, atol=1e-15)
    np.testing.assert_allclose(hp.exp_map([0.0, 1.0], [0.0, -1.0]), [0.0, 1 / E], rtol=1e-14, atol=1e-15)


def test_log_norm_equals_distance(hp, rng):
    x, y = sample_half_plane(rng, 500), sample_half_plane(rng, 500)
    X = hp.log_map(x, y)
    np.testing.assert_allclose(hp.norm(x, X), hp.distance(x, y), rtol=1e-9, atol=1e-12)


def test_gauss_lemma_identity(hp, rng):
    x = sample_half_plane(rng, 1000)
    X = sample_tangent(hp, x, rng, 10.0)
    err = np.abs(hp.distance(x, hp.exp_map(x, X)) - hp.norm(x, X))
    assert err.max() < 1e-9


def test_exp_log_roundtrips(hp, rng):
    x = sample_half_plane(rng, 500)
    X = sample_tangent(hp, x, rng, 6.0)
    y = hp.exp_map(x, X)
    scale = np.linalg.norm(X, axis=-1, keepdims=True) + 1.0
    assert np.max(np.abs(hp.log_map(x, y) - X) / scale) < 1e-8
    y2 = sample_half_plane(rng, 500)
    back = hp.exp_map(x, hp.log_map(x, y2))
    assert np.max(np.abs(back - y2) / (1 + np.abs(y2))) < 1e-8


@given(x1=coord, x2=height, y1=coord, y2=height)
def test_exp_log_roundtrip_property(x1, x2, y1, y2):
    m = HalfPlane()
    x, y = np.array([x1, x2]), np.array([y1, y2])
    back = m.exp_map(x, m.log_map(x, y))
    np.testing.assert_allclose(back, y, rtol=1e-8, atol=1e-8)


def test_exp_leaving_chart_is_domain_error(hp):
    # A horizontal step of hyperbolic length 800 underflows x2 to 0.
    with pytest.raises(DomainError):
        hp.exp_map([0.0, 1.0], [0.0, -800.0])


# -- gradient log -------------------------------------------------------------


def test_gradient_log_examples(hp, flat2):
    np.testing.assert_allclose(log_via_distance_gradient(hp, [0.0, E], [0.0, 1.0]), [0.0, -E], atol=1e-5)
    np.testing.assert_allclose(log_via_distance_gradient(hp, [1.0, 2.0], [1.0, 2.0]), [0.0, 0.0], atol=1e-6)
    np.testing.assert_allclose(log_via_distance_gradient(flat2, [1.0, 1.0], [4.0, 5.0]), [3.0, 4.0], atol=1e-6)


@pytest.mark.parametrize("m", [HalfPlane(), Euclidean(2), Euclidean(3)])
def test_gradient_log_matches_closed_form(m, rng):
    if m.kind == "half_plane_hyperbolic":
        x, y = sample_half_plane(rng, 200), sample_half_plane(rng, 200)
    else:
        x, y = rng.uniform(-3, 3, (200, m.coord_dim)), rng.uniform(-3, 3, (200, m.coord_dim))
    err = np.abs(log_via_distance_gradient(m, x, y) - m.log_map(x, y))
    assert err.max() < 1e-5


def test_gradient_log_step_leaving_chart(hp):
    with pytest.raises(DomainError):
        log_via_distance_gradient(hp, [0.0, 1e-7], [0.0, 1.0])


def test_gradient_log_rejects_sphere(sphere2):
    with pytest.raises(UsageError):
        log_via_distance_gradient(sphere2, [1.0, 0, 0], [0, 1.0, 0])


# -- geodesic shooting --------------------------------------------------------


def test_christoffel_symbols_half_plane(hp):
    # Known closed form at x: Gamma^1_12 = Gamma^2_22 = -1/x2, Gamma^2_11 = 1/x2.
    x2 = 2.0
    G = christoffel_symbols(hp, [0.3, x2])
    ref = np.zeros((2, 2, 2))
    ref[0, 0, 1] = ref[0, 1, 0] = -1 / x2
    ref[1, 0, 0] = 1 / x2
    ref[1, 1, 1] = -1 / x2
    np.testing.assert_allclose(G, ref, atol=1e-8)


def test_geodesic_shoot_examples(hp, flat2):
    np.testing.assert_array_equal(geodesic_shoot(hp, [1.0, 2.0], [0.0, 0.0], 16), [1.0, 2.0])
    y = geodesic_shoot(hp, [0.0, 1.0], [0.0, 1.0], 256)
    assert hp.distance([0.0, 1.0], y) == pytest.approx(1.0, abs=1e-6)
    np.testing.assert_allclose(y, [0.0, E], atol=1e-6)
    np.testing.assert_allclose(geodesic_shoot(flat2, [1.0, 1.0], [3.0, 4.0], 32), [4.0, 5.0], atol=1e-12)


def test_geodesic_shoot_matches_exp(hp, rng):
    x = sample_half_plane(rng, 10)
    X = sample_tangent(hp, x, rng, 2.0)
    for xi, Xi in zip(x, X):
        np.testing.assert_allclose(geodesic_shoot(hp, xi, Xi, 256), hp.exp_map(xi, Xi), rtol=1e-6, atol=1e-6)


def test_geodesic_shoot_fourth_order(hp):
    x, X = np.array([0.0, 1.0]), np.array([1.5, 0.5])
    ref = hp.exp_map(x, X)
    e16 = np.linalg.norm(geodesic_shoot(hp, x, X, 16) - ref)
    e32 = np.linalg.norm(geodesic_shoot(hp, x, X, 32) - ref)
    assert 8 <= e16 / e32 <= 32


def test_geodesic_shoot_guards(hp, flat2):
    with pytest.raises(UsageError):
        geodesic_shoot(hp, [0.0, 1.0], [1.0, 0.0], 8)
    with pytest.raises(DomainError, match="s="):
        geodesic_shoot(flat2.__class__(2, half_plane=True), [0.0, 1.0], [0.0, -3.0], 32)


# -- sphere -------------------------------------------------------------------


def test_sphere_basics(sphere2):
    # Points are unit vectors; lengths carry the radius R = 2.
    x, y = np.array([1.0, 0, 0]), np.array([0, 1.0, 0])
    assert sphere2.distance(x, y) == pytest.approx(math.pi)
    X = sphere2.log_map(x, y)
    assert sphere2.norm(x, X) == pytest.approx(math.pi)
    np.testing.assert_allclose(sphere2.exp_map(x, X), y, atol=1e-12)
    assert sphere2.injectivity_radius() == pytest.approx(2 * math.pi)
    with pytest.raises(RangeError):
        sphere2.log_map(x, -x)
