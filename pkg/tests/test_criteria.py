import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from superiorization import (PixelImage, TotalVariation, nonascent_radius,
                             subgradient_legacy_direction, theorem2_direction,
                             theorem2_nonascending, tv, tv_nonascending, tv_partials,
                             tv_subgradient)


def brute_force_tv(img):
    """Double loop over pixels with a right and a lower neighbour."""
    n = len(img)
    total = 0.0
    for row in range(n - 1):
        for col in range(n - 1):
            here = img[row][col]
            total += math.sqrt((here - img[row][col + 1]) ** 2 + (here - img[row + 1][col]) ** 2)
    return total


def central_gradient(f, x, h=1e-6):
    g = np.zeros_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2 * h)
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def test_tv_constant_is_zero():
    for n in (1, 2, 5, 16):
        assert tv(np.full((n, n), 0.3)) == 0.0


def test_tv_hand_value():
    assert tv(PixelImage(np.array([1.0, 0.0, 0.0, 0.0]), 2)) == pytest.approx(math.sqrt(2))


def test_tv_matches_brute_force(rng):
    for _ in range(100):
        n = int(rng.integers(2, 12))
        img = rng.normal(size=(n, n))
        assert tv(img) == pytest.approx(brute_force_tv(img.tolist()), rel=1e-10)


def test_tv_small_images():
    assert tv(np.array([[4.0]])) == 0.0
    assert tv(np.arange(9.0), side=3) == pytest.approx(brute_force_tv(np.arange(9.0).reshape(3, 3).tolist()))
    with pytest.raises(ValueError):
        tv(np.zeros(5))


def test_pixel_image_validation():
    with pytest.raises(ValueError):
        PixelImage(np.zeros(5), 2)
    img = PixelImage.from_array(np.eye(3), pixel_size=0.5)
    assert img.side == 3 and img.pixel_size == 0.5


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (6, 6), elements=st.floats(-5, 5)),
       arrays(np.float64, (6, 6), elements=st.floats(-5, 5)),
       st.floats(0, 1))
def test_tv_convex(u, w, t):
    assert tv(t * u + (1 - t) * w) <= t * tv(u) + (1 - t) * tv(w) + 1e-9


def test_tv_nonascending_constant_is_zero():
    d = tv_nonascending(np.full((5, 5), 2.0))
    assert not d.any()


def smooth_image(n=7):
    # strictly positive differences in both directions at every term
    r, c = np.mgrid[0:n, 0:n]
    return 0.3 * r ** 2 + 0.7 * c + 0.05 * r * c + 1.0


def test_tv_direction_matches_finite_differences():
    X = smooth_image()
    x = X.ravel()
    grad, available = tv_partials(x, 7)
    assert available.all()
    fd = central_gradient(lambda v: tv(v, 7), x)
    np.testing.assert_allclose(grad, fd, rtol=1e-4)
    expected = -fd / np.linalg.norm(fd)
    np.testing.assert_allclose(tv_nonascending(x, 7), expected, rtol=1e-4, atol=1e-8)


def test_tv_partials_agree_with_finite_differences_on_generic_images(rng):
    for _ in range(10):
        x = rng.normal(size=36)
        grad, available = tv_partials(x, 6)
        assert available.all()
        np.testing.assert_allclose(grad, central_gradient(lambda v: tv(v, 6), x), rtol=1e-4,
                                   atol=1e-6)


def test_tv_threshold_blocks_coordinates():
    X = np.zeros((3, 3))
    X[0, 0] = 1.0
    grad, available = tv_partials(X)
    # only the top-left term is nonzero; pixel (0,0) appears in no other term and
    # pixel (2,2) appears in none at all, every other pixel touches a vanishing term
    expected = np.zeros((3, 3), bool)
    expected[0, 0] = expected[2, 2] = True
    np.testing.assert_array_equal(available.reshape(3, 3), expected)
    np.testing.assert_allclose(grad.reshape(3, 3)[0, 0], 2 / math.sqrt(2))


def test_tv_direction_norm(rng):
    for _ in range(50):
        x = rng.normal(size=49) * (rng.random(49) < 0.5)
        n = np.linalg.norm(tv_nonascending(x, 7))
        assert n == 0 or abs(n - 1) <= 1e-12


def test_theorem2_quadratic_examples():
    partials = lambda x: (2 * x, np.ones(x.size, bool))  # noqa: E731
    assert not theorem2_nonascending(partials, np.zeros(2)).any()
    d = theorem2_nonascending(partials, np.array([1.0, 0.0]))
    np.testing.assert_array_equal(d, [-1.0, 0.0])
    phi = lambda x: x @ x  # noqa: E731
    x = np.array([1.0, 0.0])
    for lam in np.linspace(0.01, 0.99, 50):
        assert phi(x + lam * d) < phi(x)


def test_theorem2_partial_availability():
    phi = lambda x: x[0] + abs(x[1])  # noqa: E731
    partials = lambda x: (np.array([1.0, 0.0]), np.array([True, False]))  # noqa: E731
    d = theorem2_nonascending(partials, np.zeros(2))
    np.testing.assert_array_equal(d, [-1.0, 0.0])
    for lam in np.logspace(-6, 0, 13):
        assert phi(lam * d) == pytest.approx(-lam)


def test_theorem2_random_quadratics(rng):
    for _ in range(100):
        J = int(rng.integers(2, 8))
        M = rng.normal(size=(J, J))
        H = M @ M.T + 0.1 * np.eye(J)
        c = rng.normal(size=J)
        phi = lambda x: 0.5 * x @ H @ x + c @ x  # noqa: E731
        x = rng.normal(size=J)
        d = theorem2_nonascending(lambda v: (H @ v + c, np.ones(J, bool)), x)
        assert nonascent_radius(phi, x, d) >= 1e-6


def test_tv_nonascending_at_generic_images(rng):
    for _ in range(30):
        x = rng.uniform(0, 1, 64)
        d = tv_nonascending(x, 8)
        assert nonascent_radius(lambda v: tv(v, 8), x, d) >= 1e-6


def test_tv_nonascending_with_flat_patches(rng):
    # flat regions make some terms vanish; the construction still applies
    for _ in range(30):
        x = np.round(rng.uniform(0, 3, 64))
        d = tv_nonascending(x, 8)
        assert nonascent_radius(lambda v: tv(v, 8), x, d) >= 1e-6


def test_legacy_direction_at_differentiable_point(rng):
    x = rng.normal(size=25)
    np.testing.assert_allclose(subgradient_legacy_direction(lambda v: tv_subgradient(v, 5), x),
                               tv_nonascending(x, 5), atol=1e-15)


def test_legacy_direction_nonsmooth_example():
    phi = lambda x: abs(x[0]) + abs(x[1])  # noqa: E731
    d = subgradient_legacy_direction(lambda x: np.array([1.0, 1.0]), np.array([0.0, 1.0]))
    np.testing.assert_allclose(d, np.array([-1.0, -1.0]) / math.sqrt(2))
    # phi(x + lam d) = lam/sqrt2 + 1 - lam/sqrt2 = 1 for small lam: no decrease is obtained
    values = [phi(np.array([0.0, 1.0]) + lam * d) for lam in np.logspace(-6, -1, 6)]
    assert all(v == pytest.approx(1.0) for v in values)
    assert not subgradient_legacy_direction(lambda x: np.zeros(2), np.zeros(2)).any()


def test_tv_subgradient_is_a_subgradient(rng):
    for _ in range(30):
        x = np.round(rng.uniform(0, 2, 36))
        g = tv_subgradient(x, 6)
        for _ in range(5):
            y = rng.normal(size=36)
            assert tv(y, 6) >= tv(x, 6) + g @ (y - x) - 1e-9


def test_total_variation_object():
    crit = TotalVariation(4)
    x = np.arange(16.0)
    assert crit(x) == tv(x, 4)
    np.testing.assert_array_equal(crit.nonascending(x), tv_nonascending(x, 4))
    assert np.linalg.norm(crit.legacy_direction(x)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        TotalVariation(0)


def test_direction_of_zero():
    assert not theorem2_direction(np.zeros(3)).any()
