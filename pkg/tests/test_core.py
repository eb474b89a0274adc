import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specfuse.core import ProblemGeometry, as_image, divergence, geometry_from, gradient
from specfuse.errors import BadFactor, EvenKernel, NonFiniteInput, ShapeMismatch


def test_gradient_of_constant_is_zero():
    assert np.all(gradient(np.full((4, 5), 3.7)) == 0.0)


def test_gradient_periodic_wrap_on_two_pixels():
    g = gradient(np.array([[2.0, 5.0]]))
    np.testing.assert_array_equal(g[1], [[3.0, -3.0]])
    np.testing.assert_array_equal(g[0], [[0.0, 0.0]])


def test_divergence_of_zero_field_is_zero():
    assert np.all(divergence(np.zeros((2, 3, 4))) == 0.0)


def test_divergence_of_constant_image_gradient_is_zero():
    assert np.all(divergence(gradient(np.ones((6, 3)))) == 0.0)


def test_divergence_rejects_bad_field():
    with pytest.raises(ShapeMismatch):
        divergence(np.zeros((3, 4, 4)))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_gradient_divergence_adjoint(rows, cols, seed):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((rows, cols))
    p = rng.standard_normal((2, rows, cols))
    lhs = float(np.sum(gradient(u) * p))
    rhs = -float(np.sum(u * divergence(p)))
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 10), st.integers(1, 10), st.integers(0, 2**32 - 1))
def test_gradient_components_sum_to_zero(rows, cols, seed):
    u = np.random.default_rng(seed).standard_normal((rows, cols))
    g = gradient(u)
    assert abs(g[0].sum()) < 1e-12 * max(1.0, np.abs(u).sum())
    assert abs(g[1].sum()) < 1e-12 * max(1.0, np.abs(u).sum())


@pytest.mark.parametrize(
    "n, r, s, m, l",
    [
        ((100, 100), (41, 41), 4, (440, 440), (20, 20)),
        ((4, 4), (1, 1), 1, (4, 4), (0, 0)),
        ((10, 8), (5, 3), 2, (24, 18), (2, 1)),
    ],
)
def test_geometry_examples(n, r, s, m, l):
    geo = geometry_from(n, r, s)
    assert geo.image_shape == m
    assert geo.margin == l
    assert geo.data_shape == n


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 30), st.integers(1, 30), st.integers(0, 6), st.integers(0, 6), st.integers(1, 5))
def test_geometry_round_trip(n1, n2, h1, h2, s):
    r = (2 * h1 + 1, 2 * h2 + 1)
    geo = geometry_from((n1, n2), r, s)
    back = ProblemGeometry.from_image_shape(geo.image_shape, r, s)
    assert back == geo
    assert back.data_shape == (n1, n2)


def test_geometry_errors():
    with pytest.raises(EvenKernel):
        geometry_from((4, 4), (4, 3), 2)
    with pytest.raises(BadFactor):
        geometry_from((4, 4), (3, 3), 0)
    with pytest.raises(ShapeMismatch):
        ProblemGeometry((10, 10), (3, 3), 2, (5, 5))
    with pytest.raises(ShapeMismatch):
        ProblemGeometry.from_image_shape((11, 11), (3, 3), 2)


def test_as_image_rejects_non_finite():
    with pytest.raises(NonFiniteInput):
        as_image(np.array([[1.0, np.nan]]))
    with pytest.raises(NonFiniteInput):
        as_image(np.array([[np.inf]]))
    with pytest.raises(ShapeMismatch):
        as_image(np.zeros(3))
    assert as_image([[1, 2]]).dtype == np.float64
