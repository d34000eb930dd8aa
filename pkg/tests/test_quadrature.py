from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptive_ilg.mesh import Triangulation
from adaptive_ilg.quadrature import integrate, integrate_all, rule


def reference_triangle():
    return Triangulation(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]))


def monomial_integral(i, j):
    return factorial(i) * factorial(j) / factorial(i + j + 2)


def test_centroid_rule():
    q = rule(1)
    np.testing.assert_array_equal(q.points, [[1 / 3, 1 / 3, 1 / 3]])
    np.testing.assert_array_equal(q.weights, [1.0])


@pytest.mark.parametrize("degree", [1, 2, 5])
def test_rule_is_a_valid_barycentric_rule(degree):
    q = rule(degree)
    assert q.degree == degree
    assert np.all(q.weights > 0)
    assert q.weights.sum() == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(q.points.sum(axis=1), 1.0, atol=1e-15)
    # strictly interior, so singular integrands are never evaluated on edges
    assert np.all(q.points > 0)


@pytest.mark.parametrize("degree", [1, 2, 5])
def test_exact_for_all_monomials_up_to_degree(degree):
    mesh = reference_triangle()
    q = rule(degree)
    for i in range(degree + 1):
        for j in range(degree + 1 - i):
            got = integrate(mesh, 0, lambda x, y: x ** i * y ** j, q)
            assert got == pytest.approx(monomial_integral(i, j), rel=1e-13)


def test_degree5_x2y_is_one_sixtieth():
    got = integrate(reference_triangle(), 0, lambda x, y: x ** 2 * y, rule(5))
    assert got == pytest.approx(1 / 60, rel=1e-14)


def test_degree_two_is_not_exact_for_cubics():
    got = integrate(reference_triangle(), 0, lambda x, y: x ** 3, rule(2))
    assert abs(got - monomial_integral(3, 0)) > 1e-4


@pytest.mark.parametrize("degree", [0, 3, 4, 6])
def test_unsupported_degree(degree):
    with pytest.raises(ValueError):
        rule(degree)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=6, max_size=6), st.sampled_from([1, 2, 5]))
def test_constant_integrates_to_area(coords, degree):
    pts = np.array(coords).reshape(3, 2)
    area = 0.5 * ((pts[1, 0] - pts[0, 0]) * (pts[2, 1] - pts[0, 1])
                  - (pts[1, 1] - pts[0, 1]) * (pts[2, 0] - pts[0, 0]))
    if abs(area) < 1e-3:
        return
    tri = [0, 1, 2] if area > 0 else [0, 2, 1]
    mesh = Triangulation(pts, np.array([tri]))
    assert integrate(mesh, 0, lambda x, y: np.ones_like(x), rule(degree)) == pytest.approx(abs(area), rel=1e-12)


def test_integrate_all_sums_to_domain_integral(mesh0):
    # int_L x^2 dx over the L-shape = 3 * (1/3) * ... computed quadrant by quadrant: 3 * 1/3
    vals = integrate_all(mesh0, lambda x, y: x ** 2, rule(2))
    assert vals.sum() == pytest.approx(1.0, rel=1e-13)
    assert len(vals) == mesh0.n_elements
