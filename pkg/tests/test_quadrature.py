import numpy as np
import pytest

from stokes_hybrid.quadrature import segment_rule, triangle_rule, \
    triangle_monomial_integral


@pytest.mark.parametrize("npts", range(1, 11))
def test_segment_rule_exactness(npts):
    x, w = segment_rule(npts)
    assert abs(w.sum() - 1.0) < 1e-14
    # Exact through degree 2*npts - 1, monomial integrals are 1/(d+1).
    for d in range(2 * npts):
        assert abs(w @ x ** d - 1.0 / (d + 1)) < 1e-13


def test_segment_rule_points_interior_and_sorted():
    x, w = segment_rule(6)
    assert np.all((x > 0.0) & (x < 1.0))
    assert np.all(np.diff(x) > 0)
    assert np.all(w > 0)


def test_segment_rule_rejects_zero_points():
    with pytest.raises(ValueError):
        segment_rule(0)


@pytest.mark.parametrize("degree", range(0, 13))
def test_triangle_rule_exactness(degree):
    pts, w = triangle_rule(degree)
    assert abs(w.sum() - 0.5) < 1e-14
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            val = w @ (pts[:, 0] ** a * pts[:, 1] ** b)
            assert abs(val - triangle_monomial_integral(a, b)) < 1e-13, (a, b)


def test_triangle_rule_points_strictly_interior():
    pts, w = triangle_rule(10)
    lam0 = 1.0 - pts.sum(axis=1)
    assert np.all(pts > 0.0)
    assert np.all(lam0 > 0.0)
    assert np.all(w > 0.0)


def test_triangle_rule_symmetric_under_vertex_swap():
    # The rule is built symmetric: swapping x and y permutes the points.
    pts, w = triangle_rule(5)
    swapped = pts[:, ::-1]
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    order_s = np.lexsort((swapped[:, 1], swapped[:, 0]))
    np.testing.assert_allclose(pts[order], swapped[order_s], atol=1e-15)
    np.testing.assert_allclose(w[order], w[order_s], atol=1e-15)


def test_triangle_rule_rejects_negative_degree():
    with pytest.raises(ValueError):
        triangle_rule(-1)


def test_monomial_integral_reference_values():
    assert triangle_monomial_integral(0, 0) == 0.5
    assert abs(triangle_monomial_integral(1, 0) - 1.0 / 6.0) < 1e-16
    assert abs(triangle_monomial_integral(1, 1) - 1.0 / 24.0) < 1e-16
    assert abs(triangle_monomial_integral(2, 0) - 1.0 / 12.0) < 1e-16


def test_rules_are_cached_and_frozen():
    p1, w1 = triangle_rule(4)
    p2, w2 = triangle_rule(4)
    assert p1 is p2 and w1 is w2
    assert not p1.flags.writeable
    with pytest.raises(ValueError):
        w1[0] = 0.0
