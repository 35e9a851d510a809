"""Quadrature rules on the reference interval [0, 1] and reference triangle.

The reference triangle has vertices (0,0), (1,0), (0,1). Triangle rules are
generated by collapsing a tensor-product Gauss rule onto the triangle (Duffy
transform) and averaging over the six affine symmetries, which makes them
exact to the requested degree and invariant under vertex permutations.
Generated rules use more points than hand-tabulated ones, which is irrelevant
at the mesh sizes this library targets and removes any transcription risk.
"""

from functools import lru_cache

import numpy as np


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@lru_cache(maxsize=None)
def segment_rule(npts):
    """Gauss-Legendre rule on [0, 1], exact for degree <= 2*npts - 1.

    Returns (points, weights); weights sum to 1.
    """
    if npts < 1:
        raise ValueError("need at least one point")
    x, w = np.polynomial.legendre.leggauss(npts)
    return _frozen(0.5 * (x + 1.0)), _frozen(0.5 * w)


@lru_cache(maxsize=None)
def triangle_rule(degree):
    """Symmetric rule on the reference triangle, exact for total degree <= degree.

    Returns (points, weights) with points of shape (n, 2); weights sum to the
    reference area 1/2. All points are strictly interior.
    """
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    # Duffy: x = u, y = v*(1-u), jacobian (1-u). A monomial x^a y^b pulls back
    # to u^a (1-u)^(b+1) v^b of degree a+b+1 in u, so m-point Gauss per
    # direction is exact for total degree <= 2m - 2.
    m = (degree + 3) // 2
    u, wu = segment_rule(m)
    v, wv = segment_rule(m)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    x = uu.ravel()
    y = (vv * (1.0 - uu)).ravel()
    w = (np.outer(wu, wv) * (1.0 - uu)).ravel()

    # Average over the six permutations of the barycentric coordinates.
    lam = np.stack([1.0 - x - y, x, y], axis=1)
    pts = []
    wts = []
    for perm in ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)):
        lp = lam[:, perm]
        pts.append(np.stack([lp[:, 1], lp[:, 2]], axis=1))
        wts.append(w / 6.0)
    return _frozen(np.concatenate(pts)), _frozen(np.concatenate(wts))


def triangle_monomial_integral(a, b):
    """Exact value of the integral of x^a y^b over the reference triangle."""
    from math import factorial

    return factorial(a) * factorial(b) / factorial(a + b + 2)
