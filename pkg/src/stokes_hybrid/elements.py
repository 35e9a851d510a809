"""Lagrange shape functions on the reference triangle and reference segment.

Node conventions (shared by every space in the library):

* triangle, degree 1: the three vertices, in cell order;
* triangle, degree 2: vertices first, then the midpoint of local edge 0, 1, 2
  where local edge ``l`` is the edge opposite vertex ``l``;
* segment, degree 1: the endpoints t=0, t=1;
* segment, degree 2: endpoints then the midpoint t=1/2.
"""

import numpy as np

#: Local edge l of a triangle connects these local vertices (opposite vertex l).
TRI_EDGE_VERTS = ((1, 2), (2, 0), (0, 1))

#: Reference triangle vertices.
TRI_VERTS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def tri_dim(degree):
    """Dimension of P_degree on a triangle."""
    return (degree + 1) * (degree + 2) // 2


def tri_nodes(degree):
    """Lagrange node coordinates on the reference triangle, shape (n, 2)."""
    if degree == 0:
        return np.array([[1.0 / 3.0, 1.0 / 3.0]])
    if degree == 1:
        return TRI_VERTS.copy()
    if degree == 2:
        mids = np.array([0.5 * (TRI_VERTS[a] + TRI_VERTS[b]) for a, b in TRI_EDGE_VERTS])
        return np.vstack([TRI_VERTS, mids])
    raise ValueError("unsupported degree %r" % (degree,))


def tri_basis(degree, pts):
    """Shape function values at reference points, shape (n_basis, n_pts)."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    x, y = pts[:, 0], pts[:, 1]
    lam = np.stack([1.0 - x - y, x, y])
    if degree == 0:
        return np.ones((1, pts.shape[0]))
    if degree == 1:
        return lam
    if degree == 2:
        vert = lam * (2.0 * lam - 1.0)
        mids = np.stack([4.0 * lam[a] * lam[b] for a, b in TRI_EDGE_VERTS])
        return np.vstack([vert, mids])
    raise ValueError("unsupported degree %r" % (degree,))


def tri_basis_grad(degree, pts):
    """Reference gradients at reference points, shape (n_basis, n_pts, 2)."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    npts = pts.shape[0]
    x, y = pts[:, 0], pts[:, 1]
    lam = np.stack([1.0 - x - y, x, y])
    dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    if degree == 0:
        return np.zeros((1, npts, 2))
    if degree == 1:
        return np.broadcast_to(dlam[:, None, :], (3, npts, 2)).copy()
    if degree == 2:
        grads = np.empty((6, npts, 2))
        for i in range(3):
            grads[i] = (4.0 * lam[i] - 1.0)[:, None] * dlam[i]
        for l, (a, b) in enumerate(TRI_EDGE_VERTS):
            grads[3 + l] = 4.0 * (lam[a][:, None] * dlam[b] + lam[b][:, None] * dlam[a])
        return grads
    raise ValueError("unsupported degree %r" % (degree,))


def seg_nodes(degree):
    """Lagrange nodes on [0, 1]."""
    if degree == 1:
        return np.array([0.0, 1.0])
    if degree == 2:
        return np.array([0.0, 1.0, 0.5])
    raise ValueError("unsupported degree %r" % (degree,))


def seg_basis(degree, t):
    """Segment shape function values, shape (degree + 1, n_pts)."""
    t = np.asarray(t, dtype=float).ravel()
    if degree == 1:
        return np.stack([1.0 - t, t])
    if degree == 2:
        return np.stack([(1.0 - t) * (1.0 - 2.0 * t), t * (2.0 * t - 1.0), 4.0 * t * (1.0 - t)])
    raise ValueError("unsupported degree %r" % (degree,))
