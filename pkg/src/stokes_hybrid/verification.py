"""Built-in self checks behind the `verify` CLI command.

Five families of checks:

* patch test: a divergence-free linear velocity with zero pressure is
  reproduced to solver precision by every method and degree;
* local oracle: element matrices are recomputed from scratch with a
  monomial basis fitted by a Vandermonde solve, physical-space quadrature,
  and orientation determined geometrically, then compared entrywise;
* condensed vs full: both solution paths agree to solver precision;
* coercivity probe: random fields in the homogeneous space have positive
  Rayleigh quotients of the velocity form against the broken H1 norm, with
  seed-stable minima (a small penalty parameter is the usual culprit when
  this fails);
* structure: the computed velocity of the facet-pressure methods is
  pointwise divergence free with continuous normal traces.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import elements
from .assembly import LocalBuilder, assemble
from .mesh import Mesh, unit_square_mesh
from .quadrature import segment_rule, triangle_rule
from .solver import solve_condensed, solve_full
from .spaces import MethodConfig, build_spaces, interpolate_facet_dirichlet

ALL_METHODS = ("hdg", "edg-hdg", "edg")
ALL_DEGREES = (1, 2)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


# --------------------------------------------------------------------------
# independent element-matrix oracle


def _monomial_powers(degree):
    return [(a, b) for tot in range(degree + 1) for a in range(tot, -1, -1)
            for b in [tot - a]]


class _MonomialCellBasis:
    """Lagrange basis of P_k on one physical cell, represented in shifted
    and scaled monomials fitted through the node coordinates."""

    def __init__(self, verts, degree):
        self.powers = _monomial_powers(degree)
        self.center = verts.mean(axis=0)
        self.scale = max(np.linalg.norm(verts[i] - verts[j])
                         for i in range(3) for j in range(i))
        ref = elements.tri_nodes(degree)
        J = np.stack([verts[1] - verts[0], verts[2] - verts[0]], axis=-1)
        nodes = verts[0] + ref @ J.T
        V = self._monomials(nodes)
        self.coeff = np.linalg.inv(V)       # column i: monomial coeffs of phi_i

    def _monomials(self, pts):
        x = (pts[:, 0] - self.center[0]) / self.scale
        y = (pts[:, 1] - self.center[1]) / self.scale
        return np.stack([x ** a * y ** b for a, b in self.powers], axis=1)

    def values(self, pts):
        return self._monomials(pts) @ self.coeff        # (npts, nb)

    def gradients(self, pts):
        x = (pts[:, 0] - self.center[0]) / self.scale
        y = (pts[:, 1] - self.center[1]) / self.scale
        gx = np.stack([(a * x ** max(a - 1, 0) * y ** b) / self.scale
                       for a, b in self.powers], axis=1)
        gy = np.stack([(b * x ** a * y ** max(b - 1, 0)) / self.scale
                       for a, b in self.powers], axis=1)
        return np.stack([gx @ self.coeff, gy @ self.coeff], axis=-1)  # (npts, nb, 2)


class _MonomialEdgeBasis:
    def __init__(self, p0, p1, degree):
        t = elements.seg_nodes(degree)
        V = np.stack([t ** j for j in range(degree + 1)], axis=1)
        self.coeff = np.linalg.inv(V)
        self.p0, self.p1 = p0, p1

    def values(self, t):
        V = np.stack([t ** j for j in range(self.coeff.shape[0])], axis=1)
        return V @ self.coeff                            # (npts, nfn)

    def points(self, t):
        return (1.0 - t)[:, None] * self.p0 + t[:, None] * self.p1


def oracle_local_matrices(mesh, degree, alpha, cell):
    """Element matrices of one cell recomputed independently of the
    assembly tables; same dof ordering contract as LocalBlocks."""
    verts = mesh.vertices[mesh.cells[cell]]
    nb = elements.tri_dim(degree)
    np_ = elements.tri_dim(degree - 1)
    nfn = degree + 1
    n_sc = nb + 3 * nfn
    h = max(np.linalg.norm(verts[i] - verts[j]) for i in range(3) for j in range(i))
    centroid = verts.mean(axis=0)

    cellb = _MonomialCellBasis(verts, degree)
    pressb = _MonomialCellBasis(verts, degree - 1) if degree > 1 else None

    qpts, qw = triangle_rule(14)
    J = np.stack([verts[1] - verts[0], verts[2] - verts[0]], axis=-1)
    det = abs(np.linalg.det(J))
    xq = verts[0] + qpts @ J.T
    wq = qw * det

    G = cellb.gradients(xq)                              # (nq, nb, 2)
    A = np.zeros((n_sc, n_sc))
    A[:nb, :nb] = np.einsum("q,qac,qbc->ab", wq, G, G)

    B = np.zeros((np_ + 3 * nfn, 2 * n_sc))
    P = pressb.values(xq) if pressb is not None else np.ones((len(xq), 1))
    B[:np_, :2 * nb] = -np.einsum("q,qac,qm->mac", wq, G, P).reshape(np_, 2 * nb)

    t, tw = segment_rule(10)
    for l in range(3):
        fid = mesh.cell_faces[cell, l]
        f = mesh.faces[fid]
        p0, p1 = mesh.vertices[f.vertices[0]], mesh.vertices[f.vertices[1]]
        length = np.linalg.norm(p1 - p0)
        tangent = (p1 - p0) / length
        n = np.array([tangent[1], -tangent[0]])
        mid = 0.5 * (p0 + p1)
        if np.dot(n, mid - centroid) < 0:
            n = -n
        edgeb = _MonomialEdgeBasis(p0, p1, degree)
        xe = edgeb.points(t)
        we = tw * length
        Tval = cellb.values(xe)                          # (nq, nb)
        dn = np.einsum("qac,c->qa", cellb.gradients(xe), n)
        S = edgeb.values(t)                              # (nq, nfn)

        D = np.zeros((len(t), n_sc))
        D[:, :nb] = Tval
        D[:, nb + l * nfn: nb + (l + 1) * nfn] = -S
        dnC = np.zeros_like(D)
        dnC[:, :nb] = dn
        A += (alpha / h) * np.einsum("q,qa,qb->ab", we, D, D)
        A -= np.einsum("q,qa,qb->ab", we, D, dnC)
        A -= np.einsum("q,qa,qb->ab", we, dnC, D)

        rows = slice(np_ + l * nfn, np_ + (l + 1) * nfn)
        B[rows] += np.einsum("q,qj,qs,c->jsc", we, S, D, n).reshape(nfn, 2 * n_sc)

    weights = wq @ P
    return np.kron(A, np.eye(2)), B, weights


def check_local_oracle(degree, rtol=1e-12):
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.8, 0.9], [-0.2, 1.1]])
    mesh = Mesh(verts, np.array([[0, 1, 2], [0, 2, 3]]))
    cfg = MethodConfig(method="hdg", degree=degree)
    builder = LocalBuilder(mesh, cfg)
    worst = 0.0
    for cell in range(mesh.n_cells):
        blk = builder.cell_blocks(cell)
        A, B, w = oracle_local_matrices(mesh, degree, cfg.alpha, cell)
        scale = max(np.abs(A).max(), np.abs(B).max(), 1.0)
        worst = max(worst,
                    np.abs(blk.a - A).max() / scale,
                    np.abs(blk.b - B).max() / scale,
                    np.abs(blk.weights - w).max() / scale)
    return CheckResult(
        name="local-oracle-k%d" % degree, passed=worst <= rtol,
        detail="max relative entry deviation %.3e (tol %.1e)" % (worst, rtol))


# --------------------------------------------------------------------------
# patch test


def _linear_patch_field():
    def velocity(pts, side=None):
        pts = np.asarray(pts, dtype=float)
        return np.stack([pts[..., 0] + 2.0 * pts[..., 1],
                         -pts[..., 0] - pts[..., 1]], axis=-1)
    return velocity


def check_patch_test(method, degree, tol=1e-10):
    mesh = unit_square_mesh(2)
    cfg = MethodConfig(method=method, degree=degree)
    spaces = build_spaces(mesh, cfg)
    velocity = _linear_patch_field()

    class _Patch:
        pass

    patch = _Patch()
    patch.velocity = velocity
    bc = interpolate_facet_dirichlet(patch, mesh, spaces.facet_velocity)
    sol, _ = solve_condensed(mesh, cfg, spaces, f=None, bc=bc)

    nodes = _cell_node_coords(mesh, degree)
    exact = velocity(nodes.reshape(-1, 2)).reshape(nodes.shape[0], -1)
    err_u = np.abs(sol.u.reshape(mesh.n_cells, -1) - exact).max()
    err_p = max(np.abs(sol.p).max(), np.abs(sol.pbar).max())
    worst = max(err_u, err_p)
    return CheckResult(
        name="patch-%s-k%d" % (method, degree), passed=worst <= tol,
        detail="velocity dev %.3e, pressure dev %.3e (tol %.1e)" % (err_u, err_p, tol))


def _cell_node_coords(mesh, degree):
    ref = elements.tri_nodes(degree)
    v0, J, _, _ = mesh.jacobians()
    return v0[:, None, :] + np.einsum("nr,cir->cni", ref, J)


def check_condensed_equals_full(method, degree, tol=1e-10):
    from .cases import case_square_min_reg
    case = case_square_min_reg()
    mesh = unit_square_mesh(2)
    cfg = MethodConfig(method=method, degree=degree)
    spaces = build_spaces(mesh, cfg)
    bc = interpolate_facet_dirichlet(case, mesh, spaces.facet_velocity)
    full = solve_full(assemble(mesh, cfg, spaces, f=case.body_force, bc=bc))
    cond, _ = solve_condensed(mesh, cfg, spaces, f=case.body_force, bc=bc)
    scale = 1.0 + np.abs(full.u).max()
    worst = max(np.abs(full.u - cond.u).max(),
                np.abs(full.ubar - cond.ubar).max(),
                np.abs(full.p - cond.p).max(),
                np.abs(full.pbar - cond.pbar).max()) / scale
    return CheckResult(
        name="condensed-vs-full-%s-k%d" % (method, degree), passed=worst <= tol,
        detail="max relative coefficient deviation %.3e (tol %.1e)" % (worst, tol))


# --------------------------------------------------------------------------
# coercivity probe


def coercivity_min_rayleigh(mesh, cfg, seed=0, n_samples=100):
    """Minimum of x'Ax / x'Nx over random homogeneous velocity fields,
    where A is the assembled velocity form and N the broken H1 norm Gram."""
    spaces = build_spaces(mesh, cfg)
    cv, fv = spaces.cell_velocity, spaces.facet_velocity
    nvel = cv.ndof + fv.ndof
    builder = LocalBuilder(mesh, cfg)
    vmap = builder.velocity_dof_map(spaces, off_fv=cv.ndof)
    A = np.zeros((nvel, nvel))
    N = np.zeros((nvel, nvel))
    for c in range(mesh.n_cells):
        blk = builder.cell_blocks(c)
        gv = vmap[c]
        A[np.ix_(gv, gv)] += blk.a
        N[np.ix_(gv, gv)] += blk.n_grad
    free = np.setdiff1d(np.arange(nvel), cv.ndof + fv.constrained)
    A = A[np.ix_(free, free)]
    N = N[np.ix_(free, free)]
    rng = np.random.default_rng(seed)
    vals = []
    for _ in range(n_samples):
        x = rng.standard_normal(len(free))
        vals.append(float(x @ A @ x) / float(x @ N @ x))
    return min(vals)


def check_coercivity(method, degree, alpha=None, seed=0, n_samples=100):
    mesh = unit_square_mesh(4)
    cfg = MethodConfig(method=method, degree=degree, alpha=alpha)
    mins = [coercivity_min_rayleigh(mesh, cfg, seed=s, n_samples=n_samples)
            for s in (seed, seed + 1, seed + 2)]
    lo, hi = min(mins), max(mins)
    positive = lo > 0.0
    stable = hi <= 1.2 * lo if positive else False
    detail = "min Rayleigh per seed %s" % ", ".join("%.4f" % m for m in mins)
    if not positive and cfg.alpha < 6.0 * degree * degree:
        detail += "; penalty alpha=%.3g is below the default %.3g, increase it" \
            % (cfg.alpha, 6.0 * degree * degree)
    return CheckResult(
        name="coercivity-%s-k%d" % (method, degree),
        passed=positive and stable, detail=detail)


# --------------------------------------------------------------------------
# structure of computed solutions


def check_structure(method, degree, tol=1e-9):
    from .analysis import structure_checks
    from .cases import case_square_min_reg
    case = case_square_min_reg()
    mesh = unit_square_mesh(4)
    cfg = MethodConfig(method=method, degree=degree)
    spaces = build_spaces(mesh, cfg)
    bc = interpolate_facet_dirichlet(case, mesh, spaces.facet_velocity)
    sol, _ = solve_condensed(mesh, cfg, spaces, bc=bc)
    div_sup, jump_sup = structure_checks(sol, mesh)
    scale = max(1.0, np.abs(sol.u).max())
    worst = max(div_sup, jump_sup) / scale
    return CheckResult(
        name="structure-%s-k%d" % (method, degree), passed=worst <= tol,
        detail="div sup %.3e, normal jump sup %.3e (tol %.1e)" % (div_sup, jump_sup, tol))


def run_verification(methods=ALL_METHODS, degrees=ALL_DEGREES, alpha=None, seed=0):
    """All checks; structure checks only for the methods that guarantee it."""
    results = []
    for k in degrees:
        results.append(check_local_oracle(k))
    for m in methods:
        for k in degrees:
            results.append(check_patch_test(m, k))
            results.append(check_condensed_equals_full(m, k))
            results.append(check_coercivity(m, k, alpha=alpha, seed=seed))
            if m in ("hdg", "edg-hdg"):
                results.append(check_structure(m, k))
    return results
