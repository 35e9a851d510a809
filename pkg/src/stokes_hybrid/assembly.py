"""Element matrices and global saddle-point assembly.

Per cell K with diameter h_K, facet velocity vbar and facet pressure qbar
on its three faces, the discrete forms are

    a_K(v, w) = int_K grad v : grad w
              + (alpha / h_K) int_bK (v - vbar) . (w - wbar)
              - int_bK [ (v - vbar) . dw/dn + (w - wbar) . dv/dn ]

    b_K(v, (q, qbar)) = - int_K (div v) q + int_bK (v - vbar) . n qbar

The facet-velocity part of the boundary term of b_K cancels between the two
parents of an interior face and vanishes on the boundary for homogeneous
data; for inhomogeneous data it routes the prescribed normal flux into the
facet-pressure equations, which is what makes the eliminated system see a
compatible datum. A single extra row ties the area-weighted mean of the
cell pressure to zero; the matching column keeps the matrix symmetric.

The global unknown ordering is [cell velocity | facet velocity | cell
pressure | facet pressure | mean multiplier]; the velocity block is scaled
by the viscosity. Local matrices are cached on the cell geometry (Jacobian
bytes and edge orientation flags), so structured meshes assemble from a
handful of distinct blocks.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from . import elements
from .quadrature import segment_rule, triangle_rule

_ROT = np.array([[0.0, 1.0], [-1.0, 0.0]])  # CCW tangent -> outward normal


def thread_count():
    """Worker count from STOKES_HYBRID_THREADS (default 1, deterministic)."""
    n = int(os.environ.get("STOKES_HYBRID_THREADS", "1"))
    if n < 1:
        raise ValueError("STOKES_HYBRID_THREADS must be a positive integer")
    return n


@lru_cache(maxsize=None)
def reference_tables(degree):
    """Reference-element tables shared by assembly and error evaluation."""
    k = degree
    vol_pts, vol_w = triangle_rule(2 * k)
    load_pts, load_w = triangle_rule(2 * k + 2)
    t, seg_w = segment_rule(k + 2)
    tables = {
        "vol_pts": vol_pts, "vol_w": vol_w,
        "load_pts": load_pts, "load_w": load_w,
        "v_vol": elements.tri_basis(k, vol_pts),
        "g_vol": elements.tri_basis_grad(k, vol_pts),
        "p_vol": elements.tri_basis(k - 1, vol_pts),
        "v_load": elements.tri_basis(k, load_pts),
        "seg_t": t, "seg_w": seg_w,
        "seg_basis": elements.seg_basis(k, t),
        "trace": trace_tables(k, len(t)),
    }
    for v in tables.values():
        if isinstance(v, np.ndarray):
            v.setflags(write=False)
    return tables


@lru_cache(maxsize=None)
def trace_tables(degree, npts):
    """Cell basis values/gradients on each local edge, both orientations.

    Keys (local_edge, along_face_param); the points are the Gauss points of
    segment_rule(npts) mapped onto the edge so that parameter t matches the
    face parametrization (t=0 at the lower-numbered global vertex when the
    flag is True, reversed otherwise).
    """
    t, _ = segment_rule(npts)
    out = {}
    for l in range(3):
        a, b = elements.TRI_EDGE_VERTS[l]
        Ra = np.asarray(elements.TRI_VERTS[a], dtype=float)
        Rb = np.asarray(elements.TRI_VERTS[b], dtype=float)
        for d in (False, True):
            p0, p1 = (Ra, Rb) if d else (Rb, Ra)
            pts = (1.0 - t)[:, None] * p0 + t[:, None] * p1
            val = elements.tri_basis(degree, pts)
            grad = elements.tri_basis_grad(degree, pts)
            val.setflags(write=False)
            grad.setflags(write=False)
            out[(l, d)] = (val, grad)
    return out


@dataclass
class LocalBlocks:
    """Dense element matrices in the local ordering
    [cell nodes x/y interleaved | face 0 | face 1 | face 2] for velocity and
    [cell pressure | face 0 | face 1 | face 2] for pressure."""
    a: np.ndarray          # velocity x velocity, viscosity not applied
    b: np.ndarray          # pressure rows x velocity columns
    weights: np.ndarray    # integral of each cell pressure basis function
    n_grad: np.ndarray     # broken-gradient + h^-1 jump Gram (norm matrix)


class LocalBuilder:
    """Computes and caches LocalBlocks per cell of one (mesh, cfg) pair."""

    def __init__(self, mesh, cfg):
        self.mesh = mesh
        self.cfg = cfg
        self.k = cfg.degree
        self.alpha = cfg.alpha
        self.tab = reference_tables(self.k)
        self.nb = elements.tri_dim(self.k)
        self.np_ = elements.tri_dim(self.k - 1)
        self.nfn = self.k + 1
        self.n_sc = self.nb + 3 * self.nfn
        self._v0, self._J, self._det, self._Jinv = mesh.jacobians()
        self._cache = {}

    def cell_blocks(self, c):
        key = (self._J[c].tobytes(), self.mesh.cell_face_dir[c].tobytes())
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        blocks = self._compute(c)
        self._cache[key] = blocks
        return blocks

    def _compute(self, c):
        tab = self.tab
        nb, np_, nfn, n_sc = self.nb, self.np_, self.nfn, self.n_sc
        J = self._J[c]
        Jinv = self._Jinv[c]
        det = self._det[c]
        h = self.mesh.diameters[c]
        dirs = self.mesh.cell_face_dir[c]

        wv = tab["vol_w"] * det
        Gp = np.einsum("aqr,rc->aqc", tab["g_vol"], Jinv)

        A = np.zeros((n_sc, n_sc))
        N = np.zeros((n_sc, n_sc))
        stiff = np.einsum("aqc,bqc,q->ab", Gp, Gp, wv)
        A[:nb, :nb] += stiff
        N[:nb, :nb] += stiff

        B = np.zeros((np_ + 3 * nfn, 2 * n_sc))
        Bvol = np.einsum("q,aqc,mq->mac", wv, Gp, tab["p_vol"])
        B[:np_, : 2 * nb] -= Bvol.reshape(np_, 2 * nb)

        edge_vecs = (J[:, 1] - J[:, 0], -J[:, 1], J[:, 0])
        S = tab["seg_basis"]
        for l in range(3):
            e = edge_vecs[l]
            length = float(np.hypot(e[0], e[1]))
            n_out = _ROT @ e / length
            wE = tab["seg_w"] * length
            Tval, Tgrad = tab["trace"][(l, bool(dirs[l]))]
            dn = np.einsum("aqr,rc,c->aq", Tgrad, Jinv, n_out)

            D = np.zeros((n_sc, len(wE)))
            D[:nb] = Tval
            fl = nb + l * nfn
            D[fl:fl + nfn] = -S
            dnC = np.zeros_like(D)
            dnC[:nb] = dn

            DW = D * wE
            A += (self.alpha / h) * DW @ D.T
            A -= DW @ dnC.T + (dnC * wE) @ D.T
            N += (1.0 / h) * DW @ D.T

            rows = slice(np_ + l * nfn, np_ + (l + 1) * nfn)
            E = np.einsum("q,jq,sq->js", wE, S, D)
            B[rows] += np.einsum("js,c->jsc", E, n_out).reshape(nfn, 2 * n_sc)

        weights = wv @ tab["p_vol"].T
        eye2 = np.eye(2)
        return LocalBlocks(a=np.kron(A, eye2), b=B, weights=weights,
                           n_grad=np.kron(N, eye2))

    def load_vector(self, c, f):
        """Right-hand side contribution of the body force on the cell
        velocity dofs (facet entries are zero)."""
        tab = self.tab
        pts = self._v0[c] + tab["load_pts"] @ self._J[c].T
        F = np.asarray(f(pts), dtype=float)
        wl = tab["load_w"] * self._det[c]
        return np.einsum("q,qc,aq->ac", wl, F, tab["v_load"]).ravel()

    def velocity_dof_map(self, spaces, off_fv=0):
        """(n_cells, local velocity size) global indices in local order."""
        cv, fv = spaces.cell_velocity, spaces.facet_velocity
        parts = [cv.entity_dofs]
        for l in range(3):
            parts.append(off_fv + fv.entity_dofs[self.mesh.cell_faces[:, l]])
        return np.hstack(parts)

    def pressure_dof_map(self, spaces, off_cp=0, off_fp=0):
        cp, fp = spaces.cell_pressure, spaces.facet_pressure
        parts = [off_cp + cp.entity_dofs]
        for l in range(3):
            parts.append(off_fp + fp.entity_dofs[self.mesh.cell_faces[:, l]])
        return np.hstack(parts)

    def all_blocks(self):
        """LocalBlocks for every cell, computed with thread_count() workers
        and returned in cell order regardless of worker count."""
        nc = self.mesh.n_cells
        nthreads = thread_count()
        if nthreads == 1 or nc < 64:
            return [self.cell_blocks(c) for c in range(nc)]
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            return list(pool.map(self.cell_blocks, range(nc), chunksize=64))


def local_a(mesh, cfg, cell):
    """Velocity bilinear form block of one cell (viscosity not applied)."""
    return LocalBuilder(mesh, cfg).cell_blocks(cell).a


def local_b(mesh, cfg, cell):
    """Pressure-velocity coupling block of one cell."""
    return LocalBuilder(mesh, cfg).cell_blocks(cell).b


def local_blocks(mesh, cfg, cell):
    return LocalBuilder(mesh, cfg).cell_blocks(cell)


@dataclass
class SaddleSystem:
    """Assembled symmetric saddle-point system after boundary elimination.

    ``slices`` maps block names (cell_velocity, facet_velocity,
    cell_pressure, facet_pressure) to index ranges of the solution vector;
    the mean-pressure multiplier is the single trailing unknown.
    ``bc_values`` holds the prescribed value for every global dof
    (zero off the constrained set).
    """
    matrix: sp.csr_matrix
    rhs: np.ndarray
    slices: dict
    multiplier_index: int
    constrained: np.ndarray
    bc_values: np.ndarray
    pressure_weights: np.ndarray
    total_area: float
    cfg: object
    spaces: object
    mesh: object

    @property
    def n_dofs(self):
        return self.matrix.shape[0]


class CompatibilityError(ValueError):
    """Boundary datum with a net outward flux that the pressure constraint
    cannot absorb at solver precision."""


def _check_compatible(mesh, layout, bc):
    from .spaces import facet_boundary_flux
    flux = facet_boundary_flux(mesh, layout, bc)
    scale = 1.0 + float(np.abs(bc).max()) if len(bc) else 1.0
    if abs(flux) > 1e-10 * scale:
        raise CompatibilityError(
            "boundary velocity datum has net flux %.3e; interpolate with "
            "flux correction or balance the datum" % flux)


def _eliminate_symmetric(rows, cols, vals, rhs, n, constrained, bc_full):
    mask = np.zeros(n, dtype=bool)
    mask[constrained] = True
    rc = mask[rows]
    cc = mask[cols]
    move = ~rc & cc
    np.add.at(rhs, rows[move], -vals[move] * bc_full[cols[move]])
    keep = ~rc & ~cc
    rows = np.concatenate([rows[keep], constrained])
    cols = np.concatenate([cols[keep], constrained])
    vals = np.concatenate([vals[keep], np.ones(len(constrained))])
    rhs[constrained] = bc_full[constrained]
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    return mat, rhs


def assemble(mesh, cfg, spaces, f=None, bc=None):
    """Assemble the full (uncondensed) system for one problem.

    f: body force callable (points (n, 2) -> (n, 2)) or None for zero.
    bc: facet velocity boundary values over the facet layout, or None for
    homogeneous. The datum must carry zero net flux.
    """
    cv, fv = spaces.cell_velocity, spaces.facet_velocity
    cp, fp = spaces.cell_pressure, spaces.facet_pressure
    ncv, nfv, ncp, nfp = cv.ndof, fv.ndof, cp.ndof, fp.ndof
    off_fv = ncv
    off_cp = ncv + nfv
    off_fp = off_cp + ncp
    i_mul = off_fp + nfp
    n = i_mul + 1

    if bc is None:
        bc = np.zeros(nfv)
    bc = np.asarray(bc, dtype=float)
    if bc.shape != (nfv,):
        raise ValueError("bc must cover all %d facet velocity dofs" % nfv)
    if not np.isfinite(bc).all():
        raise ValueError("boundary data contains non-finite values")
    _check_compatible(mesh, fv, bc)

    builder = LocalBuilder(mesh, cfg)
    blocks = builder.all_blocks()
    vmap = builder.velocity_dof_map(spaces, off_fv=off_fv)
    pmap = builder.pressure_dof_map(spaces, off_cp=off_cp, off_fp=off_fp)

    rows, cols, vals = [], [], []
    rhs = np.zeros(n)
    pressure_weights = np.zeros(ncp)

    def put(r, c, m):
        rr, cc = np.meshgrid(r, c, indexing="ij")
        rows.append(rr.ravel())
        cols.append(cc.ravel())
        vals.append(np.asarray(m, dtype=float).ravel())

    for c in range(mesh.n_cells):
        blk = blocks[c]
        gv = vmap[c]
        gp = pmap[c]
        put(gv, gv, cfg.nu * blk.a)
        put(gp, gv, blk.b)
        put(gv, gp, blk.b.T)
        gcp = cp.entity_dofs[c]
        put(off_cp + gcp, [i_mul], blk.weights[:, None])
        put([i_mul], off_cp + gcp, blk.weights[None, :])
        pressure_weights[gcp] = blk.weights
        if f is not None:
            load = builder.load_vector(c, f)
            if not np.isfinite(load).all():
                raise ValueError("body force evaluated to non-finite values on cell %d" % c)
            np.add.at(rhs, gv[: len(load)], load)

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)

    bc_full = np.zeros(n)
    bc_full[off_fv + np.arange(nfv)] = bc
    constrained = off_fv + fv.constrained

    mat, rhs = _eliminate_symmetric(rows, cols, vals, rhs, n, constrained, bc_full)
    slices = {
        "cell_velocity": slice(0, ncv),
        "facet_velocity": slice(off_fv, off_fv + nfv),
        "cell_pressure": slice(off_cp, off_cp + ncp),
        "facet_pressure": slice(off_fp, off_fp + nfp),
    }
    return SaddleSystem(
        matrix=mat, rhs=rhs, slices=slices, multiplier_index=i_mul,
        constrained=constrained, bc_values=bc_full,
        pressure_weights=pressure_weights, total_area=mesh.total_area(),
        cfg=cfg, spaces=spaces, mesh=mesh)
