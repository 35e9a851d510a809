"""Direct solution of the assembled system, full or statically condensed.

The condensed path eliminates cell velocity and cell pressure per cell: with
x the cell unknowns and y the interface unknowns (free facet velocity, facet
pressure, mean multiplier) of one cell, the local block

    [ S   C ] [x]   [rx]
    [ C^T D ] [y] = [ry]

contributes D - C^T S^-1 C and ry - C^T S^-1 rx to the global interface
system; cell unknowns are recovered as x = S^-1 (rx - C y). S couples cell
velocity and cell pressure only and is invertible cell by cell because the
cell pressure is tested against the cell part of the divergence form.

Both paths share one sparse LU solve with symmetric max-row equilibration
and a single iterative refinement step, assert a small relative residual,
and shift the recovered cell and facet pressure by the same constant so the
area-weighted cell pressure mean is exactly zero.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import elements
from .assembly import LocalBuilder, _check_compatible

RESIDUAL_RTOL = 1e-10


class SolverError(RuntimeError):
    """Linear solve failed or left a residual above tolerance."""


@dataclass
class DiscreteStokesSolution:
    u: np.ndarray          # cell velocity coefficients
    ubar: np.ndarray       # facet velocity coefficients
    p: np.ndarray          # cell pressure coefficients
    pbar: np.ndarray       # facet pressure coefficients
    multiplier: float
    cfg: object
    spaces: object
    mesh: object

    def velocity_coefficients(self):
        return np.concatenate([self.u, self.ubar])


@dataclass
class CondensedInfo:
    n_condensed: int
    nnz: int


def _direct_solve(mat, rhs, what):
    mat = mat.tocsr()
    row_max = np.zeros(mat.shape[0])
    if mat.nnz:
        absmat = abs(mat)
        row_max = np.asarray(absmat.max(axis=1).todense()).ravel()
    if not np.all(row_max > 0.0):
        raise SolverError("%s matrix has an empty row" % what)
    d = 1.0 / np.sqrt(row_max)
    scaled = mat.multiply(d[:, None]).multiply(d[None, :]).tocsc()
    try:
        lu = spla.splu(scaled)
    except RuntimeError as exc:
        raise SolverError("%s factorization failed: %s" % (what, exc)) from exc
    x = d * lu.solve(d * rhs)
    # one refinement step against the unscaled matrix
    r = rhs - mat @ x
    x = x + d * lu.solve(d * r)
    res = float(np.linalg.norm(rhs - mat @ x))
    tol = RESIDUAL_RTOL * (1.0 + float(np.linalg.norm(rhs)))
    if not res <= tol:
        raise SolverError("%s solve residual %.3e exceeds %.3e" % (what, res, tol))
    return x


def _recenter(p, pbar, weights, area):
    shift = float(weights @ p) / area
    return p - shift, pbar - shift


def solve_full(system):
    """Solve the assembled saddle-point system without condensation."""
    x = _direct_solve(system.matrix, system.rhs, "full")
    s = system.slices
    p, pbar = _recenter(x[s["cell_pressure"]], x[s["facet_pressure"]],
                        system.pressure_weights, system.total_area)
    return DiscreteStokesSolution(
        u=x[s["cell_velocity"]].copy(), ubar=x[s["facet_velocity"]].copy(),
        p=p, pbar=pbar, multiplier=float(x[system.multiplier_index]),
        cfg=system.cfg, spaces=system.spaces, mesh=system.mesh)


@dataclass
class CondensedSystem:
    """Interface system [free facet velocity | facet pressure | multiplier]
    with the per-cell back-substitution data."""
    matrix: sp.csr_matrix
    rhs: np.ndarray
    back: list
    free_ids: np.ndarray
    n_free: int
    multiplier_index: int
    pressure_weights: np.ndarray
    bc: np.ndarray


def build_condensed_system(mesh, cfg, spaces, f=None, bc=None):
    """Assemble cellwise and condense out the cell unknowns."""
    cv, fv = spaces.cell_velocity, spaces.facet_velocity
    cp, fp = spaces.cell_pressure, spaces.facet_pressure
    nfv, nfp = fv.ndof, fp.ndof

    if bc is None:
        bc = np.zeros(nfv)
    bc = np.asarray(bc, dtype=float)
    _check_compatible(mesh, fv, bc)

    con_mask = np.zeros(nfv, dtype=bool)
    con_mask[fv.constrained] = True
    pos_fv = -np.ones(nfv, dtype=np.int64)
    free_ids = np.flatnonzero(~con_mask)
    pos_fv[free_ids] = np.arange(len(free_ids))
    n_free = len(free_ids)
    m = n_free + nfp + 1
    i_mul = m - 1

    builder = LocalBuilder(mesh, cfg)
    blocks = builder.all_blocks()
    k = cfg.degree
    nb = elements.tri_dim(k)
    np_ = elements.tri_dim(k - 1)
    nfn = k + 1
    ncv_loc = 2 * nb
    nfv_loc = 6 * nfn
    nfp_loc = 3 * nfn
    nx = ncv_loc + np_

    rows, cols, vals = [], [], []
    rhs = np.zeros(m)
    back = []
    pressure_weights = np.zeros(cp.ndof)

    for c in range(mesh.n_cells):
        blk = blocks[c]
        a = cfg.nu * blk.a
        b = blk.b

        S = np.zeros((nx, nx))
        S[:ncv_loc, :ncv_loc] = a[:ncv_loc, :ncv_loc]
        S[ncv_loc:, :ncv_loc] = b[:np_, :ncv_loc]
        S[:ncv_loc, ncv_loc:] = b[:np_, :ncv_loc].T

        ny = nfv_loc + nfp_loc + 1
        C = np.zeros((nx, ny))
        C[:ncv_loc, :nfv_loc] = a[:ncv_loc, ncv_loc:]
        C[:ncv_loc, nfv_loc:nfv_loc + nfp_loc] = b[np_:, :ncv_loc].T
        C[ncv_loc:, :nfv_loc] = b[:np_, ncv_loc:]
        C[ncv_loc:, ny - 1] = blk.weights

        D = np.zeros((ny, ny))
        D[:nfv_loc, :nfv_loc] = a[ncv_loc:, ncv_loc:]
        D[:nfv_loc, nfv_loc:nfv_loc + nfp_loc] = b[np_:, ncv_loc:].T
        D[nfv_loc:nfv_loc + nfp_loc, :nfv_loc] = b[np_:, ncv_loc:]

        rx = np.zeros(nx)
        if f is not None:
            rx[:ncv_loc] = builder.load_vector(c, f)
        ry = np.zeros(ny)

        faces = mesh.cell_faces[c]
        gfv = fv.entity_dofs[faces].ravel()
        gfp = fp.entity_dofs[faces].ravel()
        con_loc = con_mask[gfv]
        y_keep = np.concatenate([
            np.flatnonzero(~con_loc),
            nfv_loc + np.arange(nfp_loc),
            [ny - 1],
        ])
        if con_loc.any():
            con_pos = np.flatnonzero(con_loc)
            bvals = bc[gfv[con_pos]]
            rx -= C[:, con_pos] @ bvals
            ry -= D[:, con_pos] @ bvals
        Ck = C[:, y_keep]
        Dk = D[np.ix_(y_keep, y_keep)]
        ryk = ry[y_keep]

        sol = np.linalg.solve(S, np.hstack([Ck, rx[:, None]]))
        SC, Sr = sol[:, :-1], sol[:, -1]
        schur = Dk - Ck.T @ SC
        g = ryk - Ck.T @ Sr

        gy = np.concatenate([
            pos_fv[gfv[~con_loc]],
            n_free + gfp,
            [i_mul],
        ])
        rr, cc = np.meshgrid(gy, gy, indexing="ij")
        rows.append(rr.ravel())
        cols.append(cc.ravel())
        vals.append(schur.ravel())
        np.add.at(rhs, gy, g)
        back.append((gy, SC, Sr))
        pressure_weights[cp.entity_dofs[c]] = blk.weights

    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(m, m)).tocsr()
    return CondensedSystem(
        matrix=mat, rhs=rhs, back=back, free_ids=free_ids, n_free=n_free,
        multiplier_index=i_mul, pressure_weights=pressure_weights, bc=bc)


def solve_condensed(mesh, cfg, spaces, f=None, bc=None):
    """Condense, solve the interface system, and recover cell unknowns.
    Returns (solution, CondensedInfo)."""
    cv, fv = spaces.cell_velocity, spaces.facet_velocity
    cp, fp = spaces.cell_pressure, spaces.facet_pressure
    cond = build_condensed_system(mesh, cfg, spaces, f=f, bc=bc)
    xc = _direct_solve(cond.matrix, cond.rhs, "condensed")

    k = cfg.degree
    ncv_loc = 2 * elements.tri_dim(k)
    u = np.zeros(cv.ndof)
    p = np.zeros(cp.ndof)
    for c in range(mesh.n_cells):
        gy, SC, Sr = cond.back[c]
        xk = Sr - SC @ xc[gy]
        u[cv.entity_dofs[c]] = xk[:ncv_loc]
        p[cp.entity_dofs[c]] = xk[ncv_loc:]

    ubar = np.zeros(fv.ndof)
    ubar[cond.free_ids] = xc[:cond.n_free]
    ubar[fv.constrained] = cond.bc[fv.constrained]
    pbar = xc[cond.n_free:cond.n_free + fp.ndof].copy()
    p, pbar = _recenter(p, pbar, cond.pressure_weights, mesh.total_area())

    solution = DiscreteStokesSolution(
        u=u, ubar=ubar, p=p, pbar=pbar, multiplier=float(xc[cond.multiplier_index]),
        cfg=cfg, spaces=spaces, mesh=mesh)
    return solution, CondensedInfo(n_condensed=cond.matrix.shape[0], nnz=cond.matrix.nnz)
