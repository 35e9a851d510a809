"""Error measures, mesh-dependent seminorms, and structure diagnostics.

Volume integrals use a fixed degree-10 triangle rule. Cells whose closure
touches a marked singular point of the exact solution are integrated on a
graded partition: the cell is split toward the singular point by recursive
midpoint subdivision (depth 8), the three children away from the point at
each level integrated with the base rule. Pressure errors are compared
after aligning means, using int (p - p_h) over the domain so no separate
mean computation is needed.

The energy error of a velocity pair (u_h, ubar_h) against a continuous
exact field u is

    ( ||grad_h(u - u_h)||^2 + sum_K h_K^-1 ||u_h - ubar_h||^2_bK )^(1/2);

the exact field drops out of the facet term because its trace is single
valued per face record.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import elements
from .assembly import LocalBuilder, reference_tables
from .quadrature import triangle_rule
from .spaces import build_spaces

ERROR_QUAD_DEGREE = 10
SINGULAR_SPLIT_DEPTH = 8
_BARY_TOL = 1e-12


# --------------------------------------------------------------------------
# face incidence in array form


@dataclass
class _FaceArrays:
    lengths: np.ndarray   # (nf,)
    normals: np.ndarray   # (nf, 2), outward from parent 0
    cells: np.ndarray     # (nf, 2), -1 when there is no second parent
    locals_: np.ndarray   # (nf, 2)
    dirs: np.ndarray      # (nf, 2) cell traversal matches face param


def _face_arrays(mesh):
    nf = mesh.n_faces
    lengths = np.empty(nf)
    normals = np.empty((nf, 2))
    cells = -np.ones((nf, 2), dtype=np.int64)
    locals_ = np.zeros((nf, 2), dtype=np.int64)
    dirs = np.zeros((nf, 2), dtype=bool)
    for fid, f in enumerate(mesh.faces):
        lengths[fid] = f.length
        normals[fid] = f.normal
        for r, (c, l) in enumerate(zip(f.cells, f.local)):
            cells[fid, r] = c
            locals_[fid, r] = l
            dirs[fid, r] = mesh.cell_face_dir[c, l]
    return _FaceArrays(lengths, normals, cells, locals_, dirs)


def _cell_face_traces(mesh, spaces, coeffs_flat, face_ids, rank, what="value"):
    """Cell velocity trace (or gradient trace) on faces from parent `rank`
    at the face Gauss points of the assembly tables."""
    k = spaces.cfg.degree
    tab = reference_tables(k)
    nq = len(tab["seg_t"])
    fa = _face_arrays(mesh)
    cells = fa.cells[face_ids, rank]
    locs = fa.locals_[face_ids, rank]
    dirs = fa.dirs[face_ids, rank]
    _, _, _, Jinv = mesh.jacobians()
    ent = spaces.cell_velocity.entity_dofs
    nb = elements.tri_dim(k)
    shape = (len(face_ids), nq, 2) if what == "value" else (len(face_ids), nq, 2, 2)
    out = np.zeros(shape)
    for l in range(3):
        for d in (False, True):
            sel = (locs == l) & (dirs == d)
            if not sel.any():
                continue
            Tval, Tgrad = tab["trace"][(l, d)]
            coeffs = coeffs_flat[ent[cells[sel]]].reshape(-1, nb, 2)
            if what == "value":
                out[sel] = np.einsum("gnc,nq->gqc", coeffs, Tval)
            else:
                gphys = np.einsum("nqr,gri->gnqi", Tgrad, Jinv[cells[sel]])
                out[sel] = np.einsum("gnc,gnqi->gqci", coeffs, gphys)
    return out


def _facet_velocity_values(spaces, coeffs_flat, face_ids):
    k = spaces.cfg.degree
    tab = reference_tables(k)
    coeffs = coeffs_flat[spaces.facet_velocity.entity_dofs[face_ids]]
    coeffs = coeffs.reshape(len(face_ids), k + 1, 2)
    return np.einsum("gjc,jq->gqc", coeffs, tab["seg_basis"])


# --------------------------------------------------------------------------
# singularity-graded volume integration


def _bary_contains(verts, point):
    J = np.stack([verts[1] - verts[0], verts[2] - verts[0]], axis=-1)
    lam = np.linalg.solve(J, np.asarray(point) - verts[0])
    bary = np.array([1.0 - lam[0] - lam[1], lam[0], lam[1]])
    return bool((bary >= -_BARY_TOL).all())


def _split_toward(verts, point, depth):
    """Sub-triangles covering `verts`, graded toward `point`."""
    out = []
    cur = np.asarray(verts, dtype=float)
    for _ in range(depth):
        v0, v1, v2 = cur
        m01, m12, m20 = 0.5 * (v0 + v1), 0.5 * (v1 + v2), 0.5 * (v2 + v0)
        children = [
            np.array([v0, m01, m20]), np.array([m01, v1, m12]),
            np.array([m20, m12, v2]), np.array([m01, m12, m20]),
        ]
        picked = None
        for ch in children:
            if picked is None and _bary_contains(ch, point):
                picked = ch
            else:
                out.append(ch)
        cur = picked
    out.append(cur)
    return out


def _volume_batches(mesh, singular_points):
    """List of (owner_cells, triangles (m, 3, 2)) covering the mesh."""
    verts_all = mesh.vertices[mesh.cells]           # (nc, 3, 2)
    singular_cells = set()
    for s in singular_points:
        for c in range(mesh.n_cells):
            if _bary_contains(verts_all[c], s):
                singular_cells.add(c)
    regular = np.array(sorted(set(range(mesh.n_cells)) - singular_cells), dtype=np.int64)
    batches = []
    if len(regular):
        batches.append((regular, verts_all[regular]))
    sub_owners, sub_tris = [], []
    for c in sorted(singular_cells):
        point = next(s for s in singular_points if _bary_contains(verts_all[c], s))
        for tri in _split_toward(verts_all[c], point, SINGULAR_SPLIT_DEPTH):
            sub_owners.append(c)
            sub_tris.append(tri)
    if sub_owners:
        batches.append((np.array(sub_owners, dtype=np.int64), np.array(sub_tris)))
    return batches


def integrate_over_cells(mesh, integrand, singular_points=(), n_out=1):
    """Sum of integrals over all cells of integrand(owner_cells, points)
    where points has shape (m, nq, 2); the integrand returns (m, nq) values
    or (m, nq, n_out) for several simultaneous integrands."""
    pts, w = triangle_rule(ERROR_QUAD_DEGREE)
    total = np.zeros(n_out)
    for owners, tris in _volume_batches(mesh, singular_points):
        J = np.stack([tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0]], axis=-1)
        det = np.abs(J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0])
        phys = tris[:, None, 0, :] + np.einsum("qr,mcr->mqc", pts, J)
        vals = np.asarray(integrand(owners, phys))
        if vals.ndim == 2:
            vals = vals[..., None]
        total += np.einsum("q,m,mqk->k", w, det, vals)
    return total if n_out > 1 else float(total[0])


def _discrete_evaluators(sol, mesh):
    """Closures evaluating u_h, grad u_h, p_h at physical points given the
    owning cells."""
    spaces = sol.spaces
    k = spaces.cfg.degree
    nb = elements.tri_dim(k)
    npress = elements.tri_dim(k - 1)
    v0, _, _, Jinv = mesh.jacobians()
    u_coeff = sol.u[spaces.cell_velocity.entity_dofs].reshape(-1, nb, 2)
    p_coeff = sol.p[spaces.cell_pressure.entity_dofs].reshape(-1, npress)

    def ref_coords(owners, phys):
        return np.einsum("mqi,mri->mqr", phys - v0[owners][:, None, :], Jinv[owners])

    def vel(owners, phys):
        ref = ref_coords(owners, phys)
        m, nq, _ = ref.shape
        basis = elements.tri_basis(k, ref.reshape(-1, 2)).reshape(nb, m, nq)
        return np.einsum("mnc,nmq->mqc", u_coeff[owners], basis)

    def grad(owners, phys):
        ref = ref_coords(owners, phys)
        m, nq, _ = ref.shape
        gref = elements.tri_basis_grad(k, ref.reshape(-1, 2)).reshape(nb, m, nq, 2)
        gphys = np.einsum("nmqr,mri->nmqi", gref, Jinv[owners])
        return np.einsum("mnc,nmqi->mqci", u_coeff[owners], gphys)

    def pres(owners, phys):
        ref = ref_coords(owners, phys)
        m, nq, _ = ref.shape
        basis = elements.tri_basis(k - 1, ref.reshape(-1, 2)).reshape(npress, m, nq)
        return np.einsum("mn,nmq->mq", p_coeff[owners], basis)

    return vel, grad, pres


def _volume_error_parts(exact, sol, mesh):
    """(int |u - u_h|^2, int |grad(u - u_h)|^2, mean-aligned int (p - p_h)^2)."""
    vel, grad, pres = _discrete_evaluators(sol, mesh)

    def integrand(owners, phys):
        du = exact.velocity(phys) - vel(owners, phys)
        dg = exact.velocity_gradient(phys) - grad(owners, phys)
        dp = exact.pressure(phys) - pres(owners, phys)
        return np.stack([
            np.einsum("mqc,mqc->mq", du, du),
            np.einsum("mqci,mqci->mq", dg, dg),
            dp * dp,
            dp,
        ], axis=-1)

    eu2, eg2, dp2, dp1 = integrate_over_cells(
        mesh, integrand, singular_points=exact.singular_points, n_out=4)
    ep2 = dp2 - dp1 * dp1 / mesh.total_area()
    return eu2, eg2, max(ep2, 0.0)


def _trace_mismatch_sq(sol, mesh):
    """sum_K h_K^-1 int_bK |u_h - ubar_h|^2."""
    spaces = sol.spaces
    tab = reference_tables(spaces.cfg.degree)
    fa = _face_arrays(mesh)
    ws = tab["seg_w"]
    total = 0.0
    all_faces = np.arange(mesh.n_faces)
    for rank, face_ids in ((0, all_faces), (1, mesh.interior_faces)):
        if not len(face_ids):
            continue
        tr = _cell_face_traces(mesh, spaces, sol.u, face_ids, rank)
        bv = _facet_velocity_values(spaces, sol.ubar, face_ids)
        d2 = np.einsum("gqc,gqc->gq", tr - bv, tr - bv)
        per_face = fa.lengths[face_ids] * (d2 @ ws)
        hK = mesh.diameters[fa.cells[face_ids, rank]]
        total += float(np.sum(per_face / hK))
    return total


def l2_errors(exact, sol, mesh):
    """(velocity L2 error, mean-aligned pressure L2 error)."""
    eu2, _, ep2 = _volume_error_parts(exact, sol, mesh)
    return math.sqrt(eu2), math.sqrt(ep2)


def energy_error(exact, sol, mesh):
    _, eg2, _ = _volume_error_parts(exact, sol, mesh)
    return math.sqrt(eg2 + _trace_mismatch_sq(sol, mesh))


def structure_checks(sol, mesh):
    """(sup of cellwise div u_h, sup of normal trace jumps across interior
    faces), both evaluated pointwise on quadrature/nodal points."""
    spaces = sol.spaces
    k = spaces.cfg.degree
    nb = elements.tri_dim(k)
    pts = np.array([[1.0 / 3.0, 1.0 / 3.0]]) if k == 1 else np.asarray(elements.TRI_VERTS, dtype=float)
    gref = elements.tri_basis_grad(k, pts)
    _, _, _, Jinv = mesh.jacobians()
    gphys = np.einsum("npr,cri->cnpi", gref, Jinv)
    coeffs = sol.u[spaces.cell_velocity.entity_dofs].reshape(-1, nb, 2)
    div = np.einsum("cni,cnpi->cp", coeffs, gphys)
    div_sup = float(np.abs(div).max()) if div.size else 0.0

    jump_sup = 0.0
    ids = mesh.interior_faces
    if len(ids):
        fa = _face_arrays(mesh)
        tr0 = _cell_face_traces(mesh, spaces, sol.u, ids, 0)
        tr1 = _cell_face_traces(mesh, spaces, sol.u, ids, 1)
        jn = np.einsum("gqc,gc->gq", tr0 - tr1, fa.normals[ids])
        jump_sup = float(np.abs(jn).max())
    return div_sup, jump_sup


def seminorm_diagnostics(sol, mesh, body_force=None):
    """Dict of mesh-dependent diagnostics of the discrete solution:

    velocity_jump       (sum_F h_F^-1 ||[u_h]||_F^2)^(1/2), boundary faces
                        contribute the full trace
    velocity_grad_jump  (sum_{F int} h_F ||[grad u_h] n||_F^2)^(1/2)
    trace_mismatch      (sum_K h_K^-1 ||u_h - ubar_h||_bK^2)^(1/2)
    oscillation         (sum_K h_K^2 ||f||_K^2)^(1/2) or None without f
    """
    spaces = sol.spaces
    tab = reference_tables(spaces.cfg.degree)
    ws = tab["seg_w"]
    fa = _face_arrays(mesh)
    interior = mesh.interior_faces
    boundary = mesh.boundary_faces

    jump2 = 0.0
    if len(interior):
        tr0 = _cell_face_traces(mesh, spaces, sol.u, interior, 0)
        tr1 = _cell_face_traces(mesh, spaces, sol.u, interior, 1)
        d2 = np.einsum("gqc,gqc->gq", tr0 - tr1, tr0 - tr1)
        jump2 += float(np.sum(d2 @ ws))
    if len(boundary):
        tr = _cell_face_traces(mesh, spaces, sol.u, boundary, 0)
        d2 = np.einsum("gqc,gqc->gq", tr, tr)
        jump2 += float(np.sum(d2 @ ws))
    # h_F^-1 cancels one power of the length factor of ds
    grad_jump2 = 0.0
    if len(interior):
        g0 = _cell_face_traces(mesh, spaces, sol.u, interior, 0, what="grad")
        g1 = _cell_face_traces(mesh, spaces, sol.u, interior, 1, what="grad")
        jn = np.einsum("gqci,gi->gqc", g0 - g1, fa.normals[interior])
        d2 = np.einsum("gqc,gqc->gq", jn, jn)
        grad_jump2 = float(np.sum(fa.lengths[interior] ** 2 * (d2 @ ws)))

    osc = None
    if body_force is not None:
        h2 = mesh.diameters ** 2

        def integrand(owners, phys):
            fv = np.asarray(body_force(phys))
            return h2[owners][:, None] * np.einsum("mqc,mqc->mq", fv, fv)

        osc = math.sqrt(integrate_over_cells(mesh, integrand))

    return {
        "velocity_jump": math.sqrt(jump2),
        "velocity_grad_jump": math.sqrt(grad_jump2),
        "trace_mismatch": math.sqrt(_trace_mismatch_sq(sol, mesh)),
        "oscillation": osc,
    }


def eoc(errors):
    """Observed orders between refinement levels: [None, log2(e0/e1), ...]."""
    rates = [None]
    for prev, cur in zip(errors, errors[1:]):
        if prev > 0.0 and cur > 0.0:
            rates.append(math.log2(prev / cur))
        else:
            rates.append(None)
    return rates


def inf_sup_probe(mesh, cfg, layouts=None, max_dofs=2000):
    """Smallest nonzero generalized singular value of the divergence
    coupling: sqrt of the second-smallest eigenvalue of
    B N_v^-1 B^T q = mu N_p q, the smallest belonging to the constant
    pressure mode. Dense diagnostic; refuses systems above `max_dofs`."""
    spaces = build_spaces(mesh, cfg) if layouts is None else layouts
    cv, fv = spaces.cell_velocity, spaces.facet_velocity
    cp, fp = spaces.cell_pressure, spaces.facet_pressure
    nvel = cv.ndof + fv.ndof
    npres = cp.ndof + fp.ndof
    total = nvel - len(fv.constrained) + npres
    if total > max_dofs:
        raise ValueError("inf_sup_probe is dense; %d dofs exceed the %d limit"
                         % (total, max_dofs))

    builder = LocalBuilder(mesh, cfg)
    tab = builder.tab
    vmap = builder.velocity_dof_map(spaces, off_fv=cv.ndof)
    pmap = builder.pressure_dof_map(spaces, off_cp=0, off_fp=cp.ndof)
    NV = np.zeros((nvel, nvel))
    B = np.zeros((npres, nvel))
    NP = np.zeros((npres, npres))
    k = cfg.degree
    nfn = k + 1
    np_ = elements.tri_dim(k - 1)
    S = tab["seg_basis"]
    ws = tab["seg_w"]
    for c in range(mesh.n_cells):
        blk = builder.cell_blocks(c)
        gv = vmap[c]
        gp = pmap[c]
        NV[np.ix_(gv, gv)] += blk.n_grad
        B[np.ix_(gp, gv)] += blk.b
        wv = tab["vol_w"] * (2.0 * mesh.areas[c])
        mass_c = np.einsum("q,mq,nq->mn", wv, tab["p_vol"], tab["p_vol"])
        gcp = gp[:np_]
        NP[np.ix_(gcp, gcp)] += mass_c
        hK = mesh.diameters[c]
        for l in range(3):
            fid = mesh.cell_faces[c, l]
            length = mesh.faces[fid].length
            gfp = gp[np_ + l * nfn: np_ + (l + 1) * nfn]
            NP[np.ix_(gfp, gfp)] += hK * length * (S * ws) @ S.T

    free = np.setdiff1d(np.arange(nvel), cv.ndof + fv.constrained)
    NVf = NV[np.ix_(free, free)]
    Bf = B[:, free]
    A1 = Bf @ np.linalg.solve(NVf, Bf.T)
    A1 = 0.5 * (A1 + A1.T)
    w = scipy.linalg.eigh(A1, NP, eigvals_only=True)
    return math.sqrt(max(w[1], 0.0))


@dataclass
class ErrorReport:
    err_u_l2: float
    err_u_energy: float
    err_p_l2: float
    div_sup: float
    normal_jump_sup: float
    velocity_jump: float
    velocity_grad_jump: float
    trace_mismatch: float
    oscillation: float
    u_inf: float


def error_report(exact, sol, mesh):
    """All error measures and diagnostics in one sweep."""
    eu2, eg2, ep2 = _volume_error_parts(exact, sol, mesh)
    mismatch2 = _trace_mismatch_sq(sol, mesh)
    div_sup, jump_sup = structure_checks(sol, mesh)
    extra = seminorm_diagnostics(sol, mesh, body_force=exact.body_force)
    u_inf = max(float(np.abs(sol.u).max()), float(np.abs(sol.ubar).max()))
    return ErrorReport(
        err_u_l2=math.sqrt(eu2),
        err_u_energy=math.sqrt(eg2 + mismatch2),
        err_p_l2=math.sqrt(ep2),
        div_sup=div_sup,
        normal_jump_sup=jump_sup,
        velocity_jump=extra["velocity_jump"],
        velocity_grad_jump=extra["velocity_grad_jump"],
        trace_mismatch=math.sqrt(mismatch2),
        oscillation=extra["oscillation"] if extra["oscillation"] is not None else 0.0,
        u_inf=u_inf)
