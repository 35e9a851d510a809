"""Degree-of-freedom layouts for the hybridized velocity/pressure spaces.

For polynomial degree k the discretization uses

* cell velocity: discontinuous vector P_k per cell (Lagrange nodes, the two
  components of a node interleaved as 2*node, 2*node+1);
* facet velocity: vector P_k per face record ("hdg": independent per record;
  "edg-hdg"/"edg": continuous over the mesh skeleton, built on vertex ids so
  crack-duplicated vertices automatically carry independent unknowns);
* cell pressure: discontinuous P_{k-1} per cell;
* facet pressure: P_k per face record ("hdg"/"edg-hdg") or continuous over
  the skeleton ("edg"). No boundary condition is ever applied to it.

Facet dof ordering per face follows the face parametrization: the node at
t=0 (lower vertex id), the node at t=1, then the midpoint for k=2.
Boundary conditions constrain every facet velocity dof living on a boundary
face; crack faces are boundary faces, so the two sides of a slit are
constrained independently.
"""

from dataclasses import dataclass, field

import numpy as np

from . import elements
from .quadrature import segment_rule

VALID_METHODS = ("hdg", "edg-hdg", "edg")


def default_alpha(degree):
    """Default interior-penalty parameter, 6 k^2."""
    return 6.0 * degree * degree


@dataclass(frozen=True)
class MethodConfig:
    method: str
    degree: int
    nu: float = 1.0
    alpha: float = None

    def __post_init__(self):
        if self.method not in VALID_METHODS:
            raise ValueError("unknown method %r (expected one of %s)" % (self.method, ", ".join(VALID_METHODS)))
        if self.degree not in (1, 2):
            raise ValueError("degree must be 1 or 2")
        if not self.nu > 0.0:
            raise ValueError("nu must be positive")
        if self.alpha is None:
            object.__setattr__(self, "alpha", default_alpha(self.degree))
        if not self.alpha > 0.0:
            raise ValueError("alpha must be positive")


@dataclass
class DofLayout:
    kind: str                 # cell_velocity | facet_velocity | cell_pressure | facet_pressure
    degree: int
    ncomp: int
    ndof: int
    entity_dofs: np.ndarray   # (n_entities, dofs_per_entity)
    constrained: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    @property
    def n_free(self):
        return self.ndof - len(self.constrained)


@dataclass
class SpaceSet:
    cfg: MethodConfig
    cell_velocity: DofLayout
    facet_velocity: DofLayout
    cell_pressure: DofLayout
    facet_pressure: DofLayout


def _facet_scalar_layout(mesh, degree, continuous):
    """Scalar facet layout rows [node(t=0), node(t=1), midpoint?] per face."""
    nf = mesh.n_faces
    if not continuous:
        per = degree + 1
        ent = np.arange(nf * per, dtype=np.int64).reshape(nf, per)
        return ent, nf * per
    nv = mesh.n_vertices
    ent = np.empty((nf, degree + 1), dtype=np.int64)
    for fid, f in enumerate(mesh.faces):
        ent[fid, 0] = f.vertices[0]
        ent[fid, 1] = f.vertices[1]
        if degree == 2:
            ent[fid, 2] = nv + fid
    ndof = nv + (nf if degree == 2 else 0)
    return ent, ndof


def _vectorize(ent_scalar, interleave=2):
    """Scalar dof rows -> interleaved vector dof rows (x then y per node)."""
    n, per = ent_scalar.shape
    out = np.empty((n, per * interleave), dtype=np.int64)
    for c in range(interleave):
        out[:, c::interleave] = interleave * ent_scalar + c
    return out


def build_spaces(mesh, cfg):
    """Construct the four dof layouts for (mesh, cfg)."""
    k = cfg.degree
    nb = elements.tri_dim(k)
    nc = mesh.n_cells

    cell_v = DofLayout(
        kind="cell_velocity", degree=k, ncomp=2, ndof=2 * nb * nc,
        entity_dofs=np.arange(2 * nb * nc, dtype=np.int64).reshape(nc, 2 * nb))

    npress = elements.tri_dim(k - 1)
    cell_p = DofLayout(
        kind="cell_pressure", degree=k - 1, ncomp=1, ndof=npress * nc,
        entity_dofs=np.arange(npress * nc, dtype=np.int64).reshape(nc, npress))

    fv_scalar, fv_nscalar = _facet_scalar_layout(mesh, k, continuous=cfg.method in ("edg-hdg", "edg"))
    fv_ent = _vectorize(fv_scalar)
    constrained = np.unique(fv_ent[mesh.boundary_faces].ravel()) if len(mesh.boundary_faces) else np.empty(0, dtype=np.int64)
    facet_v = DofLayout(
        kind="facet_velocity", degree=k, ncomp=2, ndof=2 * fv_nscalar,
        entity_dofs=fv_ent, constrained=constrained)

    fp_ent, fp_ndof = _facet_scalar_layout(mesh, k, continuous=cfg.method == "edg")
    facet_p = DofLayout(
        kind="facet_pressure", degree=k, ncomp=1, ndof=fp_ndof,
        entity_dofs=fp_ent)

    return SpaceSet(cfg=cfg, cell_velocity=cell_v, facet_velocity=facet_v,
                    cell_pressure=cell_p, facet_pressure=facet_p)


def eval_basis(layout, mesh, entity, points):
    """Evaluate the scalar shape functions of a layout on one entity.

    For cell layouts ``points`` are reference coordinates (n, 2); returns
    (values (n_basis, n), physical gradients (n_basis, n, 2)). For facet
    layouts ``points`` are parameters t in [0, 1] along the face; returns
    (values (degree + 1, n), None). Vector layouts interleave the two
    components of each scalar node.
    """
    if layout.kind in ("cell_velocity", "cell_pressure"):
        vals = elements.tri_basis(layout.degree, points)
        gref = elements.tri_basis_grad(layout.degree, points)
        _, _, _, Jinv = mesh.jacobians()
        grads = np.einsum("nqr,rc->nqc", gref, Jinv[entity])
        return vals, grads
    vals = elements.seg_basis(layout.degree, points)
    return vals, None


def _face_node_points(mesh, fid, degree):
    f = mesh.faces[fid]
    a = mesh.vertices[f.vertices[0]]
    b = mesh.vertices[f.vertices[1]]
    t = elements.seg_nodes(degree)
    return (1.0 - t)[:, None] * a + t[:, None] * b


def facet_boundary_flux(mesh, layout, values):
    """Total outward flux of a facet velocity field over all boundary faces.

    Exact for the piecewise-P_k field described by ``values``; crack faces
    contribute from both sides with opposite normals.
    """
    k = layout.degree
    t, w = segment_rule(k + 2)
    S = elements.seg_basis(k, t)
    flux = 0.0
    for fid in mesh.boundary_faces:
        f = mesh.faces[fid]
        coeffs = values[layout.entity_dofs[fid]].reshape(k + 1, 2)
        vals = np.einsum("jc,jq->qc", coeffs, S)
        flux += f.length * float(w @ (vals @ f.normal))
    return flux


def _interpolate_boundary(func, mesh, layout, needs_side):
    vals = np.zeros(layout.ndof)
    k = layout.degree
    for fid in mesh.boundary_faces:
        f = mesh.faces[fid]
        pts = _face_node_points(mesh, fid, k)
        if needs_side:
            hint = np.broadcast_to(mesh.centroids[f.cells[0]], pts.shape)
            uv = func(pts, side=hint)
        else:
            uv = func(pts)
        vals[layout.entity_dofs[fid]] = np.asarray(uv).ravel()
    return vals


def interpolate_facet_dirichlet(exact, mesh, layout, flux_correct=True):
    """Boundary values for the facet velocity: nodal interpolation of the
    exact velocity, with side hints from the parent cell centroid on crack
    faces, plus a flux correction.

    Nodal interpolation of a generic field has a total boundary flux of
    O(h^{k+1}) instead of zero; the facet-pressure equations would push that
    defect into the divergence of the computed velocity. The correction
    subtracts the measured flux times a fixed unit-flux facet field (the
    interpolant of the identity map, whose flux is exactly twice the domain
    area), an O(h^{k+1}) perturbation that restores an exactly compatible
    datum.

    Returns an array over all facet velocity dofs, zero off the boundary.
    """
    if layout.kind != "facet_velocity":
        raise ValueError("expected the facet velocity layout")
    vals = _interpolate_boundary(exact.velocity, mesh, layout, needs_side=True)
    if flux_correct:
        delta = facet_boundary_flux(mesh, layout, vals)
        corr = _interpolate_boundary(lambda p: np.asarray(p, dtype=float), mesh, layout, needs_side=False)
        beta = facet_boundary_flux(mesh, layout, corr)
        vals -= (delta / beta) * corr
    return vals
