"""Triangular meshes with crack support.

A mesh is a set of vertices, counterclockwise triangles, and *face records*.
Faces are equivalence classes of cell edges: an ordinary edge shared by two
cells yields one interior face record, an outer edge yields one boundary face
record, and an edge lying on a declared crack segment yields TWO boundary
face records (one per side), even when the two sides happen to share vertex
ids (which occurs when no vertex strictly inside the crack has been
duplicated yet). Crack-duplicated vertices carry distinct ids at identical
coordinates, so degree-of-freedom layouts built on vertex ids double the
unknowns along the crack automatically.

Face orientation conventions:

* ``Face.vertices`` is stored with ascending vertex ids and the face is
  parametrized from the first to the second vertex;
* for an interior face the unit normal points from the first parent cell
  (lower id) into the second;
* for a boundary face the normal is outward from its single parent.
"""

from dataclasses import dataclass, field

import numpy as np

from .elements import TRI_EDGE_VERTS

INTERIOR = "interior"
BOUNDARY = "boundary"

_COLLINEAR_TOL = 1e-12


@dataclass(frozen=True)
class CrackSegment:
    """Open slit from point ``a`` to point ``b`` along which faces split."""

    a: tuple
    b: tuple

    def contains_edge(self, pa, pb):
        """True when the edge (pa, pb) lies on the slit.

        Both endpoints must lie on the closed segment and the edge midpoint
        strictly inside it, so edges touching only the tip or the mouth do
        not count.
        """
        a = np.asarray(self.a, dtype=float)
        d = np.asarray(self.b, dtype=float) - a
        ll = float(d @ d)
        for p in (pa, pb):
            r = np.asarray(p, dtype=float) - a
            if abs(r[0] * d[1] - r[1] * d[0]) > _COLLINEAR_TOL * np.sqrt(ll):
                return False
            s = float(r @ d) / ll
            if s < -_COLLINEAR_TOL or s > 1.0 + _COLLINEAR_TOL:
                return False
        mid = 0.5 * (np.asarray(pa, dtype=float) + np.asarray(pb, dtype=float)) - a
        smid = float(mid @ d) / ll
        return 0.0 < smid < 1.0


@dataclass
class Face:
    """One face record; see the module docstring for the quotient semantics."""

    vertices: tuple          # (va, vb), ascending ids
    cells: tuple             # parent cell ids, ascending, length 1 or 2
    local: tuple             # matching local edge index within each parent
    kind: str                # INTERIOR or BOUNDARY
    on_crack: bool = False
    length: float = 0.0
    normal: np.ndarray = field(default=None, repr=False)


class Mesh:
    def __init__(self, vertices, cells, crack=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.cells = np.ascontiguousarray(cells, dtype=np.int64)
        self.crack = crack
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise ValueError("vertices must be (nv, 2)")
        if self.cells.ndim != 2 or self.cells.shape[1] != 3:
            raise ValueError("cells must be (nc, 3)")
        self._validate()
        self._build_geometry()
        self._build_faces()

    # -- construction ------------------------------------------------------

    def _validate(self):
        nv = len(self.vertices)
        if self.cells.min(initial=0) < 0 or self.cells.max(initial=-1) >= nv:
            raise ValueError("cell vertex index out of range")
        p = self.vertices
        a, b, c = (p[self.cells[:, i]] for i in range(3))
        cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
        if np.any(cross <= 0.0):
            raise ValueError("cells must be counterclockwise with positive area")
        self._signed_areas2 = cross
        used = np.zeros(nv, dtype=bool)
        used[self.cells.ravel()] = True
        if not used.all():
            raise ValueError("unused vertices present")

    def _build_geometry(self):
        p = self.vertices
        self.areas = 0.5 * self._signed_areas2
        edges = np.stack(
            [p[self.cells[:, b]] - p[self.cells[:, a]] for a, b in TRI_EDGE_VERTS]
        )
        self.edge_lengths = np.linalg.norm(edges, axis=2).T  # (nc, 3)
        self.diameters = self.edge_lengths.max(axis=1)
        self.centroids = p[self.cells].mean(axis=1)

    def _build_faces(self):
        nc = len(self.cells)
        incidence = {}
        for c in range(nc):
            verts = self.cells[c]
            for l, (a, b) in enumerate(TRI_EDGE_VERTS):
                va, vb = int(verts[a]), int(verts[b])
                key = (va, vb) if va < vb else (vb, va)
                incidence.setdefault(key, []).append((c, l))

        faces = []
        for key in sorted(incidence):
            parents = sorted(incidence[key])
            if len(parents) > 2:
                raise ValueError("edge %r has more than two parent cells" % (key,))
            pa, pb = self.vertices[key[0]], self.vertices[key[1]]
            cracked = self.crack is not None and self.crack.contains_edge(pa, pb)
            if len(parents) == 2 and not cracked:
                faces.append(Face(vertices=key,
                                  cells=(parents[0][0], parents[1][0]),
                                  local=(parents[0][1], parents[1][1]),
                                  kind=INTERIOR))
            else:
                # Boundary records, one per parent; a cracked edge with two
                # parents splits here.
                for c, l in parents:
                    faces.append(Face(vertices=key, cells=(c,), local=(l,),
                                      kind=BOUNDARY, on_crack=cracked))
        self.faces = faces

        self.cell_faces = np.full((nc, 3), -1, dtype=np.int64)
        self.cell_face_sign = np.zeros((nc, 3), dtype=np.int64)
        for fid, f in enumerate(faces):
            va, vb = f.vertices
            t = self.vertices[vb] - self.vertices[va]
            f.length = float(np.hypot(t[0], t[1]))
            first = f.cells[0]
            lverts = self.cells[first]
            a_loc, b_loc = TRI_EDGE_VERTS[f.local[0]]
            # Outward normal of the first parent: right-hand normal of the
            # cell's own (counterclockwise) traversal of the edge.
            d = self.vertices[lverts[b_loc]] - self.vertices[lverts[a_loc]]
            n = np.array([d[1], -d[0]]) / np.hypot(d[0], d[1])
            f.normal = n
            for rank, (c, l) in enumerate(zip(f.cells, f.local)):
                self.cell_faces[c, l] = fid
                self.cell_face_sign[c, l] = 1 if rank == 0 else -1
        if np.any(self.cell_faces < 0):
            raise AssertionError("face table incomplete")

        # Does the cell's local traversal of edge l start at the lower
        # vertex id (i.e. agree with the face parametrization)?
        self.cell_face_dir = np.zeros((nc, 3), dtype=bool)
        for c in range(nc):
            verts = self.cells[c]
            for l, (a, b) in enumerate(TRI_EDGE_VERTS):
                self.cell_face_dir[c, l] = verts[a] < verts[b]

        self.interior_faces = np.array(
            [i for i, f in enumerate(faces) if f.kind == INTERIOR], dtype=np.int64)
        self.boundary_faces = np.array(
            [i for i, f in enumerate(faces) if f.kind == BOUNDARY], dtype=np.int64)
        self.crack_faces = np.array(
            [i for i, f in enumerate(faces) if f.on_crack], dtype=np.int64)

    # -- queries -----------------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_faces(self):
        return len(self.faces)

    def cell_diameter(self, c):
        return float(self.diameters[c])

    def cell_area(self, c):
        return float(self.areas[c])

    def face_normal(self, fid):
        return self.faces[fid].normal

    def outward_normal(self, c, local_edge):
        """Unit normal of the given cell edge, pointing out of the cell."""
        fid = self.cell_faces[c, local_edge]
        return self.cell_face_sign[c, local_edge] * self.faces[fid].normal

    def h_max(self):
        return float(self.diameters.max())

    def total_area(self):
        return float(self.areas.sum())

    def euler_characteristic(self):
        """V - E + C counted on geometric entities.

        Crack-duplicated vertices and split face records are merged by
        coordinates, so the value equals that of the uncracked mesh (1 for
        all the simply connected domains generated here).
        """
        key = {}
        geom_id = np.empty(self.n_vertices, dtype=np.int64)
        for v, p in enumerate(np.round(self.vertices, 12)):
            geom_id[v] = key.setdefault((p[0], p[1]), len(key))
        nv = len(key)
        edges = set()
        for f in self.faces:
            a, b = geom_id[f.vertices[0]], geom_id[f.vertices[1]]
            edges.add((min(a, b), max(a, b)))
        return nv - len(edges) + self.n_cells

    def jacobians(self):
        """Affine maps per cell: (origin, J, detJ, Jinv) as stacked arrays."""
        p = self.vertices
        v0 = p[self.cells[:, 0]]
        J = np.stack([p[self.cells[:, 1]] - v0, p[self.cells[:, 2]] - v0], axis=2)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        Jinv = np.empty_like(J)
        Jinv[:, 0, 0] = J[:, 1, 1] / det
        Jinv[:, 0, 1] = -J[:, 0, 1] / det
        Jinv[:, 1, 0] = -J[:, 1, 0] / det
        Jinv[:, 1, 1] = J[:, 0, 0] / det
        return v0, J, det, Jinv


# -- generators -------------------------------------------------------------


def _grid_triangles_xy(i, j, vid):
    """Two CCW triangles for grid square (i, j), diagonal with positive slope."""
    v00 = vid(i, j)
    v10 = vid(i + 1, j)
    v01 = vid(i, j + 1)
    v11 = vid(i + 1, j + 1)
    return [(v00, v10, v11), (v00, v11, v01)]


def unit_square_mesh(n):
    """Structured mesh of (0,1)^2 with 2*n^2 triangles."""
    if n < 1:
        raise ValueError("n must be positive")
    xs = np.array([i / n for i in range(n + 1)])
    xx, yy = np.meshgrid(xs, xs, indexing="ij")
    verts = np.stack([xx.ravel(), yy.ravel()], axis=1)

    def vid(i, j):
        return i * (n + 1) + j

    cells = []
    for i in range(n):
        for j in range(n):
            cells.extend(_grid_triangles_xy(i, j, vid))
    return Mesh(verts, np.array(cells))


def lshape_mesh(n):
    """Mesh of (-1,1)^2 minus the closed quadrant [0,1] x [-1,0]; 6*n^2 cells."""
    if n < 1:
        raise ValueError("n must be positive")
    m = 2 * n
    coord = np.array([(i - n) / n for i in range(m + 1)])

    def vid(i, j):
        return i * (m + 1) + j

    cells = []
    for i in range(m):
        for j in range(m):
            # skip squares with centroid in the removed fourth quadrant
            if i >= n and j <= n - 1:
                continue
            cells.extend(_grid_triangles_xy(i, j, vid))
    cells = np.array(cells)
    xx, yy = np.meshgrid(coord, coord, indexing="ij")
    verts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    used = np.unique(cells)
    remap = np.full(len(verts), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return Mesh(verts[used], remap[cells])


def cracked_square_mesh(n):
    """Mesh of (-1/10, 1/10)^2 slit along [0, 1/10) x {0}; n must be even.

    Vertices strictly inside the slit are duplicated; cells below the slit
    reference the duplicate. The tip (origin) is not duplicated. Face records
    along the slit are split into per-side boundary faces.
    """
    if n < 2 or n % 2:
        raise ValueError("n must be even and >= 2")
    coord = np.array([(2 * i - n) / (10 * n) for i in range(n + 1)])
    xmax = coord[-1]

    def vid(i, j):
        return i * (n + 1) + j

    cells = []
    for i in range(n):
        for j in range(n):
            cells.extend(_grid_triangles_xy(i, j, vid))
    cells = np.array(cells)
    xx, yy = np.meshgrid(coord, coord, indexing="ij")
    verts = np.stack([xx.ravel(), yy.ravel()], axis=1)

    slit = np.nonzero((verts[:, 1] == 0.0) & (verts[:, 0] > 0.0) & (verts[:, 0] < xmax))[0]
    dup = {}
    extra = []
    for v in slit:
        dup[v] = len(verts) + len(extra)
        extra.append(verts[v])
    if extra:
        verts = np.vstack([verts, np.array(extra)])
    centroids = verts[cells].mean(axis=1)
    below = centroids[:, 1] < 0.0
    for c in np.nonzero(below)[0]:
        for k in range(3):
            cells[c, k] = dup.get(cells[c, k], cells[c, k])

    crack = CrackSegment((0.0, 0.0), (float(xmax), 0.0))
    return Mesh(verts, cells, crack=crack)


def refine_uniform(mesh):
    """Split every cell into four congruent children via edge midpoints.

    Midpoints are created per face record, so the two records of a cracked
    face get distinct (coordinate-identical) midpoint vertices and the crack
    stays open in the refined mesh.
    """
    nv = mesh.n_vertices
    mids = np.empty((mesh.n_faces, 2))
    for fid, f in enumerate(mesh.faces):
        mids[fid] = 0.5 * (mesh.vertices[f.vertices[0]] + mesh.vertices[f.vertices[1]])
    verts = np.vstack([mesh.vertices, mids])

    v0, v1, v2 = mesh.cells[:, 0], mesh.cells[:, 1], mesh.cells[:, 2]
    m0 = nv + mesh.cell_faces[:, 0]
    m1 = nv + mesh.cell_faces[:, 1]
    m2 = nv + mesh.cell_faces[:, 2]
    children = np.empty((4 * mesh.n_cells, 3), dtype=np.int64)
    children[0::4] = np.stack([v0, m2, m1], axis=1)
    children[1::4] = np.stack([v1, m0, m2], axis=1)
    children[2::4] = np.stack([v2, m1, m0], axis=1)
    children[3::4] = np.stack([m0, m1, m2], axis=1)
    return Mesh(verts, children, crack=mesh.crack)


def dump_mesh(mesh, stream):
    """Write the plain-text mesh format, one record per line:
    ``vertices x y``, ``cells i j k``, ``faces v0 v1 class``."""
    for x, y in mesh.vertices:
        stream.write("vertices %r %r\n" % (float(x), float(y)))
    for i, j, k in mesh.cells:
        stream.write("cells %d %d %d\n" % (i, j, k))
    for f in mesh.faces:
        stream.write("faces %d %d %s\n" % (f.vertices[0], f.vertices[1], f.kind))
