import numpy as np
import pytest

from stokes_hybrid import elements
from stokes_hybrid.mesh import cracked_square_mesh, lshape_mesh, unit_square_mesh
from stokes_hybrid.spaces import MethodConfig, build_spaces, default_alpha, \
    eval_basis, facet_boundary_flux, interpolate_facet_dirichlet
from stokes_hybrid.cases import get_case


def square_entity_counts(n):
    """(cells, faces, vertices) of the structured unit square mesh."""
    return 2 * n * n, 3 * n * n + 2 * n, (n + 1) * (n + 1)


def expected_ndofs(method, k, nc, nf, nv):
    cell_v = 2 * nc * (k + 1) * (k + 2) // 2
    cell_p = nc * k * (k + 1) // 2
    if method == "hdg":
        facet_v = 2 * nf * (k + 1)
    else:
        facet_v = 2 * (nv + (nf if k == 2 else 0))
    if method == "edg":
        facet_p = nv + (nf if k == 2 else 0)
    else:
        facet_p = nf * (k + 1)
    return cell_v, facet_v, cell_p, facet_p


# -- configuration -----------------------------------------------------------


def test_default_alpha_scales_with_degree_squared():
    assert default_alpha(1) == 6.0
    assert default_alpha(2) == 24.0
    assert MethodConfig("hdg", 1).alpha == 6.0
    assert MethodConfig("edg-hdg", 2).alpha == 24.0


def test_method_config_validation():
    with pytest.raises(ValueError):
        MethodConfig("cg", 1)
    with pytest.raises(ValueError):
        MethodConfig("hdg", 3)
    with pytest.raises(ValueError):
        MethodConfig("hdg", 1, nu=0.0)
    with pytest.raises(ValueError):
        MethodConfig("hdg", 1, nu=-1.0)
    with pytest.raises(ValueError):
        MethodConfig("hdg", 1, alpha=0.0)
    cfg = MethodConfig("edg", 2, nu=1e-5, alpha=40.0)
    assert (cfg.method, cfg.degree, cfg.nu, cfg.alpha) == ("edg", 2, 1e-5, 40.0)


# -- dof counting ------------------------------------------------------------


@pytest.mark.parametrize("n", [1, 2, 4])
@pytest.mark.parametrize("method", ["hdg", "edg-hdg", "edg"])
@pytest.mark.parametrize("degree", [1, 2])
def test_dof_counts_closed_form(n, method, degree):
    mesh = unit_square_mesh(n)
    nc, nf, nv = square_entity_counts(n)
    assert (mesh.n_cells, mesh.n_faces, mesh.n_vertices) == (nc, nf, nv)
    sp = build_spaces(mesh, MethodConfig(method, degree))
    exp = expected_ndofs(method, degree, nc, nf, nv)
    got = (sp.cell_velocity.ndof, sp.facet_velocity.ndof,
           sp.cell_pressure.ndof, sp.facet_pressure.ndof)
    assert got == exp


def test_frozen_small_mesh_dof_numbers():
    sp = build_spaces(unit_square_mesh(1), MethodConfig("hdg", 1))
    assert sp.cell_velocity.ndof == 12
    assert sp.facet_velocity.n_free == 4

    sp = build_spaces(unit_square_mesh(1), MethodConfig("edg-hdg", 1))
    assert sp.facet_velocity.n_free == 0

    sp = build_spaces(unit_square_mesh(2), MethodConfig("hdg", 1))
    assert sp.facet_velocity.n_free == 32


@pytest.mark.parametrize("method", ["hdg", "edg-hdg", "edg"])
def test_constrained_dofs_are_exactly_the_boundary_dofs(method):
    mesh = unit_square_mesh(2)
    sp = build_spaces(mesh, MethodConfig(method, 2))
    fv = sp.facet_velocity
    expected = np.unique(fv.entity_dofs[mesh.boundary_faces].ravel())
    np.testing.assert_array_equal(fv.constrained, expected)
    # No facet pressure dof is ever constrained.
    assert len(sp.facet_pressure.constrained) == 0
    assert fv.n_free == fv.ndof - len(expected)


def test_entity_dofs_interleave_components():
    mesh = unit_square_mesh(1)
    sp = build_spaces(mesh, MethodConfig("hdg", 2))
    ent = sp.facet_velocity.entity_dofs
    # Per face: [n0x, n0y, n1x, n1y, midx, midy] with y = x + 1.
    assert ent.shape == (mesh.n_faces, 6)
    np.testing.assert_array_equal(ent[:, 1::2], ent[:, 0::2] + 1)


@pytest.mark.parametrize("method", ["edg-hdg", "edg"])
def test_crack_duplicate_vertices_get_independent_dofs(method):
    mesh = cracked_square_mesh(4)
    sp = build_spaces(mesh, MethodConfig(method, 1))
    # The slit vertex exists twice; continuous layouts key on vertex ids, so
    # the two copies must map to different globals.
    pair_faces = [fid for fid in mesh.crack_faces
                  if 17 in mesh.faces[fid].vertices or 25 in mesh.faces[fid].vertices]
    dofs = [set(map(int, sp.facet_velocity.entity_dofs[f])) for f in pair_faces]
    upper = [d for f, d in zip(pair_faces, dofs) if 17 in mesh.faces[f].vertices]
    lower = [d for f, d in zip(pair_faces, dofs) if 25 in mesh.faces[f].vertices]
    assert upper and lower
    for du in upper:
        for dl in lower:
            # They share at most the dofs of undoubled vertices (tip, mouth).
            assert not (du == dl)
    # Every slit dof is constrained (crack faces are boundary).
    constrained = set(map(int, sp.facet_velocity.constrained))
    for d in dofs:
        assert d <= constrained


# -- basis evaluation --------------------------------------------------------


@pytest.mark.parametrize("degree", [1, 2])
def test_cell_basis_partition_of_unity_and_gradients(degree):
    mesh = lshape_mesh(1)
    sp = build_spaces(mesh, MethodConfig("hdg", degree))
    rng = np.random.default_rng(11)
    bary = rng.dirichlet(np.ones(3), size=7)
    pts = bary[:, 1:]
    vals, grads = eval_basis(sp.cell_velocity, mesh, 2, pts)
    assert vals.shape == (elements.tri_dim(degree), 7)
    np.testing.assert_allclose(vals.sum(axis=0), 1.0, atol=1e-13)
    np.testing.assert_allclose(grads.sum(axis=0), 0.0, atol=1e-13)

    center = np.array([[1.0 / 3.0, 1.0 / 3.0]])
    v1, _ = eval_basis(build_spaces(mesh, MethodConfig("hdg", 1)).cell_velocity,
                       mesh, 0, center)
    np.testing.assert_allclose(v1[:, 0], [1.0 / 3.0] * 3, atol=1e-15)


@pytest.mark.parametrize("degree", [1, 2])
def test_cell_basis_gradients_match_finite_differences(degree):
    mesh = lshape_mesh(1)
    sp = build_spaces(mesh, MethodConfig("hdg", degree))
    cell = 3
    v0, J, _, _ = mesh.jacobians()
    h = 1e-6
    pts = np.array([[0.23, 0.31], [0.11, 0.52], [0.4, 0.1]])
    _, grads = eval_basis(sp.cell_velocity, mesh, cell, pts)
    # Physical-space finite differences: perturb x, pull back to reference.
    Jc = J[cell]
    Jinv = np.linalg.inv(Jc)
    for axis in range(2):
        step = np.zeros(2)
        step[axis] = h
        dref = step @ Jinv.T
        vp, _ = eval_basis(sp.cell_velocity, mesh, cell, pts + dref)
        vm, _ = eval_basis(sp.cell_velocity, mesh, cell, pts - dref)
        fd = (vp - vm) / (2 * h)
        assert np.abs(fd - grads[:, :, axis]).max() < 1e-7


@pytest.mark.parametrize("degree", [1, 2])
def test_facet_basis_nodes_and_partition_of_unity(degree):
    mesh = unit_square_mesh(1)
    sp = build_spaces(mesh, MethodConfig("hdg", degree))
    t = np.linspace(0.0, 1.0, 9)
    vals, grads = eval_basis(sp.facet_velocity, mesh, 0, t)
    assert grads is None
    assert vals.shape == (degree + 1, 9)
    np.testing.assert_allclose(vals.sum(axis=0), 1.0, atol=1e-14)
    nodes = elements.seg_nodes(degree)
    at_nodes, _ = eval_basis(sp.facet_velocity, mesh, 0, nodes)
    np.testing.assert_allclose(at_nodes, np.eye(degree + 1), atol=1e-14)


# -- boundary interpolation --------------------------------------------------


def test_interpolate_zero_velocity_gives_zero():
    case = get_case("square-mr")
    mesh = unit_square_mesh(2)

    class _Zero:
        @staticmethod
        def velocity(pts, side=None):
            return np.zeros_like(np.asarray(pts, dtype=float))

    sp = build_spaces(mesh, MethodConfig("hdg", 1))
    vals = interpolate_facet_dirichlet(_Zero, mesh, sp.facet_velocity)
    assert np.all(vals == 0.0)
    del case


@pytest.mark.parametrize("method", ["hdg", "edg-hdg"])
@pytest.mark.parametrize("degree", [1, 2])
def test_trace_reproduction_of_polynomials(method, degree):
    # Interpolating a vector polynomial of facet degree reproduces its trace
    # at every point of every boundary face, up to roundoff.
    mesh = lshape_mesh(2)
    sp = build_spaces(mesh, MethodConfig(method, degree))

    class _Poly:
        @staticmethod
        def velocity(pts, side=None):
            pts = np.asarray(pts, dtype=float)
            x, y = pts[..., 0], pts[..., 1]
            if degree == 1:
                return np.stack([1.0 + 2 * x - y, 0.5 * x + y], axis=-1)
            return np.stack([x * x - y + 0.25 * x * y, y * y + x], axis=-1)

    vals = interpolate_facet_dirichlet(_Poly, mesh, sp.facet_velocity,
                                       flux_correct=False)
    t = np.linspace(0.0, 1.0, 7)
    S = elements.seg_basis(degree, t)
    for fid in mesh.boundary_faces:
        f = mesh.faces[fid]
        a, b = mesh.vertices[f.vertices[0]], mesh.vertices[f.vertices[1]]
        pts = (1.0 - t)[:, None] * a + t[:, None] * b
        coeffs = vals[sp.facet_velocity.entity_dofs[fid]].reshape(degree + 1, 2)
        recon = np.einsum("jc,jq->qc", coeffs, S)
        np.testing.assert_allclose(recon, _Poly.velocity(pts), atol=1e-13)


def test_flux_correction_zeroes_boundary_flux():
    case = get_case("square-mr")
    mesh = unit_square_mesh(4)
    sp = build_spaces(mesh, MethodConfig("edg-hdg", 1))
    raw = interpolate_facet_dirichlet(case, mesh, sp.facet_velocity,
                                      flux_correct=False)
    fixed = interpolate_facet_dirichlet(case, mesh, sp.facet_velocity)
    flux_raw = facet_boundary_flux(mesh, sp.facet_velocity, raw)
    flux_fixed = facet_boundary_flux(mesh, sp.facet_velocity, fixed)
    assert abs(flux_raw) > 1e-6          # plain interpolation leaks mass
    assert abs(flux_fixed) < 1e-14
    # The correction is a small perturbation of the raw interpolant.
    assert np.abs(fixed - raw).max() < 10 * abs(flux_raw)


def test_identity_field_flux_is_twice_the_area():
    for mesh, area in ((unit_square_mesh(3), 1.0), (lshape_mesh(2), 3.0),
                       (cracked_square_mesh(4), 0.04)):
        sp = build_spaces(mesh, MethodConfig("hdg", 1))

        class _Id:
            @staticmethod
            def velocity(pts, side=None):
                return np.asarray(pts, dtype=float)

        vals = interpolate_facet_dirichlet(_Id, mesh, sp.facet_velocity,
                                           flux_correct=False)
        flux = facet_boundary_flux(mesh, sp.facet_velocity, vals)
        assert abs(flux - 2.0 * area) < 1e-13


def test_interpolate_rejects_wrong_layout():
    mesh = unit_square_mesh(1)
    sp = build_spaces(mesh, MethodConfig("hdg", 1))
    case = get_case("square-mr")
    with pytest.raises(ValueError):
        interpolate_facet_dirichlet(case, mesh, sp.cell_velocity)
