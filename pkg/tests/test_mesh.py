import itertools

import numpy as np
import pytest

from maxwell_ipdg.mesh import (Mesh, MeshError, build_structured_mesh, compute_patches,
                               export_mesh, import_mesh, shape_regularity)

REF_TET = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], float)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_structured_counts(n):
    m = build_structured_mesh(n)
    assert m.n_cells == 6 * n**3
    assert m.n_vertices == (n + 1) ** 3
    assert len(m.boundary_faces) == 12 * n**2
    assert m.n_faces == (4 * m.n_cells + 12 * n**2) // 2
    edges = {tuple(sorted(e)) for c in m.cells for e in itertools.combinations(c, 2)}
    # Euler characteristic of a ball
    assert m.n_vertices - len(edges) + m.n_faces - m.n_cells == 1


@pytest.mark.parametrize("n", [1, 2])
def test_geometry_sums(n):
    m = build_structured_mesh(n)
    assert np.isclose(m.cell_volumes.sum(), 1.0, rtol=1e-14)
    assert np.isclose(m.face_areas[m.boundary_faces].sum(), 6.0, rtol=1e-14)
    assert np.allclose(np.linalg.norm(m.face_normals, axis=1), 1.0)
    assert np.all(m.cell_volumes > 0)


def test_face_orientation():
    m = build_structured_mesh(2)
    fc = m.face_cells
    assert np.all(fc[:, 0] >= 0)
    inter = m.interior
    assert np.all(fc[inter, 0] < fc[inter, 1])
    d = m.centroids[fc[inter, 1]] - m.centroids[fc[inter, 0]]
    assert np.all(np.einsum("fi,fi->f", d, m.face_normals[inter]) > 0)
    bf = m.boundary_faces
    fcen = m.vertices[m.faces[bf]].mean(axis=1)
    out = np.einsum("fi,fi->f", fcen - m.centroids[fc[bf, 0]], m.face_normals[bf])
    assert np.all(out > 0)
    # boundary normals are axis-aligned on the cube
    assert np.allclose(np.abs(m.face_normals[bf]).max(axis=1), 1.0)


def test_cell_faces_consistent():
    m = build_structured_mesh(2)
    for K in range(m.n_cells):
        for i, f in enumerate(m.cell_faces[K]):
            assert set(m.faces[f]) == set(np.delete(m.cells[K], i))
            assert K in m.face_cells[f]


def test_single_tet_geometry():
    m = Mesh(REF_TET, np.array([[0, 1, 2, 3]]))
    assert m.n_faces == 4 and not m.interior.any()
    assert np.isclose(m.cell_volumes[0], 1 / 6)
    assert np.isclose(m.cell_diameters[0], np.sqrt(2))
    # inradius of the reference tet: 1 / (3 + sqrt(3))
    assert np.isclose(m.cell_inradii[0], 1 / (3 + np.sqrt(3)))


def test_shape_regularity_is_refinement_stable():
    vals = [shape_regularity(build_structured_mesh(n)) for n in (1, 2, 4)]
    assert np.allclose(vals, 8.36308110070411, rtol=1e-12)


def test_scaled_mesh():
    m = build_structured_mesh(2)
    s = m.scaled(2.0)
    assert np.allclose(s.cell_volumes, 8 * m.cell_volumes)
    assert np.allclose(s.face_areas, 4 * m.face_areas)
    assert np.allclose(s.face_diameters, 2 * m.face_diameters)
    assert np.array_equal(s.face_cells, m.face_cells)


@pytest.mark.parametrize("cells, msg", [
    ([[0, 1, 2]], "tetrahedra"),
    ([[0, 1, 2, 9]], "out of range"),
    ([[0, 1, 1, 3]], "degenerate"),
    ([[0, 1, 2, 3], [0, 1, 2, 3]], "duplicate"),
    ([[0, 2, 1, 3]], "inverted"),
])
def test_mesh_validation(cells, msg):
    with pytest.raises(MeshError, match=msg):
        Mesh(REF_TET, np.array(cells))


def test_non_manifold_face():
    v = np.vstack([REF_TET, [[0.3, 0.3, -1]], [[0.3, 0.3, 2]]])
    cells = np.array([[0, 1, 2, 3], [0, 2, 1, 4], [0, 1, 2, 5]])
    with pytest.raises(MeshError):
        Mesh(v, cells)


def test_flat_cell_rejected():
    v = REF_TET.copy()
    v[3] = [0.5, 0.5, 0.0]
    with pytest.raises(MeshError):
        Mesh(v, np.array([[0, 1, 2, 3]]))


@pytest.mark.parametrize("bad", [0, -1, 1.5])
def test_structured_rejects_bad_n(bad):
    with pytest.raises(MeshError):
        build_structured_mesh(bad)


def test_import_export_roundtrip(tmp_path):
    m = build_structured_mesh(2)
    p = tmp_path / "cube.tetmesh"
    export_mesh(m, p)
    m2 = import_mesh(p)
    assert np.array_equal(m2.vertices, m.vertices)
    assert np.array_equal(m2.cells, m.cells)
    assert np.array_equal(m2.face_cells, m.face_cells)


@pytest.mark.parametrize("text", [
    "garbage\n",
    "tetmesh 4 1\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n0 1 2\n",
    "tetmesh 4 2\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n0 1 2 3\n",
    "tetmesh 4 1\n0 0\n1 0 0\n0 1 0\n0 0 1\n0 1 2 3\n",
])
def test_import_errors(tmp_path, text):
    p = tmp_path / "bad.tetmesh"
    p.write_text(text)
    with pytest.raises(MeshError):
        import_mesh(p)


def test_patches_brute_force():
    m = build_structured_mesh(2)
    P = compute_patches(m)
    verts = [set(c) for c in m.cells]
    for K in range(0, m.n_cells, 7):
        shared = np.array([len(verts[K] & verts[J]) for J in range(m.n_cells)])
        assert set(P.cells("face", K)) == set(np.flatnonzero(shared >= 3))
        assert set(P.cells("edge", K)) == set(np.flatnonzero(shared >= 2))
        assert set(P.cells("vertex", K)) == set(np.flatnonzero(shared >= 1))
        v2 = set().union(*(set(P.cells("vertex", J)) for J in P.cells("vertex", K)))
        assert set(P.cells("vertex2", K)) == v2


def test_patches_nested_and_reduce(rng):
    m = build_structured_mesh(3)
    P = compute_patches(m)
    kinds = ["face", "edge", "vertex", "vertex2", "vertex3"]
    vals = rng.random(m.n_cells)
    prev_min, prev_max = None, None
    for kind in kinds:
        lo, hi = P.reduce(kind, vals, "min"), P.reduce(kind, vals, "max")
        for K in (0, 17, m.n_cells - 1):
            assert lo[K] == vals[P.cells(kind, K)].min()
        if prev_min is not None:
            # larger patches can only lower the min and raise the max
            assert np.all(lo <= prev_min) and np.all(hi >= prev_max)
        prev_min, prev_max = lo, hi
    for K in range(m.n_cells):
        assert set(P.cells("face", K)) <= set(P.cells("edge", K)) <= set(P.cells("vertex", K))


def test_single_cube_vertex_patch_is_everything():
    m = build_structured_mesh(1)
    P = compute_patches(m)
    for K in range(6):
        assert len(P.cells("vertex", K)) == 6
