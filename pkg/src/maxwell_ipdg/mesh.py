"""Affine tetrahedral meshes: structured Kuhn boxes, ASCII import/export,
oriented face topology and cell patches."""
from __future__ import annotations

import itertools
import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

# local face i of a cell is opposite to local vertex i
LOCAL_FACES = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])
_EDGES = list(itertools.combinations(range(4), 2))


class MeshError(ValueError):
    pass


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


def _signed_volumes(vertices, cells):
    p = vertices[cells]
    d = p[:, 1:, :] - p[:, :1, :]
    return np.linalg.det(d) / 6.0


class Mesh:
    """Immutable affine tetrahedral mesh with face topology.

    Attributes
    ----------
    vertices : (nv, 3) float
    cells : (nc, 4) int, positively oriented
    faces : (nf, 3) int, sorted vertex triples
    face_cells : (nf, 2) int
        left and right cell; right is -1 on boundary faces.  The left cell is
        the one with the smaller index.
    face_normals : (nf, 3)
        unit normal pointing from the left to the right cell (outward on the
        boundary).
    cell_faces : (nc, 4) int
        global face index of local face i (opposite local vertex i).
    """

    def __init__(self, vertices, cells):
        vertices = np.asarray(vertices, dtype=float)
        cells = np.asarray(cells, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshError("vertices must have shape (nv, 3)")
        if cells.ndim != 2 or cells.shape[1] != 4:
            raise MeshError("cells must be tetrahedra (4 vertex indices each)")
        if cells.size and (cells.min() < 0 or cells.max() >= len(vertices)):
            raise MeshError("cell references a vertex out of range")
        if np.any(np.sort(cells, axis=1)[:, 1:] == np.sort(cells, axis=1)[:, :-1]):
            raise MeshError("degenerate cell (repeated vertex)")
        keys = np.sort(cells, axis=1)
        _, counts = np.unique(keys, axis=0, return_counts=True)
        if np.any(counts > 1):
            raise MeshError("duplicate cell")
        vol = _signed_volumes(vertices, cells)
        if np.any(vol <= 0.0):
            bad = int(np.flatnonzero(vol <= 0.0)[0])
            raise MeshError(f"inverted cell {bad} (volume {vol[bad]:.3e})")

        self.vertices = _readonly(vertices)
        self.cells = _readonly(cells)
        self.cell_volumes = _readonly(vol)
        self._build_faces()
        self._build_geometry()

    # -- topology -------------------------------------------------------
    def _build_faces(self):
        nc = len(self.cells)
        local = self.cells[:, LOCAL_FACES]  # (nc, 4, 3)
        keys = np.sort(local.reshape(-1, 3), axis=1)
        faces, inverse, counts = np.unique(keys, axis=0, return_inverse=True,
                                           return_counts=True)
        inverse = inverse.ravel()
        if np.any(counts > 2):
            raise MeshError("non-manifold face shared by more than two cells")
        nf = len(faces)
        owner = np.repeat(np.arange(nc), 4)
        lface = np.tile(np.arange(4), nc)
        order = np.lexsort((owner, inverse))
        face_cells = -np.ones((nf, 2), dtype=np.int64)
        face_local = -np.ones((nf, 2), dtype=np.int64)
        first = np.ones(len(order), dtype=bool)
        inv_sorted = inverse[order]
        first[1:] = inv_sorted[1:] != inv_sorted[:-1]
        face_cells[inv_sorted[first], 0] = owner[order][first]
        face_local[inv_sorted[first], 0] = lface[order][first]
        face_cells[inv_sorted[~first], 1] = owner[order][~first]
        face_local[inv_sorted[~first], 1] = lface[order][~first]

        self.faces = _readonly(faces)
        self.face_cells = _readonly(face_cells)
        self.face_local = _readonly(face_local)
        self.cell_faces = _readonly(inverse.reshape(nc, 4))
        self.interior = _readonly(face_cells[:, 1] >= 0)

    def _build_geometry(self):
        X = self.vertices
        P = X[self.faces]
        cr = np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
        area2 = np.linalg.norm(cr, axis=1)
        normals = cr / area2[:, None]
        left = self.face_cells[:, 0]
        opp = X[self.cells[left, self.face_local[:, 0]]]
        flip = np.einsum("ij,ij->i", normals, opp - P[:, 0]) > 0.0
        normals[flip] *= -1.0
        self.face_normals = _readonly(normals)
        self.face_areas = _readonly(0.5 * area2)
        fe = np.stack([np.linalg.norm(P[:, a] - P[:, b], axis=1)
                       for a, b in ((0, 1), (1, 2), (0, 2))], axis=1)
        self.face_diameters = _readonly(fe.max(axis=1))

        C = X[self.cells]
        edges = np.stack([np.linalg.norm(C[:, a] - C[:, b], axis=1) for a, b in _EDGES],
                         axis=1)
        self.cell_diameters = _readonly(edges.max(axis=1))
        total_area = self.face_areas[self.cell_faces].sum(axis=1)
        self.cell_inradii = _readonly(3.0 * self.cell_volumes / total_area)
        # outward normal of local face i of each cell
        sign = np.where(self.face_cells[self.cell_faces, 0] == np.arange(len(C))[:, None],
                        1.0, -1.0)
        self.cell_normals = _readonly(self.face_normals[self.cell_faces] * sign[..., None])
        self.jacobians = _readonly(np.transpose(C[:, 1:] - C[:, :1], (0, 2, 1)))
        self.centroids = _readonly(C.mean(axis=1))

    # -- convenience ----------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def interior_faces(self) -> np.ndarray:
        return np.flatnonzero(self.interior)

    @property
    def boundary_faces(self) -> np.ndarray:
        return np.flatnonzero(~self.interior)

    def scaled(self, factor: float) -> "Mesh":
        return Mesh(self.vertices * factor, self.cells)

    def __repr__(self):
        return (f"Mesh(nv={self.n_vertices}, nc={self.n_cells}, "
                f"nf_int={self.interior.sum()}, nf_bnd={(~self.interior).sum()})")


def build_structured_mesh(n: int, extent: float = 1.0) -> Mesh:
    """Kuhn subdivision of [0, extent]^3 into n^3 cubes of 6 tetrahedra each.

    All tetrahedra of one cube share its main diagonal (0,0,0)-(1,1,1).
    """
    if int(n) != n or n < 1:
        raise MeshError(f"n must be a positive integer, got {n!r}")
    if not extent > 0:
        raise MeshError(f"extent must be positive, got {extent!r}")
    n = int(n)
    g = np.linspace(0.0, extent, n + 1)
    X, Y, Z = np.meshgrid(g, g, g, indexing="ij")
    vertices = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    def vid(i, j, k):
        return (i * (n + 1) + j) * (n + 1) + k

    paths = []
    for perm in itertools.permutations(range(3)):
        step = np.zeros(3, dtype=int)
        path = [step.copy()]
        for ax in perm:
            step[ax] += 1
            path.append(step.copy())
        paths.append(np.array(path))

    cells = []
    for i in range(n):
        for j in range(n):
            for k in range(n):
                base = np.array([i, j, k])
                for path in paths:
                    cells.append([vid(*(base + p)) for p in path])
    cells = np.array(cells, dtype=np.int64)
    vol = _signed_volumes(vertices, cells)
    neg = vol < 0
    cells[neg, 2], cells[neg, 3] = cells[neg, 3].copy(), cells[neg, 2].copy()
    return Mesh(vertices, cells)


def import_mesh(path: str | os.PathLike) -> Mesh:
    """Read the ASCII format ``tetmesh <nv> <nc>`` / nv vertex lines /
    nc cell lines (0-based vertex indices)."""
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or lines[0][0] != "tetmesh" or len(lines[0]) != 3:
        raise MeshError("parse failure: missing 'tetmesh <nv> <nc>' header")
    try:
        nv, nc = int(lines[0][1]), int(lines[0][2])
    except ValueError as exc:
        raise MeshError(f"parse failure: bad header {lines[0]}") from exc
    if len(lines) != 1 + nv + nc:
        raise MeshError(f"parse failure: expected {nv + nc} data lines, found {len(lines) - 1}")
    try:
        verts = np.array([[float(t) for t in ln] for ln in lines[1:1 + nv]])
    except ValueError as exc:
        raise MeshError("parse failure: bad vertex line") from exc
    if nv and verts.shape != (nv, 3):
        raise MeshError("parse failure: vertex lines need 3 coordinates")
    rows = lines[1 + nv:]
    for r in rows:
        if len(r) != 4:
            raise MeshError(f"non-tetrahedral element with {len(r)} vertices")
    try:
        cells = np.array([[int(t) for t in r] for r in rows], dtype=np.int64).reshape(-1, 4)
    except ValueError as exc:
        raise MeshError("parse failure: bad cell line") from exc
    return Mesh(verts.reshape(-1, 3), cells)


def export_mesh(mesh: Mesh, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        fh.write(f"tetmesh {mesh.n_vertices} {mesh.n_cells}\n")
        for x in mesh.vertices:
            fh.write(" ".join(repr(float(c)) for c in x) + "\n")
        for c in mesh.cells:
            fh.write(" ".join(str(int(v)) for v in c) + "\n")


@dataclass(frozen=True)
class PatchTable:
    """Cell patches stored as boolean CSR matrices (row K lists the patch of K).

    face: cells sharing a face with K; edge: sharing an edge; vertex: sharing a
    vertex; vertex2 / vertex3: vertex-patch closure applied twice / three times.
    """

    face: sp.csr_matrix
    edge: sp.csr_matrix
    vertex: sp.csr_matrix
    vertex2: sp.csr_matrix
    vertex3: sp.csr_matrix
    face_patch: np.ndarray  # (nf, 2), -1 padded

    def cells(self, kind: str, K: int) -> np.ndarray:
        m = getattr(self, kind)
        return m.indices[m.indptr[K]:m.indptr[K + 1]]

    def reduce(self, kind: str, values: np.ndarray, op: str) -> np.ndarray:
        """Per-cell min or max of ``values`` over the patch ``kind``."""
        m = getattr(self, kind)
        v = np.asarray(values)[m.indices]
        fn = np.minimum if op == "min" else np.maximum
        return fn.reduceat(v, m.indptr[:-1])


def _bool_csr(m):
    m = sp.csr_matrix(m, dtype=bool)
    m.sort_indices()
    m.eliminate_zeros()
    return m


def compute_patches(mesh: Mesh) -> PatchTable:
    nc, nv = mesh.n_cells, mesh.n_vertices
    inc = sp.csr_matrix((np.ones(4 * nc), (np.repeat(np.arange(nc), 4), mesh.cells.ravel())),
                        shape=(nc, nv))
    shared = (inc @ inc.T).tocsr()
    shared.sort_indices()

    def at_least(m, q):
        m = m.copy()
        m.data = (m.data >= q).astype(float)
        m.eliminate_zeros()
        return m

    vertex = at_least(shared, 1)
    vertex2 = at_least(vertex @ vertex, 1)
    vertex3 = at_least(vertex2 @ vertex, 1)
    return PatchTable(
        face=_bool_csr(at_least(shared, 3)),
        edge=_bool_csr(at_least(shared, 2)),
        vertex=_bool_csr(vertex),
        vertex2=_bool_csr(vertex2),
        vertex3=_bool_csr(vertex3),
        face_patch=mesh.face_cells.copy(),
    )


def shape_regularity(mesh: Mesh) -> float:
    """max over cells of diameter / inradius."""
    return float(np.max(mesh.cell_diameters / mesh.cell_inradii))
