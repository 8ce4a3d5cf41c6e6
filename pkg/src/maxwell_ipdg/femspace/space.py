"""Broken vector polynomial spaces on an affine tetrahedral mesh.

Dof layout: cell-major, then Cartesian component, then scalar basis index,
``dof = (K * 3 + c) * nb + i``.  On cell K the scalar basis is the reference
basis pulled back by the affine map and scaled by |det J_K|^{-1/2}, so it is
L2(K)-orthonormal.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..mesh import Mesh
from .basis import ReferenceBasis, reference_basis, scalar_dim
from .quadrature import quadrature

SUPPORTED_K = (1, 2, 3, 4)

# map from the reference triangle to local face i of the reference tetrahedron
_REF_VERTS = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])


class SpaceError(ValueError):
    pass


def curl_from_gradient(dv: np.ndarray) -> np.ndarray:
    """curl from a Jacobian array ``dv[..., c, b] = d v_c / d x_b``."""
    return np.stack([dv[..., 2, 1] - dv[..., 1, 2],
                     dv[..., 0, 2] - dv[..., 2, 0],
                     dv[..., 1, 0] - dv[..., 0, 1]], axis=-1)


@dataclass
class CellQuadrature:
    points: np.ndarray     # (nc, nq, 3) physical
    weights: np.ndarray    # (nc, nq) physical
    ref_points: np.ndarray  # (nq, 3)
    phi: np.ndarray        # (nc, nq, nb) physical basis values
    grad: np.ndarray       # (nc, nq, nb, 3) physical gradients


@dataclass
class FaceQuadrature:
    """Face quadrature with basis traces from the left (0) and right (1) cell.

    Right-side arrays are zero on boundary faces.
    """
    points: np.ndarray     # (nf, nq, 3)
    weights: np.ndarray    # (nf, nq)
    phi: np.ndarray        # (2, nf, nq, nb)
    grad: np.ndarray       # (2, nf, nq, nb, 3)


class DGSpace:
    """Broken space P_k^b with lifting degree ``ell`` in {k-1, k}."""

    def __init__(self, mesh: Mesh, k: int, ell: int | None = None):
        if k not in SUPPORTED_K:
            raise SpaceError(f"unsupported polynomial degree k={k}")
        if ell is None:
            ell = k
        if ell not in (k - 1, k):
            raise SpaceError(f"lifting degree ell={ell} must be k-1 or k")
        self.mesh = mesh
        self.k = k
        self.ell = ell
        self.basis: ReferenceBasis = reference_basis(k)
        self.nb = scalar_dim(k)
        self.nb_ell = scalar_dim(ell)
        self.dofs_per_cell = 3 * self.nb
        self.ndofs = mesh.n_cells * self.dofs_per_cell
        self.ndofs_ell = mesh.n_cells * 3 * self.nb_ell

        J = mesh.jacobians
        self.det = np.linalg.det(J)
        self.jinv = np.linalg.inv(J)
        self.scale = 1.0 / np.sqrt(self.det)
        self._cell_cache: dict[int, CellQuadrature] = {}
        self._face_cache: dict[int, FaceQuadrature] = {}

    # default exactness degrees
    @property
    def volume_degree(self) -> int:
        return 2 * self.k + 2

    @property
    def face_degree(self) -> int:
        return 2 * self.k + 1

    def boosted_degree(self, boost: int = 2) -> int:
        return 2 * self.k + 2 + boost

    def nbasis(self, degree: int) -> int:
        if degree not in (self.k, self.ell):
            raise SpaceError(f"degree {degree} is neither k nor ell")
        return scalar_dim(degree)

    def offsets(self, degree: int | None = None) -> np.ndarray:
        nb = self.nb if degree is None else self.nbasis(degree)
        return np.arange(self.mesh.n_cells) * 3 * nb

    # -- geometry ---------------------------------------------------------
    def to_reference(self, cell: int, points: np.ndarray) -> np.ndarray:
        x0 = self.mesh.vertices[self.mesh.cells[cell, 0]]
        return (np.atleast_2d(points) - x0) @ self.jinv[cell].T

    def to_reference_many(self, cells: np.ndarray, points: np.ndarray) -> np.ndarray:
        """``points`` (n, nq, 3) in cells ``cells`` (n,) -> reference coords."""
        x0 = self.mesh.vertices[self.mesh.cells[cells, 0]]
        return np.einsum("nij,nqj->nqi", self.jinv[cells], points - x0[:, None, :])

    def cell_quadrature(self, degree: int | None = None) -> CellQuadrature:
        degree = self.volume_degree if degree is None else degree
        if degree not in self._cell_cache:
            rule = quadrature("tet", degree)
            m = self.mesh
            x0 = m.vertices[m.cells[:, 0]]
            pts = x0[:, None, :] + np.einsum("nij,qj->nqi", m.jacobians, rule.points)
            w = self.det[:, None] * rule.weights[None, :]
            phi_ref = self.basis.values(rule.points)
            g_ref = self.basis.gradients(rule.points)
            phi = self.scale[:, None, None] * phi_ref[None]
            grad = self.scale[:, None, None, None] * np.einsum(
                "qbj,njd->nqbd", g_ref, self.jinv)
            self._cell_cache[degree] = CellQuadrature(pts, w, rule.points, phi, grad)
        return self._cell_cache[degree]

    def face_quadrature(self, degree: int | None = None) -> FaceQuadrature:
        degree = self.face_degree if degree is None else degree
        if degree not in self._face_cache:
            rule = quadrature("triangle", degree)
            m = self.mesh
            P = m.vertices[m.faces]
            s, t = rule.points[:, 0], rule.points[:, 1]
            pts = (P[:, None, 0] + s[None, :, None] * (P[:, None, 1] - P[:, None, 0])
                   + t[None, :, None] * (P[:, None, 2] - P[:, None, 0]))
            w = 2.0 * m.face_areas[:, None] * rule.weights[None, :]
            nf, nq = pts.shape[:2]
            phi = np.zeros((2, nf, nq, self.nb))
            grad = np.zeros((2, nf, nq, self.nb, 3))
            for side in (0, 1):
                sel = np.flatnonzero(m.face_cells[:, side] >= 0)
                cells = m.face_cells[sel, side]
                ref = self.to_reference_many(cells, pts[sel]).reshape(-1, 3)
                v = self.basis.values(ref).reshape(len(sel), nq, self.nb)
                g = self.basis.gradients(ref).reshape(len(sel), nq, self.nb, 3)
                sc = self.scale[cells]
                phi[side, sel] = sc[:, None, None] * v
                grad[side, sel] = sc[:, None, None, None] * np.einsum(
                    "nqbj,njd->nqbd", g, self.jinv[cells])
            self._face_cache[degree] = FaceQuadrature(pts, w, phi, grad)
        return self._face_cache[degree]

    def zero(self, degree: int | None = None) -> "BrokenField":
        degree = self.k if degree is None else degree
        return BrokenField(self, np.zeros(self.mesh.n_cells * 3 * self.nbasis(degree)), degree)


@dataclass
class BrokenField:
    """Coefficients of a broken vector polynomial field of degree ``degree``."""

    space: DGSpace
    coeffs: np.ndarray
    degree: int = field(default=-1)

    def __post_init__(self):
        if self.degree == -1:
            self.degree = self.space.k
        nb = self.space.nbasis(self.degree)
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.mesh.n_cells * 3 * nb,):
            raise SpaceError(
                f"coefficient vector has shape {self.coeffs.shape}, expected "
                f"({self.space.mesh.n_cells * 3 * nb},)")

    @property
    def nb(self) -> int:
        return self.space.nbasis(self.degree)

    def cellwise(self) -> np.ndarray:
        """Coefficients reshaped to (nc, 3, nb)."""
        return self.coeffs.reshape(-1, 3, self.nb)

    def __add__(self, other):
        return BrokenField(self.space, self.coeffs + other.coeffs, self.degree)

    def __sub__(self, other):
        return BrokenField(self.space, self.coeffs - other.coeffs, self.degree)

    def __mul__(self, a: float):
        return BrokenField(self.space, a * self.coeffs, self.degree)

    __rmul__ = __mul__

    # -- batched evaluation at quadrature points --------------------------
    def at_cell_quadrature(self, quad: CellQuadrature) -> np.ndarray:
        return np.einsum("nqi,nci->nqc", quad.phi[..., :self.nb], self.cellwise())

    def jacobian_at_cell_quadrature(self, quad: CellQuadrature) -> np.ndarray:
        """``out[n, q, c, b] = d v_c / d x_b``."""
        return np.einsum("nqid,nci->nqcd", quad.grad[..., :self.nb, :], self.cellwise())

    def curl_at_cell_quadrature(self, quad: CellQuadrature) -> np.ndarray:
        return curl_from_gradient(self.jacobian_at_cell_quadrature(quad))

    def at_face_quadrature(self, fquad: FaceQuadrature) -> np.ndarray:
        """Traces from both sides, shape (2, nf, nq, 3); zero for missing sides."""
        m = self.space.mesh
        U = self.cellwise()
        out = np.zeros(fquad.phi.shape[:3] + (3,))
        for side in (0, 1):
            sel = np.flatnonzero(m.face_cells[:, side] >= 0)
            out[side, sel] = np.einsum("fqi,fci->fqc", fquad.phi[side, sel, :, :self.nb],
                                       U[m.face_cells[sel, side]])
        return out

    def jacobian_at_face_quadrature(self, fquad: FaceQuadrature) -> np.ndarray:
        m = self.space.mesh
        U = self.cellwise()
        out = np.zeros(fquad.phi.shape[:3] + (3, 3))
        for side in (0, 1):
            sel = np.flatnonzero(m.face_cells[:, side] >= 0)
            out[side, sel] = np.einsum("fqid,fci->fqcd",
                                       fquad.grad[side, sel, :, :self.nb, :],
                                       U[m.face_cells[sel, side]])
        return out


def evaluate(field: BrokenField, cell: int, points: np.ndarray) -> np.ndarray:
    """Values of ``field`` restricted to ``cell`` at physical ``points`` (n, 3)."""
    sp_ = field.space
    ref = sp_.to_reference(cell, points)
    phi = sp_.basis.values(ref)[:, :field.nb] * sp_.scale[cell]
    return phi @ field.cellwise()[cell].T


def evaluate_curl(field: BrokenField, cell: int, points: np.ndarray) -> np.ndarray:
    sp_ = field.space
    ref = sp_.to_reference(cell, points)
    g = sp_.basis.gradients(ref)[:, :field.nb, :] @ sp_.jinv[cell] * sp_.scale[cell]
    dv = np.einsum("pid,ci->pcd", g, field.cellwise()[cell])
    return curl_from_gradient(dv)


def project_L2(func, space: DGSpace, weight=None, degree: int | None = None,
               quad_degree: int | None = None) -> BrokenField:
    """Cellwise (optionally weighted) L2 projection of a callable field.

    ``func`` maps points of shape (..., 3) to values of shape (..., 3).
    ``weight`` is an optional (nc, 3, 3) array of SPD tensors, constant per
    cell.
    """
    degree = space.k if degree is None else degree
    nb = space.nbasis(degree)
    quad = space.cell_quadrature(space.boosted_degree() if quad_degree is None else quad_degree)
    f = np.asarray(func(quad.points), dtype=float)
    # unweighted moments (f, phi_i e_c)_K
    mom = np.einsum("nq,nqc,nqi->nci", quad.weights, f, quad.phi[..., :nb])
    if weight is not None:
        W = np.asarray(weight, dtype=float)
        # block (W_K kron I) on both sides of the orthonormal mass system
        rhs = np.einsum("ncd,ndi->nci", W, mom)
        mom = np.linalg.solve(W, rhs)
    return BrokenField(space, mom.reshape(-1), degree)
