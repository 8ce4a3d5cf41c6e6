"""Tangential jumps, the jump lifting and the discrete curl.

For v in P_k^b the lifting L(v) in P_ell^b is defined by

    (L(v), phi) = sum_F (jump_c(v), avg(phi))_F   for all phi in P_ell^b,

with the sum over interior and boundary faces.  The discrete curl is
C(v) = curl_h v + L(v).  Because the cell bases are L2-orthonormal, both
operators are assembled directly as sparse matrices mapping degree-k
coefficients to degree-ell coefficients.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ._blocks import block_coo, cross_matrix, kron3
from .femspace.space import BrokenField, DGSpace, evaluate

# Levi-Civita symbol
LEVI_CIVITA = np.zeros((3, 3, 3))
for _a, _b, _c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    LEVI_CIVITA[_a, _b, _c] = 1.0
    LEVI_CIVITA[_a, _c, _b] = -1.0


def tangential_jump(field: BrokenField, face: int, points: np.ndarray) -> np.ndarray:
    """Tangential jump v|_{K_l} x n_F - v|_{K_r} x n_F at physical points on F.

    On boundary faces only the left trace is used.
    """
    mesh = field.space.mesh
    n = mesh.face_normals[face]
    left, right = mesh.face_cells[face]
    jump = np.cross(evaluate(field, left, points), n)
    if right >= 0:
        jump -= np.cross(evaluate(field, right, points), n)
    return jump


def curl_matrix(space: DGSpace) -> sp.csr_matrix:
    """Broken curl as a map P_k^b -> P_ell^b (exact since ell >= k - 1)."""
    nb, nbl = space.nb, space.nb_ell
    quad = space.cell_quadrature(2 * space.k)
    # G[n, j, i, b] = int_K psi_j d_b phi_i
    G = np.einsum("nq,nqj,nqib->njib", quad.weights, quad.phi[..., :nbl], quad.grad)
    nc = space.mesh.n_cells
    blocks = np.zeros((nc, 3, nbl, 3, nb))
    for a in range(3):
        for c in range(3):
            for b in range(3):
                e = LEVI_CIVITA[a, b, c]
                if e:
                    blocks[:, a, :, c, :] += e * G[..., b]
    cells = np.arange(nc)
    return block_coo(blocks.reshape(nc, 3 * nbl, 3 * nb), cells, cells, 3 * nbl, 3 * nb,
                     (space.ndofs_ell, space.ndofs))


def _face_pairs(mesh):
    """(face, test_side, trial_side) for all existing side pairs."""
    out = []
    for t in (0, 1):
        for s in (0, 1):
            sel = np.flatnonzero(mesh.face_cells[:, max(t, s)] >= 0)
            out.append((sel, t, s))
    return out


def lifting_matrix(space: DGSpace) -> sp.csr_matrix:
    mesh = space.mesh
    nb, nbl = space.nb, space.nb_ell
    fq = space.face_quadrature()
    X = cross_matrix(mesh.face_normals)  # X u = u x n_F
    avg_w = np.where(mesh.interior, 0.5, 1.0)
    blocks, rows, cols = [], [], []
    for sel, t, s in _face_pairs(mesh):
        sign = 1.0 if s == 0 else -1.0
        T = np.einsum("fq,fqj,fqi->fji", fq.weights[sel], fq.phi[t, sel, :, :nbl],
                      fq.phi[s, sel])
        coef = (sign * avg_w[sel])[:, None, None] * X[sel]
        blocks.append(kron3(coef, T))
        rows.append(mesh.face_cells[sel, t])
        cols.append(mesh.face_cells[sel, s])
    return block_coo(np.concatenate(blocks), np.concatenate(rows), np.concatenate(cols),
                     3 * nbl, 3 * nb, (space.ndofs_ell, space.ndofs))


class LiftingOperator:
    """Sparse jump lifting ``L`` and broken curl ``R`` for a DG space.

    ``C = R + L`` is the discrete curl.  Row and column spaces are P_ell^b
    and P_k^b respectively.
    """

    def __init__(self, space: DGSpace):
        self.space = space
        self.L = lifting_matrix(space)
        self.R = curl_matrix(space)
        self.C = (self.R + self.L).tocsr()

    def apply(self, v: BrokenField) -> BrokenField:
        return BrokenField(self.space, self.L @ v.coeffs, self.space.ell)

    def discrete_curl(self, v: BrokenField) -> BrokenField:
        return BrokenField(self.space, self.C @ v.coeffs, self.space.ell)

    def broken_curl(self, v: BrokenField) -> BrokenField:
        return BrokenField(self.space, self.R @ v.coeffs, self.space.ell)


def build_lifting(space: DGSpace) -> LiftingOperator:
    return LiftingOperator(space)


def apply_lifting(v: BrokenField, lifting: LiftingOperator | None = None) -> BrokenField:
    lifting = lifting or LiftingOperator(v.space)
    return lifting.apply(v)


def discrete_curl(v: BrokenField, lifting: LiftingOperator | None = None) -> BrokenField:
    lifting = lifting or LiftingOperator(v.space)
    return lifting.discrete_curl(v)
