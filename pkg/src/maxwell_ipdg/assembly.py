"""Sparse assembly of the interior-penalty forms over the broken space.

    B_sharp   = -omega^2 M_eps + A_C + eta S_h - S_lift
    B_sharp^+ = +omega^2 M_eps + A_C + eta S_h - S_lift

with A_C = C^T N C (discrete-curl stiffness), S_lift = L^T N L, and the
jump penalty S_h.  ``assemble_bh`` builds the classical face-average IPDG
matrix independently of the lifting, from face fluxes.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._blocks import block_coo, cross_matrix, kron3
from .femspace.space import DGSpace
from .lifting import LEVI_CIVITA, LiftingOperator
from .material import MaterialModel

log = logging.getLogger(__name__)

DENSE_CALIBRATION_LIMIT = 2500


def _cells(space):
    return np.arange(space.mesh.n_cells)


def _block_diag(space, tensors, nb, nrows):
    blocks = kron3(tensors, np.broadcast_to(np.eye(nb), (len(tensors), nb, nb)))
    c = _cells(space)
    return block_coo(blocks, c, c, 3 * nb, 3 * nb, (nrows, nrows))


def assemble_mass(space: DGSpace, material: MaterialModel) -> sp.csr_matrix:
    """M_eps[i, j] = (phi_j, phi_i)_eps; block eps_K (x) I on each cell."""
    return _block_diag(space, material.eps, space.nb, space.ndofs)


def nu_gram(space: DGSpace, material: MaterialModel) -> sp.csr_matrix:
    """nu-weighted Gram matrix of the degree-ell space."""
    return _block_diag(space, material.nu, space.nb_ell, space.ndofs_ell)


def assemble_curl_stiffness(space, material, lifting: LiftingOperator) -> sp.csr_matrix:
    N = nu_gram(space, material)
    return _sym(lifting.C.T @ N @ lifting.C)


def assemble_lift_gram(space, material, lifting: LiftingOperator) -> sp.csr_matrix:
    N = nu_gram(space, material)
    return _sym(lifting.L.T @ N @ lifting.L)


def _sym(A):
    A = sp.csr_matrix(0.5 * (A + A.T))
    A.sort_indices()
    return A


def face_nu_tilde(space: DGSpace, material: MaterialModel) -> np.ndarray:
    fc = space.mesh.face_cells
    nt = material.nu_tilde
    right = np.where(fc[:, 1] >= 0, nt[np.maximum(fc[:, 1], 0)], -np.inf)
    return np.maximum(nt[fc[:, 0]], right)


def _all_side_pairs(mesh):
    for t in (0, 1):
        for s in (0, 1):
            yield np.flatnonzero(mesh.face_cells[:, max(t, s)] >= 0), t, s


def assemble_jump_penalty(space: DGSpace, material: MaterialModel) -> sp.csr_matrix:
    """s_h(v, w) = sum_F nu_F / h_F (jump_c v, jump_c w)_F, nu_F = max over the
    adjacent cells of the smallest eigenvalue of nu."""
    mesh = space.mesh
    fq = space.face_quadrature()
    X = cross_matrix(mesh.face_normals)
    P = np.einsum("fab,fac->fbc", X, X)  # tangential projector
    wF = face_nu_tilde(space, material) / mesh.face_diameters
    blocks, rows, cols = [], [], []
    for sel, t, s in _all_side_pairs(mesh):
        sign = (1.0 if t == 0 else -1.0) * (1.0 if s == 0 else -1.0)
        T = np.einsum("fq,fqi,fqj->fij", fq.weights[sel], fq.phi[t, sel], fq.phi[s, sel])
        blocks.append(kron3((sign * wF[sel])[:, None, None] * P[sel], T))
        rows.append(mesh.face_cells[sel, t])
        cols.append(mesh.face_cells[sel, s])
    S = block_coo(np.concatenate(blocks), np.concatenate(rows), np.concatenate(cols),
                  3 * space.nb, 3 * space.nb, (space.ndofs, space.ndofs))
    return _sym(S)


def _curl_basis(grad):
    """curl(phi_i e_c) from basis gradients (..., nb, 3) -> (..., 3c, nb, 3a)."""
    return np.einsum("abc,...ib->...cia", LEVI_CIVITA, grad)


def assemble_broken_curl_stiffness(space: DGSpace, material: MaterialModel) -> sp.csr_matrix:
    """(curl_h phi_j, curl_h phi_i)_nu by direct volume quadrature."""
    quad = space.cell_quadrature(2 * space.k)
    CB = _curl_basis(quad.grad)  # (n, q, 3, nb, 3)
    nuCB = np.einsum("nab,nqcib->nqcia", material.nu, CB)
    nb = space.nb
    blocks = np.einsum("nq,nqcia,nqdja->ncidj", quad.weights, CB, nuCB)
    c = _cells(space)
    return block_coo(blocks.reshape(-1, 3 * nb, 3 * nb), c, c, 3 * nb, 3 * nb,
                     (space.ndofs, space.ndofs))


def assemble_consistency(space: DGSpace, material: MaterialModel) -> sp.csr_matrix:
    """sum_F ({nu curl_h v}_F, jump_c w)_F with v trial (columns), w test (rows)."""
    mesh = space.mesh
    nb = space.nb
    fq = space.face_quadrature()
    X = cross_matrix(mesh.face_normals)
    avg_w = np.where(mesh.interior, 0.5, 1.0)
    blocks, rows, cols = [], [], []
    for sel, t, s in _all_side_pairs(mesh):
        cells_s = mesh.face_cells[sel, s]
        CB = _curl_basis(fq.grad[s, sel])  # (f, q, 3c, nb, 3a)
        flux = np.einsum("fab,fqcib->fqcia", material.nu[cells_s], CB)
        sign = 1.0 if t == 0 else -1.0
        # jump of test basis phi_{t,j} e_d: sign * X[a, d] phi_{t,j}
        blk = np.einsum("f,fad,fq,fqj,fqcia->fdjci", sign * avg_w[sel], X[sel],
                        fq.weights[sel], fq.phi[t, sel], flux)
        blocks.append(blk.reshape(-1, 3 * nb, 3 * nb))
        rows.append(mesh.face_cells[sel, t])
        cols.append(cells_s)
    return block_coo(np.concatenate(blocks), np.concatenate(rows), np.concatenate(cols),
                     3 * nb, 3 * nb, (space.ndofs, space.ndofs))


def assemble_bh(space: DGSpace, material: MaterialModel, omega: float,
                eta: float) -> sp.csr_matrix:
    """Classical symmetric interior penalty matrix with face-average fluxes."""
    M = assemble_mass(space, material)
    K = assemble_broken_curl_stiffness(space, material)
    S = assemble_jump_penalty(space, material)
    Cn = assemble_consistency(space, material)
    B = -omega**2 * M + K + eta * S + Cn + Cn.T
    return sp.csr_matrix(B)


def assemble_rhs(space: DGSpace, J, degree: int | None = None) -> np.ndarray:
    """Load vector (J, phi_i) by volume quadrature; ``J`` maps (..., 3) -> (..., 3)."""
    quad = space.cell_quadrature(space.boosted_degree() if degree is None else degree)
    vals = np.asarray(J(quad.points), dtype=float)
    return np.einsum("nq,nqc,nqi->nci", quad.weights, vals, quad.phi).reshape(-1)


@dataclass(frozen=True)
class EtaCalibration:
    eta_min: float
    eta_rec: float
    safety: float
    method: str


def calibrate_eta(space: DGSpace, material: MaterialModel, lifting: LiftingOperator | None = None,
                  safety: float = 1.25, S_h=None, S_lift=None) -> EtaCalibration:
    """Smallest eta making eta * S_h - S_lift positive semidefinite.

    eta_min is the largest eigenvalue of S_lift v = lambda S_h v on range(S_h)
    (the kernel of S_h lies in the kernel of S_lift).  Dense below
    ``DENSE_CALIBRATION_LIMIT`` dofs; above, Lanczos on the pencil with S_h
    regularised by a 1e-9 relative shift, which perturbs eta_min by less
    than about 1e-6 relative.
    """
    lifting = lifting or LiftingOperator(space)
    S_h = assemble_jump_penalty(space, material) if S_h is None else S_h
    S_lift = assemble_lift_gram(space, material, lifting) if S_lift is None else S_lift
    n = S_h.shape[0]
    try:
        if n <= DENSE_CALIBRATION_LIMIT:
            lam, U = np.linalg.eigh(S_h.toarray())
            keep = lam > 1e-11 * lam[-1]
            Z = U[:, keep] / np.sqrt(lam[keep])
            red = Z.T @ (S_lift @ Z)
            eta_min = float(sla.eigvalsh(0.5 * (red + red.T))[-1])
            method = "dense"
        else:
            tau = 1e-9 * float(S_h.diagonal().max())
            Mreg = (S_h + tau * sp.identity(n, format="csr")).tocsc()
            lu = spla.splu(Mreg)
            Minv = spla.LinearOperator((n, n), matvec=lu.solve, dtype=float)
            vals = spla.eigsh(S_lift, k=1, M=Mreg, Minv=Minv, which="LA", tol=1e-10,
                              v0=np.ones(n) / np.sqrt(n), return_eigenvectors=False)
            eta_min = float(vals[0])
            method = "lanczos"
    except (np.linalg.LinAlgError, spla.ArpackError) as exc:
        raise RuntimeError(f"eigen-solver failure during eta calibration: {exc}") from exc
    log.debug("eta calibration: eta_min=%.6g (%s)", eta_min, method)
    return EtaCalibration(eta_min, safety * eta_min, safety, method)


@dataclass
class AssembledForms:
    """All matrices needed for B_sharp / B_sharp^+ at a given omega and eta."""

    space: DGSpace
    material: MaterialModel
    lifting: LiftingOperator
    M_eps: sp.csr_matrix
    A_C: sp.csr_matrix
    S_h: sp.csr_matrix
    S_lift: sp.csr_matrix
    N_nu: sp.csr_matrix
    omega: float
    eta: float

    def s_sharp(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.eta * self.S_h - self.S_lift)

    def b_sharp(self) -> sp.csr_matrix:
        return sp.csr_matrix(-self.omega**2 * self.M_eps + self.A_C + self.s_sharp())

    def b_sharp_plus(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.omega**2 * self.M_eps + self.A_C + self.s_sharp())

    def with_params(self, omega: float | None = None, eta: float | None = None):
        return AssembledForms(self.space, self.material, self.lifting, self.M_eps, self.A_C,
                              self.S_h, self.S_lift, self.N_nu,
                              self.omega if omega is None else omega,
                              self.eta if eta is None else eta)


def assemble_forms(space: DGSpace, material: MaterialModel, omega: float, eta: float,
                   lifting: LiftingOperator | None = None) -> AssembledForms:
    lifting = lifting or LiftingOperator(space)
    N = nu_gram(space, material)
    return AssembledForms(
        space=space,
        material=material,
        lifting=lifting,
        M_eps=assemble_mass(space, material),
        A_C=_sym(lifting.C.T @ N @ lifting.C),
        S_h=assemble_jump_penalty(space, material),
        S_lift=_sym(lifting.L.T @ N @ lifting.L),
        N_nu=N,
        omega=float(omega),
        eta=float(eta),
    )
