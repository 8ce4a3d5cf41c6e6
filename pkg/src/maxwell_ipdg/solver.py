"""Symmetric-indefinite solves, best approximation and discrete inf-sup."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import AssembledForms
from .femspace.space import BrokenField, project_L2

log = logging.getLogger(__name__)

DENSE_LIMIT = 3000
DENSE_INFSUP_LIMIT = 2000
PIVOT_TOL = 1e-13
RESIDUAL_TOL = 1e-10


class DiscreteResonanceError(RuntimeError):
    """The system matrix is singular or numerically singular."""

    def __init__(self, message, min_pivot=None, max_pivot=None, index=None):
        super().__init__(message)
        self.min_pivot = min_pivot
        self.max_pivot = max_pivot
        self.index = index


class NotPositiveDefiniteError(RuntimeError):
    pass


@dataclass(frozen=True)
class Inertia:
    positive: int
    negative: int
    zero: int

    def as_tuple(self):
        return (self.positive, self.negative, self.zero)


def _pivot_check(pivots: np.ndarray) -> None:
    mag = np.abs(pivots)
    big = mag.max() if mag.size else 0.0
    i = int(np.argmin(mag)) if mag.size else -1
    if big == 0.0 or mag[i] <= PIVOT_TOL * big:
        raise DiscreteResonanceError(
            f"discrete resonance: pivot {i} has |d|={mag[i]:.3e} relative to max {big:.3e}",
            min_pivot=float(mag[i]), max_pivot=float(big), index=i)


class LDLFactorization:
    """Symmetric LDL^T factorization with inertia.

    Dense Bunch-Kaufman (LAPACK sytrf) below ``DENSE_LIMIT`` unknowns;
    otherwise SuperLU in symmetric mode with diagonal pivoting and a
    symmetric fill-reducing ordering, so that P A P^T = L (D L^T) and the
    diagonal of U carries the pivots.
    """

    def __init__(self, A):
        self.n = A.shape[0]
        self.A = A
        if self.n <= DENSE_LIMIT:
            self._dense(A.toarray() if sp.issparse(A) else np.asarray(A))
        else:
            self._sparse(sp.csc_matrix(A))

    def _dense(self, A):
        self.kind = "dense-ldl"
        lu, d, perm = sla.ldl(A, lower=True)
        n = self.n
        eig = np.empty(n)
        i = 0
        while i < n:
            if i + 1 < n and d[i + 1, i] != 0.0:
                eig[i:i + 2] = np.linalg.eigvalsh(d[i:i + 2, i:i + 2])
                i += 2
            else:
                eig[i] = d[i, i]
                i += 1
        self.pivots = eig
        _pivot_check(eig)
        self._L = lu[perm]
        self._perm = perm
        self._d_banded = np.zeros((3, n))
        self._d_banded[0, 1:] = np.diag(d, 1)
        self._d_banded[1] = np.diag(d)
        self._d_banded[2, :-1] = np.diag(d, -1)

    def _sparse(self, A):
        self.kind = "superlu-ldl"
        try:
            lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                           options=dict(SymmetricMode=True))
        except RuntimeError as exc:
            raise DiscreteResonanceError(f"discrete resonance: {exc}") from exc
        if not np.array_equal(lu.perm_r, lu.perm_c):
            # off-diagonal pivoting happened; inertia from U is not valid
            log.warning("SuperLU left symmetric mode; inertia unavailable")
            self.pivots = None
        else:
            self.pivots = lu.U.diagonal()
            _pivot_check(self.pivots)
        self._lu = lu

    @property
    def inertia(self) -> Inertia | None:
        if self.pivots is None:
            return None
        p = self.pivots
        return Inertia(int((p > 0).sum()), int((p < 0).sum()), int((p == 0).sum()))

    def _solve_once(self, b):
        if self.kind == "dense-ldl":
            perm = self._perm
            y = sla.solve_triangular(self._L, b[perm], lower=True, unit_diagonal=True)
            z = sla.solve_banded((1, 1), self._d_banded, y)
            x = np.empty_like(b)
            x[perm] = sla.solve_triangular(self._L.T, z, lower=False, unit_diagonal=True)
            return x
        return self._lu.solve(b)

    def solve(self, b, refine: int = 2):
        b = np.asarray(b, dtype=float)
        x = self._solve_once(b)
        for _ in range(refine):
            r = b - self.A @ x
            if np.abs(r).max() <= 1e-14 * max(np.abs(b).max(), 1e-300):
                break
            x = x + self._solve_once(r)
        return x


@dataclass(frozen=True)
class Solution:
    field: BrokenField
    residual: float          # ||B x - rhs||_inf / ||rhs||_inf
    inertia: Inertia | None
    method: str


def solve_dg(forms: AssembledForms, rhs: np.ndarray) -> Solution:
    """Solve B_sharp x = rhs by symmetric-indefinite factorization."""
    B = forms.b_sharp()
    fac = LDLFactorization(B)
    rhs = np.asarray(rhs, dtype=float)
    x = fac.solve(rhs)
    scale = np.abs(rhs).max()
    res = float(np.abs(B @ x - rhs).max() / scale) if scale > 0 else float(np.abs(B @ x).max())
    if scale > 0 and res > RESIDUAL_TOL:
        raise DiscreteResonanceError(f"discrete resonance: relative residual {res:.3e} after "
                                     f"refinement")
    return Solution(BrokenField(forms.space, x), res, fac.inertia, fac.kind)


def _spd_solver(G):
    if G.shape[0] <= DENSE_LIMIT:
        try:
            cf = sla.cho_factor(G.toarray())
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError("B_sharp^+ is not positive definite") from exc
        return lambda b: sla.cho_solve(cf, b)
    lu = spla.splu(sp.csc_matrix(G), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                   options=dict(SymmetricMode=True))
    if np.any(lu.U.diagonal() <= 0):
        raise NotPositiveDefiniteError("B_sharp^+ is not positive definite")
    return lu.solve


def sharp_plus_rhs(forms: AssembledForms, E, curlE, degree: int | None = None) -> np.ndarray:
    """b_sharp^+(E, phi_i) for a conforming field E in H_0(curl).

    Jumps and lifting of E vanish, so the vector is
    omega^2 (E, phi_i)_eps + (curl E, C phi_i)_nu; the second term only needs
    the L2 projection of curl E onto the degree-ell space since nu is
    constant per cell.
    """
    space = forms.space
    deg = space.boosted_degree() if degree is None else degree
    quad = space.cell_quadrature(deg)
    Ev = np.asarray(E(quad.points), dtype=float)
    epsE = np.einsum("ncd,nqd->nqc", forms.material.eps, Ev)
    m = np.einsum("nq,nqc,nqi->nci", quad.weights, epsE, quad.phi).reshape(-1)
    q = project_L2(curlE, space, degree=space.ell, quad_degree=deg).coeffs
    return forms.omega**2 * m + forms.lifting.C.T @ (forms.N_nu @ q)


def best_approximation(forms: AssembledForms, E, curlE, degree: int | None = None) -> BrokenField:
    """The b_sharp^+-orthogonal projection of a conforming field onto P_k^b."""
    G = forms.b_sharp_plus()
    solve = _spd_solver(G)
    return BrokenField(forms.space, solve(sharp_plus_rhs(forms, E, curlE, degree)))


def best_approximation_discrete(forms: AssembledForms, v: BrokenField) -> BrokenField:
    """Projection of a member of P_k^b; the identity up to rounding."""
    G = forms.b_sharp_plus()
    return BrokenField(forms.space, _spd_solver(G)(G @ v.coeffs))


def infsup_constant(forms: AssembledForms) -> float:
    """min_v max_w |b_sharp(v, w)| / (|||v|||_sharp |||w|||_sharp).

    With G = B_sharp^+ this is the smallest |lambda| of B_sharp x = lambda G x,
    i.e. the smallest singular value of G^{-1/2} B_sharp G^{-1/2}.
    """
    B = forms.b_sharp()
    G = forms.b_sharp_plus()
    n = B.shape[0]
    if n <= DENSE_INFSUP_LIMIT:
        Gd = G.toarray()
        try:
            Lc = np.linalg.cholesky(Gd)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError("B_sharp^+ is not positive definite") from exc
        Y = sla.solve_triangular(Lc, B.toarray(), lower=True)
        T = sla.solve_triangular(Lc, Y.T, lower=True)
        lam = sla.eigvalsh(0.5 * (T + T.T))
        return float(np.abs(lam).min())
    # shift-invert about zero: largest |1/lambda|
    # fixed start vector: ARPACK's default random start breaks reproducibility
    v0 = np.ones(n) / np.sqrt(n)
    vals = spla.eigsh(sp.csc_matrix(B), k=1, M=sp.csc_matrix(G), sigma=0.0, which="LM",
                      tol=1e-12, v0=v0, return_eigenvectors=False)
    return float(np.abs(vals).min())
