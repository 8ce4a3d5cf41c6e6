"""Hierarchical L2-orthonormal scalar basis on the reference tetrahedron.

Dubiner (collapsed Jacobi) polynomials written in Cartesian form through
scaled Jacobi polynomials S_n(u, t) = t^n P_n(u / t), which stay polynomial
and carry their gradients through the three-term recurrence.  A final
Cholesky pass in exact quadrature normalises the family to rounding level.
The functions are ordered by total degree, so the first dim(P_q) of them
span P_q for every q <= degree.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .quadrature import quadrature

MAX_DEGREE = 6


class BasisError(ValueError):
    pass


def scalar_dim(degree: int) -> int:
    return (degree + 1) * (degree + 2) * (degree + 3) // 6


def _index_triples(degree: int) -> list[tuple[int, int, int]]:
    out = []
    for total in range(degree + 1):
        for i in range(total, -1, -1):
            for j in range(total - i, -1, -1):
                out.append((i, j, total - i - j))
    return out


def _scaled_jacobi(nmax, alpha, beta, u, du, t, dt):
    """Values and gradients of t^n P_n^{(alpha,beta)}(u/t), n = 0..nmax.

    ``u`` and ``t`` are affine in the Cartesian coordinates with constant
    gradients ``du`` and ``dt`` (shape (3,)).
    """
    npts = u.shape[0]
    vals = [np.ones(npts)]
    grads = [np.zeros((npts, 3))]
    if nmax == 0:
        return vals, grads
    a0 = 0.5 * (alpha + beta + 2.0)
    b0 = 0.5 * (alpha - beta)
    vals.append(a0 * u + b0 * t)
    grads.append(np.broadcast_to(a0 * du + b0 * dt, (npts, 3)).copy())
    for n in range(1, nmax):
        c = 2.0 * n + alpha + beta
        d = 2.0 * (n + 1) * (n + alpha + beta + 1) * c
        a1 = (c + 1) * (c + 2) * c / d
        a2 = (c + 1) * (alpha**2 - beta**2) / d
        a3 = 2.0 * (n + alpha) * (n + beta) * (c + 2) / d
        lin = a1 * u + a2 * t
        dlin = a1 * du + a2 * dt
        p, dp = vals[n], grads[n]
        q, dq = vals[n - 1], grads[n - 1]
        vals.append(lin * p - a3 * t**2 * q)
        grads.append(
            dlin[None, :] * p[:, None]
            + lin[:, None] * dp
            - a3 * (2.0 * t[:, None] * dt[None, :] * q[:, None] + (t**2)[:, None] * dq)
        )
    return vals, grads


class ReferenceBasis:
    """Orthonormal basis of P_degree on the reference tetrahedron.

    ``values(points)`` has shape (npts, dim); ``gradients(points)`` has shape
    (npts, dim, 3).  Points are reference coordinates, shape (npts, 3).
    """

    def __init__(self, degree: int):
        if not 0 <= degree <= MAX_DEGREE:
            raise BasisError(f"unsupported basis degree {degree}")
        self.degree = degree
        self.dim = scalar_dim(degree)
        self.indices = _index_triples(degree)

        rule = quadrature("tet", 2 * degree)
        V, _ = self._raw(rule.points, need_grad=False)
        W = rule.weights
        C = np.eye(self.dim)
        for _ in range(2):
            B = V @ C
            G = B.T @ (W[:, None] * B)
            L = np.linalg.cholesky(G)
            C = C @ np.linalg.inv(L).T
        self.coefficients = C
        self.coefficients.flags.writeable = False

    def _raw(self, pts, need_grad=True):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
        p = self.degree
        e = np.eye(3)
        t1 = 1.0 - y - z
        s1, ds1 = _scaled_jacobi(p, 0.0, 0.0, 2.0 * x - t1, 2.0 * e[0] + e[1] + e[2],
                                 t1, -e[1] - e[2])
        t2 = 1.0 - z
        s2 = {}
        s3 = {}
        ones = np.ones_like(z)
        for i in range(p + 1):
            s2[i] = _scaled_jacobi(p - i, 2.0 * i + 1.0, 0.0, 2.0 * y - t2,
                                   2.0 * e[1] + e[2], t2, -e[2])
            for j in range(p - i + 1):
                s3[i + j] = _scaled_jacobi(p - i - j, 2.0 * (i + j) + 2.0, 0.0,
                                           2.0 * z - 1.0, 2.0 * e[2], ones, np.zeros(3))
        vals = np.empty((len(x), self.dim))
        grads = np.empty((len(x), self.dim, 3)) if need_grad else None
        for col, (i, j, k) in enumerate(self.indices):
            f1, g1 = s1[i], ds1[i]
            f2, g2 = s2[i][0][j], s2[i][1][j]
            f3, g3 = s3[i + j][0][k], s3[i + j][1][k]
            vals[:, col] = f1 * f2 * f3
            if need_grad:
                grads[:, col, :] = (g1 * (f2 * f3)[:, None] + g2 * (f1 * f3)[:, None]
                                    + g3 * (f1 * f2)[:, None])
        return vals, grads

    def values(self, points: np.ndarray) -> np.ndarray:
        V, _ = self._raw(points, need_grad=False)
        return V @ self.coefficients

    def gradients(self, points: np.ndarray) -> np.ndarray:
        _, G = self._raw(points)
        return np.einsum("ptd,tb->pbd", G, self.coefficients)


@lru_cache(maxsize=None)
def reference_basis(degree: int) -> ReferenceBasis:
    return ReferenceBasis(degree)
