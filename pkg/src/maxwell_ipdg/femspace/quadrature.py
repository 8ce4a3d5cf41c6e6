"""Collapsed-coordinate (Stroud conical product) quadrature on the reference
tetrahedron and triangle.

Reference tetrahedron: vertices (0,0,0), (1,0,0), (0,1,0), (0,0,1); volume 1/6.
Reference triangle: vertices (0,0), (1,0), (0,1); area 1/2.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

MAX_EXACTNESS = 30


class QuadratureError(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureRule:
    """Points are reference coordinates, shape (nq, dim); weights sum to the
    reference measure."""

    points: np.ndarray
    weights: np.ndarray
    degree: int
    domain: str

    @property
    def npoints(self) -> int:
        return len(self.weights)


def _gauss_jacobi_01(m: int, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    # nodes/weights on [0, 1] for the weight (1 - u)**alpha
    x, w = roots_jacobi(m, alpha, 0.0)
    u = 0.5 * (1.0 + x)
    return u, w / 2.0 ** (alpha + 1.0)


@lru_cache(maxsize=None)
def _tet_rule(degree: int) -> QuadratureRule:
    m = max(1, (degree + 2) // 2)
    u, wu = _gauss_jacobi_01(m, 2.0)
    v, wv = _gauss_jacobi_01(m, 1.0)
    w, ww = _gauss_jacobi_01(m, 0.0)
    U, V, W = np.meshgrid(u, v, w, indexing="ij")
    WT = wu[:, None, None] * wv[None, :, None] * ww[None, None, :]
    x = U
    y = V * (1.0 - U)
    z = W * (1.0 - U) * (1.0 - V)
    pts = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)
    wts = WT.ravel()
    pts.flags.writeable = False
    wts.flags.writeable = False
    return QuadratureRule(pts, wts, degree, "tet")


@lru_cache(maxsize=None)
def _tri_rule(degree: int) -> QuadratureRule:
    m = max(1, (degree + 2) // 2)
    u, wu = _gauss_jacobi_01(m, 1.0)
    v, wv = _gauss_jacobi_01(m, 0.0)
    U, V = np.meshgrid(u, v, indexing="ij")
    pts = np.stack([U.ravel(), (V * (1.0 - U)).ravel()], axis=1)
    wts = (wu[:, None] * wv[None, :]).ravel()
    pts.flags.writeable = False
    wts.flags.writeable = False
    return QuadratureRule(pts, wts, degree, "triangle")


def quadrature(domain: str, degree: int) -> QuadratureRule:
    """Return a rule on ``domain`` ("tet" or "triangle") exact for all
    polynomials of total degree <= ``degree``."""
    if not 0 <= degree <= MAX_EXACTNESS:
        raise QuadratureError(f"unsupported exactness degree {degree}")
    if domain == "tet":
        return _tet_rule(int(degree))
    if domain in ("triangle", "tri"):
        return _tri_rule(int(degree))
    raise QuadratureError(f"unknown quadrature domain {domain!r}")
