"""Manufactured solutions on the unit cube with PEC boundary conditions.

Both cases accept homogeneous isotropic scalars ``eps`` and ``nu`` (default 1).
All callables map points of shape (..., 3) to arrays of shape (..., 3),
except ``divJ`` which returns shape (...,).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss

PI = np.pi


class CaseError(ValueError):
    pass


@dataclass(frozen=True)
class ManufacturedCase:
    name: str
    omega: float
    eps: float
    nu: float
    E: Callable
    curlE: Callable
    curl_nu_curlE: Callable
    divJ: Callable
    conforming: bool = True
    polynomial_degree: Optional[int] = None

    def J(self, x):
        return -self.omega**2 * self.eps * self.E(x) + self.curl_nu_curlE(x)


def case_sine(omega: float, eps: float = 1.0, nu: float = 1.0) -> ManufacturedCase:
    """E = (sin(pi y) sin(pi z), sin(pi z) sin(pi x), sin(pi x) sin(pi y)).

    curl curl E = 2 pi^2 E, so J = (2 pi^2 nu - omega^2 eps) E.
    """
    if abs(omega**2 * eps - 2 * PI**2 * nu) <= 0.01 * 2 * PI**2 * nu:
        raise CaseError(f"omega={omega} is within 1% of the resonance omega^2 eps = 2 pi^2 nu")

    def E(x):
        s = np.sin(PI * np.asarray(x))
        return np.stack([s[..., 1] * s[..., 2], s[..., 2] * s[..., 0], s[..., 0] * s[..., 1]],
                        axis=-1)

    def curlE(x):
        x = np.asarray(x)
        s, c = np.sin(PI * x), np.cos(PI * x)
        return PI * np.stack([s[..., 0] * (c[..., 1] - c[..., 2]),
                              s[..., 1] * (c[..., 2] - c[..., 0]),
                              s[..., 2] * (c[..., 0] - c[..., 1])], axis=-1)

    def curl_nu_curlE(x):
        return 2 * PI**2 * nu * E(x)

    def divJ(x):
        return np.zeros(np.asarray(x).shape[:-1])

    return ManufacturedCase("sine", float(omega), float(eps), float(nu), E, curlE,
                            curl_nu_curlE, divJ, conforming=True, polynomial_degree=None)


def case_quartic(omega: float, eps: float = 1.0, nu: float = 1.0) -> ManufacturedCase:
    """E = (y(1-y) z(1-z), 0, 0), a degree-4 member of H_0(curl)."""

    def E(x):
        x = np.asarray(x)
        y, z = x[..., 1], x[..., 2]
        out = np.zeros_like(x, dtype=float)
        out[..., 0] = y * (1 - y) * z * (1 - z)
        return out

    def curlE(x):
        x = np.asarray(x)
        y, z = x[..., 1], x[..., 2]
        out = np.zeros_like(x, dtype=float)
        out[..., 1] = y * (1 - y) * (1 - 2 * z)
        out[..., 2] = -(1 - 2 * y) * z * (1 - z)
        return out

    def curl_nu_curlE(x):
        x = np.asarray(x)
        y, z = x[..., 1], x[..., 2]
        out = np.zeros_like(x, dtype=float)
        out[..., 0] = nu * (2 * y * (1 - y) + 2 * z * (1 - z))
        return out

    def divJ(x):
        return np.zeros(np.asarray(x).shape[:-1])

    return ManufacturedCase("quartic", float(omega), float(eps), float(nu), E, curlE,
                            curl_nu_curlE, divJ, conforming=True, polynomial_degree=4)


CASES = {"sine": case_sine, "quartic": case_quartic}


def make_case(name: str, omega: float, eps: float = 1.0, nu: float = 1.0) -> ManufacturedCase:
    try:
        return CASES[name](omega, eps=eps, nu=nu)
    except KeyError:
        raise CaseError(f"unknown case {name!r}; choose from {sorted(CASES)}") from None


# -- self checks --------------------------------------------------------------

def _cube_rule(m):
    g, w = leggauss(m)
    g, w = 0.5 * (g + 1), 0.5 * w
    X = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
    W = (w[:, None, None] * w[None, :, None] * w[None, None, :]).ravel()
    return X, W


def _square_rule(m):
    g, w = leggauss(m)
    g, w = 0.5 * (g + 1), 0.5 * w
    U, V = np.meshgrid(g, g, indexing="ij")
    return U.ravel(), V.ravel(), (w[:, None] * w[None, :]).ravel()


def boundary_trace_norm(case: ManufacturedCase, m: int = 12) -> float:
    """sqrt(sum over cube faces of int |E x n|^2)."""
    u, v, w = _square_rule(m)
    total = 0.0
    for axis in range(3):
        others = [a for a in range(3) if a != axis]
        for val in (0.0, 1.0):
            x = np.zeros((len(u), 3))
            x[:, axis] = val
            x[:, others[0]], x[:, others[1]] = u, v
            n = np.zeros(3)
            n[axis] = 1.0 if val else -1.0
            t = np.cross(case.E(x), n)
            total += float(np.sum(w * np.sum(t * t, axis=1)))
    return float(np.sqrt(total))


def _random_test_field(rng):
    """Bubble times a random affine vector field, with its curl."""
    A = rng.standard_normal((3, 3))
    c = rng.standard_normal(3)
    curlp = np.array([A[2, 1] - A[1, 2], A[0, 2] - A[2, 0], A[1, 0] - A[0, 1]])

    def w(x):
        b = np.prod(x * (1 - x), axis=-1)
        return b[..., None] * (x @ A.T + c)

    def curlw(x):
        f = x * (1 - x)
        df = 1 - 2 * x
        b = np.prod(f, axis=-1)
        gb = np.stack([df[..., 0] * f[..., 1] * f[..., 2],
                       f[..., 0] * df[..., 1] * f[..., 2],
                       f[..., 0] * f[..., 1] * df[..., 2]], axis=-1)
        return np.cross(gb, x @ A.T + c) + b[..., None] * curlp

    return w, curlw


def weak_form_defect(case: ManufacturedCase, ntests: int = 10, seed: int = 0, m: int = 14) -> float:
    """Largest relative defect of (J, w) = -omega^2 (eps E, w) + (nu curl E, curl w)
    over random conforming polynomial test fields."""
    rng = np.random.default_rng(seed)
    X, W = _cube_rule(m)
    J, E, cE = case.J(X), case.E(X), case.curlE(X)
    worst = 0.0
    for _ in range(ntests):
        w, cw = _random_test_field(rng)
        wv, cwv = w(X), cw(X)
        lhs = np.sum(W * np.sum(J * wv, axis=1))
        rhs = (-case.omega**2 * case.eps * np.sum(W * np.sum(E * wv, axis=1))
               + case.nu * np.sum(W * np.sum(cE * cwv, axis=1)))
        scale = (abs(case.omega**2 * case.eps * np.sum(W * np.sum(E * wv, axis=1)))
                 + abs(case.nu * np.sum(W * np.sum(cE * cwv, axis=1))) + abs(lhs))
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst


def check_case(case: ManufacturedCase, tol_trace: float = 1e-12, tol_weak: float = 1e-10) -> None:
    """Raise CaseError unless E x n vanishes on the cube boundary and J is
    consistent with E in the weak sense."""
    tr = boundary_trace_norm(case)
    if tr > tol_trace:
        raise CaseError(f"case {case.name}: tangential boundary trace {tr:.3e} exceeds {tol_trace}")
    d = weak_form_defect(case)
    if d > tol_weak:
        raise CaseError(f"case {case.name}: weak-form defect {d:.3e} exceeds {tol_weak}")
