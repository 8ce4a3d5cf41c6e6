"""Piecewise-constant anisotropic material coefficients."""
from __future__ import annotations

import numpy as np

from .mesh import Mesh, PatchTable


class MaterialError(ValueError):
    pass


def _as_tensors(value, nc):
    a = np.asarray(value, dtype=float)
    if a.ndim == 0:
        return np.broadcast_to(a * np.eye(3), (nc, 3, 3)).copy()
    if a.shape == (3, 3):
        return np.broadcast_to(a, (nc, 3, 3)).copy()
    if a.shape == (nc,):
        return a[:, None, None] * np.eye(3)[None]
    if a.shape == (nc, 3, 3):
        return a.copy()
    raise MaterialError(f"cannot interpret material value of shape {a.shape}")


class MaterialModel:
    """Per-cell SPD permittivity ``eps`` and inverse permeability ``nu``.

    Scalars, a single 3x3 tensor, per-cell scalars or per-cell tensors are
    accepted for either coefficient.
    """

    def __init__(self, mesh: Mesh, eps=1.0, nu=1.0):
        nc = mesh.n_cells
        self.mesh = mesh
        self.eps = _as_tensors(eps, nc)
        self.nu = _as_tensors(nu, nc)
        for name, T in (("eps", self.eps), ("nu", self.nu)):
            if not np.allclose(T, np.swapaxes(T, 1, 2), rtol=1e-13, atol=0.0):
                raise MaterialError(f"{name} is not symmetric")
            try:
                np.linalg.cholesky(T)
            except np.linalg.LinAlgError as exc:
                raise MaterialError(f"{name} is not positive definite") from exc
        ev_eps = np.linalg.eigvalsh(self.eps)
        ev_nu = np.linalg.eigvalsh(self.nu)
        self.eps_min, self.eps_max = ev_eps[:, 0], ev_eps[:, -1]
        self.nu_min, self.nu_max = ev_nu[:, 0], ev_nu[:, -1]

    @property
    def nu_tilde(self) -> np.ndarray:
        """Smallest eigenvalue of nu per cell."""
        return self.nu_min

    def is_isotropic_constant(self) -> bool:
        return (np.allclose(self.eps, self.eps[0, 0, 0] * np.eye(3), rtol=0, atol=0)
                and np.allclose(self.nu, self.nu[0, 0, 0] * np.eye(3), rtol=0, atol=0))

    def extrema(self, cells) -> dict:
        cells = np.asarray(cells)
        return {
            "eps_min": float(self.eps_min[cells].min()),
            "eps_max": float(self.eps_max[cells].max()),
            "nu_min": float(self.nu_min[cells].min()),
            "nu_max": float(self.nu_max[cells].max()),
        }

    def wavespeed(self, cells) -> float:
        e = self.extrema(cells)
        return float(np.sqrt(e["nu_min"] / e["eps_max"]))

    def patch_extremum(self, patches: PatchTable, kind: str, quantity: str) -> np.ndarray:
        """Per-cell extremum of ``quantity`` (e.g. ``"eps_min"``) over a patch."""
        values = getattr(self, quantity)
        op = "min" if quantity.endswith("_min") else "max"
        return patches.reduce(kind, values, op)
