"""Residual a posteriori indicators, error measures and data oscillation.

The averaging-operator constant multiplying the nonconformity indicator and
the jump part of the dagger error measure is fixed to ``C_AV = 1``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .assembly import AssembledForms, face_nu_tilde
from .femspace.space import BrokenField, DGSpace, curl_from_gradient, project_L2
from .lifting import LiftingOperator
from .material import MaterialModel
from .mesh import PatchTable, compute_patches

C_AV = 1.0


class EffectivityUndefinedError(ZeroDivisionError):
    """Raised when the error measure is zero to rounding, e.g. for an exact
    discrete solution."""


@dataclass
class EstimatorReport:
    eta_div_K: np.ndarray
    eta_curl_K: np.ndarray
    eta_nc_K: np.ndarray
    osc_K: Optional[np.ndarray] = None
    curl_mode: str = "discrete"

    @property
    def eta_K(self) -> np.ndarray:
        return np.sqrt(self.eta_div_K**2 + self.eta_curl_K**2 + self.eta_nc_K**2)

    @property
    def eta_div(self) -> float:
        return float(np.sqrt(np.sum(self.eta_div_K**2)))

    @property
    def eta_curl(self) -> float:
        return float(np.sqrt(np.sum(self.eta_curl_K**2)))

    @property
    def eta_nc(self) -> float:
        return float(np.sqrt(np.sum(self.eta_nc_K**2)))

    @property
    def eta(self) -> float:
        return float(np.sqrt(np.sum(self.eta_K**2)))

    @property
    def osc(self) -> Optional[float]:
        if self.osc_K is None:
            return None
        return float(np.sqrt(np.sum(self.osc_K**2)))

    def summary(self) -> dict:
        return {"eta": self.eta, "eta_div": self.eta_div, "eta_curl": self.eta_curl,
                "eta_nc": self.eta_nc, "osc": self.osc, "curl_mode": self.curl_mode,
                "n_cells": int(len(self.eta_div_K))}

    def to_csv(self, path) -> None:
        osc = self.osc_K if self.osc_K is not None else np.full(len(self.eta_div_K), np.nan)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cell", "eta_div", "eta_curl", "eta_nc", "eta", "osc"])
            for i, row in enumerate(zip(self.eta_div_K, self.eta_curl_K, self.eta_nc_K,
                                        self.eta_K, osc)):
                w.writerow([i] + [f"{float(v):.17g}" for v in row])

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump({"schema": "maxwell-ipdg-estimator/1", **self.summary()}, fh,
                      indent=2, sort_keys=True)


@dataclass
class ErrorMeasures:
    omega_l2: float          # omega ||e||_eps
    curl: float              # ||C(e)||_nu
    stab_sq: float           # |e|_s^2 = s_sharp(e, e), may be -0 to rounding
    nc: float                # sqrt(sum_K c_av nu_max k^2 / h_K ||jump_c e||^2_dK)
    l2: float                # ||e||_eps
    extra: dict = field(default_factory=dict)

    @property
    def stab(self) -> float:
        return math.sqrt(max(self.stab_sq, 0.0))

    @property
    def tnorm(self) -> float:
        return math.hypot(self.omega_l2, self.curl)

    @property
    def tnorm_sharp(self) -> float:
        return math.sqrt(self.omega_l2**2 + self.curl**2 + max(self.stab_sq, 0.0))

    @property
    def tnorm_dagger(self) -> float:
        return math.sqrt(self.omega_l2**2 + self.curl**2 + self.nc**2)

    def as_dict(self) -> dict:
        return {"omega_l2": self.omega_l2, "curl": self.curl, "stab_sq": self.stab_sq,
                "nc": self.nc, "l2": self.l2, "tnorm": self.tnorm,
                "tnorm_sharp": self.tnorm_sharp, "tnorm_dagger": self.tnorm_dagger}


# -- face helpers ---------------------------------------------------------------

def _face_to_cells(mesh, per_face, include_boundary):
    """Accumulate per-face quantities onto the adjacent cells."""
    out = np.zeros(mesh.n_cells)
    fc = mesh.face_cells
    mask = np.ones(mesh.n_faces, bool) if include_boundary else mesh.interior
    np.add.at(out, fc[mask, 0], per_face[mask])
    inter = mesh.interior
    np.add.at(out, fc[inter, 1], per_face[inter])
    return out


def _face_norm_sq(fq, values):
    return np.einsum("fq,fqc,fqc->f", fq.weights, values, values)


def tangential_jump_sq(E_h: BrokenField) -> np.ndarray:
    """Per-face ||jump_c E_h||_F^2 (boundary faces: left trace x n)."""
    mesh = E_h.space.mesh
    fq = E_h.space.face_quadrature()
    tr = E_h.at_face_quadrature(fq)
    jump = tr[0] - tr[1]
    jc = np.cross(jump, mesh.face_normals[:, None, :])
    return _face_norm_sq(fq, jc)


def nonconformity_terms(E_h: BrokenField, material: MaterialModel,
                        patches: PatchTable) -> np.ndarray:
    """Per-cell c_av nu_max(edge patch) k^2 / h_K ||jump_c E_h||^2 over all of dK."""
    space = E_h.space
    mesh = space.mesh
    nu_max = material.patch_extremum(patches, "edge", "nu_max")
    jsq = _face_to_cells(mesh, tangential_jump_sq(E_h), include_boundary=True)
    return C_AV * nu_max * space.k**2 / mesh.cell_diameters * jsq


def compute_indicators(E_h: BrokenField, J, divJ, material: MaterialModel, omega: float,
                       lifting: LiftingOperator | None = None,
                       patches: PatchTable | None = None,
                       curl_mode: str = "discrete",
                       quad_degree: int | None = None) -> EstimatorReport:
    """Divergence, curl and nonconformity indicators of a discrete field.

    ``curl_mode`` selects the discrete curl C(E_h) ("discrete") or the broken
    curl ("broken") inside the curl residual.
    """
    if divJ is None:
        raise ValueError("the divergence of J is required for the divergence indicator")
    space = E_h.space
    mesh = space.mesh
    k = space.k
    lifting = lifting or LiftingOperator(space)
    patches = patches or compute_patches(mesh)
    if curl_mode == "discrete":
        Ch = lifting.discrete_curl(E_h)
    elif curl_mode == "broken":
        Ch = lifting.broken_curl(E_h)
    else:
        raise ValueError(f"unknown curl_mode {curl_mode!r}")

    eps, nu = material.eps, material.nu
    h = mesh.cell_diameters
    w2 = omega**2

    quad = space.cell_quadrature(space.boosted_degree() if quad_degree is None else quad_degree)
    Ev = E_h.at_cell_quadrature(quad)
    dE = E_h.jacobian_at_cell_quadrature(quad)
    div_epsE = np.einsum("ncd,nqdc->nq", eps, dE)
    r_div = np.asarray(divJ(quad.points)) + w2 * div_epsE
    dC = Ch.jacobian_at_cell_quadrature(quad)
    curl_nuC = curl_from_gradient(np.einsum("ncd,nqdb->nqcb", nu, dC))
    Jv = np.asarray(J(quad.points))
    r_curl = Jv + w2 * np.einsum("ncd,nqd->nqc", eps, Ev) - curl_nuC
    vol_div = np.einsum("nq,nq,nq->n", quad.weights, r_div, r_div)
    vol_curl = np.einsum("nq,nqc,nqc->n", quad.weights, r_curl, r_curl)

    fq = space.face_quadrature()
    n_F = mesh.face_normals[:, None, :]
    fc = mesh.face_cells
    right = np.maximum(fc[:, 1], 0)
    inter = mesh.interior[:, None, None]
    trE = E_h.at_face_quadrature(fq)
    epsE_l = np.einsum("fcd,fqd->fqc", eps[fc[:, 0]], trE[0])
    epsE_r = np.einsum("fcd,fqd->fqc", eps[right], trE[1])
    jd = np.where(inter[..., 0], np.sum((epsE_l - epsE_r) * n_F, axis=-1), 0.0)
    face_div = np.einsum("fq,fq,fq->f", fq.weights, jd, jd)
    trC = Ch.at_face_quadrature(fq)
    nuC_l = np.einsum("fcd,fqd->fqc", nu[fc[:, 0]], trC[0])
    nuC_r = np.einsum("fcd,fqd->fqc", nu[right], trC[1])
    jc = np.where(inter, np.cross(nuC_l - nuC_r, n_F), 0.0)
    face_curl = _face_norm_sq(fq, jc)

    eps_min3 = material.patch_extremum(patches, "vertex3", "eps_min")
    nu_min3 = material.patch_extremum(patches, "vertex3", "nu_min")
    fdiv = _face_to_cells(mesh, face_div, include_boundary=False)
    fcurl = _face_to_cells(mesh, face_curl, include_boundary=False)

    eta_div_sq = (h**2 / (w2 * k**2) * vol_div + w2 * h / k * fdiv) / eps_min3
    eta_curl_sq = (h**2 / k**2 * vol_curl + h / k * fcurl) / nu_min3
    eta_nc_sq = nonconformity_terms(E_h, material, patches)
    return EstimatorReport(np.sqrt(eta_div_sq), np.sqrt(eta_curl_sq), np.sqrt(eta_nc_sq),
                           curl_mode=curl_mode)


def stabilization_seminorm_sq(v: BrokenField, forms: AssembledForms) -> float:
    """eta s_h(v, v) - ||L v||_nu^2 from squared jumps and the lifted field.

    Same value as the matrix quadratic forms, but without their rounding
    floor of about 1e-16 ||S|| ||v||^2 when v is nearly conforming.
    """
    space = v.space
    mesh = space.mesh
    wF = face_nu_tilde(space, forms.material) / mesh.face_diameters
    sh = float(np.sum(wF * tangential_jump_sq(v)))
    Lv = forms.lifting.L @ v.coeffs
    return forms.eta * sh - float(Lv @ (forms.N_nu @ Lv))


def compute_error_measures(E_h: BrokenField, E, curlE, forms: AssembledForms,
                           patches: PatchTable | None = None,
                           quad_degree: int | None = None) -> ErrorMeasures:
    """Error measures of e = E - E_h for a conforming exact field E in H_0(curl).

    C(e) = curl E - C(E_h) and jump_c(e) = -jump_c(E_h).
    """
    space = E_h.space
    material = forms.material
    patches = patches or compute_patches(space.mesh)
    quad = space.cell_quadrature(space.boosted_degree() if quad_degree is None else quad_degree)
    e = np.asarray(E(quad.points)) - E_h.at_cell_quadrature(quad)
    l2_sq = np.einsum("nq,nqc,ncd,nqd->", quad.weights, e, material.eps, e)
    Ch = forms.lifting.discrete_curl(E_h)
    ce = np.asarray(curlE(quad.points)) - Ch.at_cell_quadrature(quad)
    curl_sq = np.einsum("nq,nqc,ncd,nqd->", quad.weights, ce, material.nu, ce)
    stab_sq = stabilization_seminorm_sq(E_h, forms)
    nc_sq = float(np.sum(nonconformity_terms(E_h, material, patches)))
    return ErrorMeasures(omega_l2=forms.omega * math.sqrt(l2_sq), curl=math.sqrt(curl_sq),
                         stab_sq=stab_sq, nc=math.sqrt(nc_sq), l2=math.sqrt(l2_sq))


def discrete_measures(v: BrokenField, forms: AssembledForms) -> ErrorMeasures:
    """Measures of a discrete field from the assembled quadratic forms."""
    x = v.coeffs
    l2_sq = float(x @ (forms.M_eps @ x))
    curl_sq = float(x @ (forms.A_C @ x))
    stab_sq = float(forms.eta * (x @ (forms.S_h @ x)) - x @ (forms.S_lift @ x))
    return ErrorMeasures(omega_l2=forms.omega * math.sqrt(max(l2_sq, 0.0)),
                         curl=math.sqrt(max(curl_sq, 0.0)), stab_sq=stab_sq, nc=float("nan"),
                         l2=math.sqrt(max(l2_sq, 0.0)))


def compute_oscillation(J, divJ, space: DGSpace, material: MaterialModel, omega: float,
                        patches: PatchTable | None = None,
                        quad_degree: int | None = None) -> np.ndarray:
    """Per-cell oscillation over the face patch, with the minimising J_h replaced
    by the componentwise L2 projection of J onto P_k^b."""
    mesh = space.mesh
    k = space.k
    patches = patches or compute_patches(mesh)
    deg = space.boosted_degree() if quad_degree is None else quad_degree
    Jh = project_L2(J, space, quad_degree=deg)
    quad = space.cell_quadrature(deg)
    dJ = np.asarray(J(quad.points)) - Jh.at_cell_quadrature(quad)
    ddiv = np.asarray(divJ(quad.points)) - np.einsum(
        "nqcc->nq", Jh.jacobian_at_cell_quadrature(quad))
    a = np.einsum("nq,nqc,nqc->n", quad.weights, dJ, dJ)
    d = np.einsum("nq,nq,nq->n", quad.weights, ddiv, ddiv)
    h2 = mesh.cell_diameters**2
    P = patches.face.astype(float)
    eps_min = material.patch_extremum(patches, "face", "eps_min")
    eps_max = material.patch_extremum(patches, "face", "eps_max")
    nu_min = material.patch_extremum(patches, "face", "nu_min")
    c2 = nu_min / eps_max
    osc_sq = (omega**2 / (k**2 * c2) * (P @ (h2 * a)) + (P @ (h2 * d)) / k**2) / (
        omega**2 * eps_min)
    return np.sqrt(osc_sq)


def weak_consistency_delta(v_h: BrokenField, curl_nu_curl_psi, curl_psi,
                           material: MaterialModel, lifting: LiftingOperator | None = None,
                           quad_degree: int | None = None) -> float:
    """(v_h, curl(nu curl Psi)) - (C(v_h), curl Psi)_nu by quadrature."""
    space = v_h.space
    lifting = lifting or LiftingOperator(space)
    quad = space.cell_quadrature(space.boosted_degree() if quad_degree is None else quad_degree)
    v = v_h.at_cell_quadrature(quad)
    Cv = lifting.discrete_curl(v_h).at_cell_quadrature(quad)
    a = np.einsum("nq,nqc,nqc->", quad.weights, v, np.asarray(curl_nu_curl_psi(quad.points)))
    b = np.einsum("nq,nqc,ncd,nqd->", quad.weights, Cv, material.nu,
                  np.asarray(curl_psi(quad.points)))
    return float(a - b)


def effectivity(report: EstimatorReport, measures: ErrorMeasures, scale: float = 1.0,
                guard: float = 1e-12) -> float:
    """eta / |||e|||_dagger, guarded against a vanishing error.

    The guard sits above the ~1e-13 relative rounding floor of a factorized
    solve, so an exact discrete solution is reported as undefined.
    """
    err = measures.tnorm_dagger
    if err <= guard * scale:
        raise EffectivityUndefinedError(
            f"error measure {err:.3e} is below {guard:g} x scale; effectivity undefined")
    return report.eta / err
