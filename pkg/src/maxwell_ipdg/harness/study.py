"""Convergence and effectivity studies on structured meshes of the unit cube."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from ..assembly import assemble_forms, assemble_rhs, calibrate_eta
from ..estimator import (EffectivityUndefinedError, compute_error_measures, compute_indicators,
                         compute_oscillation, effectivity)
from ..femspace.space import DGSpace
from ..lifting import LiftingOperator
from ..material import MaterialModel
from ..mesh import build_structured_mesh, compute_patches
from ..solver import (DiscreteResonanceError, NotPositiveDefiniteError, best_approximation,
                      infsup_constant, solve_dg)
from .cases import ManufacturedCase, _cube_rule, check_case

log = logging.getLogger(__name__)

# largest structured n allowed per polynomial degree without the override flag
DESK_CAPS = {1: 8, 2: 4, 3: 2, 4: 2}
EXACT_TOL = 1e-8


class StudyError(ValueError):
    pass


@dataclass
class LevelResult:
    n: int
    h: float
    dofs: int
    eta_star: float
    err_energy: float          # |||e|||
    err_sharp: float           # |||e|||_sharp
    err_dagger: float          # |||e|||_dagger
    err_l2: float              # ||e||_eps
    stab_sq: float
    eta: float
    eta_div: float
    eta_curl: float
    eta_nc: float
    eta_curl_broken: float
    osc: float
    effectivity: Optional[float]
    best_ratio: Optional[float]
    sigma: Optional[float]
    residual: float
    inertia: Optional[list]
    solver: str


@dataclass
class ConvergenceReport:
    case: str
    k: int
    ell: int
    omega: float
    eta_mode: str
    eta_star: float
    eta_min: Optional[float]
    levels: list = field(default_factory=list)
    exact: bool = False

    def rates(self, key: str) -> list:
        """log2(coarse / fine) between consecutive levels, assuming h halves."""
        out = []
        for a, b in zip(self.levels, self.levels[1:]):
            ea, eb = getattr(a, key), getattr(b, key)
            ratio = math.log2(b.n / a.n)
            if ea is None or eb is None or ea <= 0 or eb <= 0 or ratio == 0:
                out.append(None)
            else:
                out.append(math.log(ea / eb) / math.log(2) / ratio)
        return out

    @property
    def rate_keys(self):
        return ("err_sharp", "err_energy", "err_dagger", "err_l2", "eta", "osc")

    def as_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "levels"}
        d["levels"] = [asdict(lv) for lv in self.levels]
        d["rates"] = {k: self.rates(k) for k in self.rate_keys}
        return d


def parse_eta_mode(mode: str) -> Optional[float]:
    """None for "auto", the value for "fixed:<value>"."""
    if mode == "auto":
        return None
    if isinstance(mode, str) and mode.startswith("fixed:"):
        try:
            v = float(mode.split(":", 1)[1])
        except ValueError:
            raise StudyError(f"bad eta mode {mode!r}") from None
        if not (v >= 0 and math.isfinite(v)):
            raise StudyError(f"eta must be finite and nonnegative, got {v}")
        return v
    raise StudyError(f"eta mode must be 'auto' or 'fixed:<value>', got {mode!r}")


def check_caps(k: int, levels: Sequence[int], allow_large: bool = False) -> None:
    if allow_large:
        return
    cap = DESK_CAPS.get(k)
    if cap is not None and max(levels) > cap:
        raise StudyError(f"level n={max(levels)} exceeds the desk-scale cap n<={cap} for k={k}; "
                         f"pass the override to run anyway")


def run_convergence(case: ManufacturedCase, k: int, ell: int | None, levels: Sequence[int],
                    omega: float | None = None, eta_mode: str = "auto",
                    infsup: bool = False, allow_large: bool = False,
                    single_thread: bool = True) -> ConvergenceReport:
    """mesh -> eta (coarsest level) -> assemble -> solve -> measures -> indicators, per level.

    Runs with BLAS limited to one thread by default so reports are
    byte-reproducible regardless of the machine's thread count.
    """
    levels = [int(n) for n in levels]
    if not levels:
        raise StudyError("at least one level is required")
    if any(b < a for a, b in zip(levels, levels[1:])) or min(levels) < 1:
        raise StudyError(f"levels must be positive and nondecreasing, got {levels}")
    ell = k if ell is None else int(ell)
    omega = case.omega if omega is None else float(omega)
    if omega != case.omega:
        raise StudyError("omega differs from the case's omega; rebuild the case")
    fixed = parse_eta_mode(eta_mode)
    check_caps(k, levels, allow_large)
    check_case(case)
    if single_thread:
        with threadpool_limits(limits=1):
            return _run(case, k, ell, levels, omega, eta_mode, fixed, infsup)
    return _run(case, k, ell, levels, omega, eta_mode, fixed, infsup)


def _run(case, k, ell, levels, omega, eta_mode, fixed, infsup):
    eta_star, eta_min = fixed, None
    report = None
    for n in levels:
        mesh = build_structured_mesh(n)
        space = DGSpace(mesh, k, ell)
        material = MaterialModel(mesh, eps=case.eps, nu=case.nu)
        lifting = LiftingOperator(space)
        patches = compute_patches(mesh)
        if eta_star is None:
            cal = calibrate_eta(space, material, lifting)
            eta_star, eta_min = cal.eta_rec, cal.eta_min
            log.info("calibrated eta_min=%.6g on n=%d", eta_min, n)
        if report is None:
            report = ConvergenceReport(case.name, k, ell, omega, eta_mode, eta_star, eta_min)
        forms = assemble_forms(space, material, omega, eta_star, lifting)
        try:
            sol = solve_dg(forms, assemble_rhs(space, case.J))
        except DiscreteResonanceError as exc:
            raise DiscreteResonanceError(f"level n={n}: {exc}", exc.min_pivot, exc.max_pivot,
                                         exc.index) from exc
        me = compute_error_measures(sol.field, case.E, case.curlE, forms, patches)
        rep = compute_indicators(sol.field, case.J, case.divJ, material, omega, lifting, patches)
        rep_b = compute_indicators(sol.field, case.J, case.divJ, material, omega, lifting,
                                   patches, curl_mode="broken")
        osc = compute_oscillation(case.J, case.divJ, space, material, omega, patches)
        rep.osc_K = osc
        scale = energy_norm_exact(case)
        try:
            eff = effectivity(rep, me, scale=scale)
        except EffectivityUndefinedError:
            eff = None
        best_ratio = None
        if fixed is None or fixed > 0:
            try:
                best = best_approximation(forms, case.E, case.curlE)
                mb = compute_error_measures(best, case.E, case.curlE, forms, patches)
                if mb.tnorm_sharp > 1e-14 * scale:
                    best_ratio = me.tnorm_sharp / mb.tnorm_sharp
            except NotPositiveDefiniteError as exc:  # under-penalised eta
                log.warning("best approximation unavailable on n=%d: %s", n, exc)
        sigma = infsup_constant(forms) if infsup else None
        report.levels.append(LevelResult(
            n=n, h=float(mesh.cell_diameters.max()), dofs=space.ndofs, eta_star=eta_star,
            err_energy=me.tnorm, err_sharp=me.tnorm_sharp, err_dagger=me.tnorm_dagger,
            err_l2=me.l2, stab_sq=me.stab_sq, eta=rep.eta, eta_div=rep.eta_div,
            eta_curl=rep.eta_curl, eta_nc=rep.eta_nc, eta_curl_broken=rep_b.eta_curl,
            osc=float(rep.osc), effectivity=eff, best_ratio=best_ratio, sigma=sigma,
            residual=sol.residual,
            inertia=list(sol.inertia.as_tuple()) if sol.inertia else None, solver=sol.method))
    report.exact = all(lv.err_sharp <= EXACT_TOL * energy_norm_exact(case)
                       for lv in report.levels)
    return report


def energy_norm_exact(case: ManufacturedCase, m: int = 12) -> float:
    """|||E||| on the unit cube by tensor Gauss quadrature."""
    X, W = _cube_rule(m)
    E, cE = case.E(X), case.curlE(X)
    val = case.omega**2 * case.eps * np.sum(W * np.sum(E * E, axis=1)) + case.nu * np.sum(
        W * np.sum(cE * cE, axis=1))
    return float(np.sqrt(val))
