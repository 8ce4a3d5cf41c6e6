"""Command-line entry point: ``maxwell-ipdg <command> --config <file>``."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from ..assembly import assemble_forms, assemble_rhs, calibrate_eta
from ..estimator import (EffectivityUndefinedError, compute_error_measures, compute_indicators,
                         compute_oscillation, effectivity)
from ..femspace.space import SUPPORTED_K, DGSpace
from ..lifting import LiftingOperator
from ..material import MaterialModel
from ..mesh import MeshError, build_structured_mesh, compute_patches, import_mesh
from ..solver import DiscreteResonanceError, infsup_constant, solve_dg
from .cases import CASES, CaseError, make_case
from .report import export_report
from .study import StudyError, energy_norm_exact, parse_eta_mode, run_convergence

EXIT_OK, EXIT_VALIDATION, EXIT_RESONANCE = 0, 2, 3

CONFIG_HELP = """\
configuration file (JSON object) keys:
  case      manufactured solution: "sine" or "quartic"            (default "sine")
  k         polynomial degree of the discrete field, 1..4          (default 1)
  ell       degree of the lifting/discrete-curl space, k-1 or k    (default k)
  eta       penalty: "auto" (calibrate on the coarsest mesh),
            a number, or "fixed:<value>"                           (default "auto")
  omega     angular frequency, > 0                                 (default 1.0)
  levels    list of structured mesh sizes n for "convergence"     (default [2, 4])
  mesh      {"structured": n} for 6 n^3 Kuhn tetrahedra of the
            unit cube, or {"import": "<path>"} for a tetmesh file  (default {"structured": 2})
  material  {"eps": <scalar>, "nu": <scalar>}, homogeneous         (default 1, 1)
  output    output path prefix; files get .json / .csv suffixes   (default "maxwell-ipdg-out")
  allow_large  true to lift the desk-scale level caps              (default false)
  infsup    true to also compute the inf-sup constant per level   (default false)

exit codes: 0 success, 2 invalid configuration or unreadable input, 3 discrete resonance
"""

KEYS = {"case", "k", "ell", "eta", "omega", "levels", "mesh", "material", "output",
        "allow_large", "infsup"}


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return validate_config(cfg)


def validate_config(cfg) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(cfg) - KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    out = {"case": cfg.get("case", "sine"), "k": cfg.get("k", 1), "eta": cfg.get("eta", "auto"),
           "omega": cfg.get("omega", 1.0), "levels": cfg.get("levels", [2, 4]),
           "mesh": cfg.get("mesh", {"structured": 2}), "material": cfg.get("material", {}),
           "output": cfg.get("output", "maxwell-ipdg-out"),
           "allow_large": bool(cfg.get("allow_large", False)),
           "infsup": bool(cfg.get("infsup", False))}
    if out["case"] not in CASES:
        raise ConfigError(f"case must be one of {sorted(CASES)}")
    k = out["k"]
    if not isinstance(k, int) or isinstance(k, bool) or k not in SUPPORTED_K:
        raise ConfigError(f"k must be one of {SUPPORTED_K}")
    ell = cfg.get("ell", k)
    if not isinstance(ell, int) or isinstance(ell, bool) or ell not in (k - 1, k):
        raise ConfigError("ell must be k-1 or k")
    out["ell"] = ell
    om = out["omega"]
    if not isinstance(om, (int, float)) or isinstance(om, bool) or not (om > 0 and math.isfinite(om)):
        raise ConfigError("omega must be a positive finite number")
    out["omega"] = float(om)
    eta = out["eta"]
    if isinstance(eta, (int, float)) and not isinstance(eta, bool):
        eta = f"fixed:{float(eta)!r}"
    try:
        parse_eta_mode(eta)
    except StudyError as exc:
        raise ConfigError(str(exc)) from None
    out["eta"] = eta
    lv = out["levels"]
    if (not isinstance(lv, list) or not lv
            or not all(isinstance(n, int) and not isinstance(n, bool) and n >= 1 for n in lv)):
        raise ConfigError("levels must be a nonempty list of positive integers")
    mesh = out["mesh"]
    if not isinstance(mesh, dict) or len(mesh) != 1 or not set(mesh) <= {"structured", "import"}:
        raise ConfigError('mesh must be {"structured": n} or {"import": path}')
    if "structured" in mesh:
        n = mesh["structured"]
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise ConfigError("mesh.structured must be a positive integer")
    mat = out["material"]
    if not isinstance(mat, dict) or set(mat) - {"eps", "nu"}:
        raise ConfigError('material must be {"eps": scalar, "nu": scalar}')
    for key in ("eps", "nu"):
        v = mat.get(key, 1.0)
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not (v > 0 and math.isfinite(v)):
            raise ConfigError(f"material.{key} must be a positive scalar")
    out["material"] = {"eps": float(mat.get("eps", 1.0)), "nu": float(mat.get("nu", 1.0))}
    return out


def _setup(cfg):
    case = make_case(cfg["case"], cfg["omega"], **cfg["material"])
    if "structured" in cfg["mesh"]:
        mesh = build_structured_mesh(cfg["mesh"]["structured"])
    else:
        mesh = import_mesh(cfg["mesh"]["import"])
    space = DGSpace(mesh, cfg["k"], cfg["ell"])
    material = MaterialModel(mesh, **cfg["material"])
    lifting = LiftingOperator(space)
    fixed = parse_eta_mode(cfg["eta"])
    info = {}
    if fixed is None:
        cal = calibrate_eta(space, material, lifting)
        fixed = cal.eta_rec
        info = {"eta_min": cal.eta_min, "calibration": cal.method}
    forms = assemble_forms(space, material, cfg["omega"], fixed, lifting)
    return case, space, material, forms, info


def _write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _base(cfg, space, forms, info) -> dict:
    return {"case": cfg["case"], "k": space.k, "ell": space.ell, "omega": cfg["omega"],
            "n_cells": space.mesh.n_cells, "dofs": space.ndofs, "eta_star": forms.eta, **info}


def cmd_solve(cfg) -> dict:
    case, space, material, forms, info = _setup(cfg)
    sol = solve_dg(forms, assemble_rhs(space, case.J))
    me = compute_error_measures(sol.field, case.E, case.curlE, forms)
    out = _base(cfg, space, forms, info)
    out.update(residual=sol.residual, solver=sol.method,
               inertia=list(sol.inertia.as_tuple()) if sol.inertia else None,
               errors=me.as_dict())
    _write_json(f"{cfg['output']}.json", out)
    return out


def cmd_estimate(cfg) -> dict:
    case, space, material, forms, info = _setup(cfg)
    sol = solve_dg(forms, assemble_rhs(space, case.J))
    patches = compute_patches(space.mesh)
    rep = compute_indicators(sol.field, case.J, case.divJ, material, cfg["omega"],
                             forms.lifting, patches)
    rep.osc_K = compute_oscillation(case.J, case.divJ, space, material, cfg["omega"], patches)
    me = compute_error_measures(sol.field, case.E, case.curlE, forms, patches)
    try:
        eff = effectivity(rep, me, scale=energy_norm_exact(case))
    except EffectivityUndefinedError:
        eff = None
    rep.to_csv(f"{cfg['output']}.csv")
    out = _base(cfg, space, forms, info)
    out.update(estimator=rep.summary(), errors=me.as_dict(), effectivity=eff)
    _write_json(f"{cfg['output']}.json", out)
    return out


def cmd_infsup(cfg) -> dict:
    _, space, _, forms, info = _setup(cfg)
    out = _base(cfg, space, forms, info)
    out["sigma"] = infsup_constant(forms)
    _write_json(f"{cfg['output']}.json", out)
    return out


def cmd_calibrate(cfg) -> dict:
    if "structured" in cfg["mesh"]:
        mesh = build_structured_mesh(cfg["mesh"]["structured"])
    else:
        mesh = import_mesh(cfg["mesh"]["import"])
    space = DGSpace(mesh, cfg["k"], cfg["ell"])
    cal = calibrate_eta(space, MaterialModel(mesh, **cfg["material"]))
    out = {"k": space.k, "ell": space.ell, "n_cells": mesh.n_cells, "eta_min": cal.eta_min,
           "eta_rec": cal.eta_rec, "safety": cal.safety, "method": cal.method}
    _write_json(f"{cfg['output']}.json", out)
    return out


def cmd_convergence(cfg) -> dict:
    case = make_case(cfg["case"], cfg["omega"], **cfg["material"])
    report = run_convergence(case, cfg["k"], cfg["ell"], cfg["levels"], cfg["omega"],
                             eta_mode=cfg["eta"], infsup=cfg["infsup"],
                             allow_large=cfg["allow_large"])
    export_report(report, "json", f"{cfg['output']}.json")
    export_report(report, "csv", f"{cfg['output']}.csv")
    return {"levels": [lv.n for lv in report.levels], "rates": report.rates("err_sharp"),
            "exact": report.exact}


COMMANDS = {"solve": cmd_solve, "convergence": cmd_convergence, "estimate": cmd_estimate,
            "infsup": cmd_infsup, "calibrate-eta": cmd_calibrate}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="maxwell-ipdg",
        description="Interior-penalty DG solver for time-harmonic Maxwell on tetrahedra.",
        epilog=CONFIG_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("command", choices=sorted(COMMANDS), help="what to run")
    p.add_argument("--config", required=True, help="path to the JSON configuration file")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        with threadpool_limits(limits=1):
            result = COMMANDS[args.command](cfg)
    except (ConfigError, CaseError, StudyError, MeshError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DiscreteResonanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESONANCE
    print(json.dumps(result, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
