import numpy as np
import pytest

from maxwell_ipdg.assembly import assemble_forms, calibrate_eta
from maxwell_ipdg.femspace.space import DGSpace
from maxwell_ipdg.material import MaterialModel
from maxwell_ipdg.mesh import build_structured_mesh

ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])


def varying_nu(mesh):
    """Piecewise-constant isotropic nu in [1, 3] varying per cell."""
    return 1.0 + 2.0 * ((np.arange(mesh.n_cells) * 7) % 11) / 10.0


_FORMS = {}


def forms_for(n, k, ell=None, omega=1.0):
    """Cached calibrated forms for eps = nu = 1 on the structured mesh."""
    key = (n, k, ell)
    if key not in _FORMS:
        mesh = build_structured_mesh(n)
        space = DGSpace(mesh, k, ell)
        mat = MaterialModel(mesh)
        cal = calibrate_eta(space, mat)
        _FORMS[key] = assemble_forms(space, mat, omega, cal.eta_rec)
    return _FORMS[key].with_params(omega=omega)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
