"""Interior-penalty discontinuous Galerkin for time-harmonic Maxwell on tetrahedra."""
from .assembly import AssembledForms, EtaCalibration, assemble_bh, assemble_forms, assemble_rhs, calibrate_eta
from .estimator import (EffectivityUndefinedError, ErrorMeasures, EstimatorReport,
                        compute_error_measures, compute_indicators, compute_oscillation,
                        effectivity, weak_consistency_delta)
from .femspace import BrokenField, DGSpace, project_L2
from .lifting import LiftingOperator, apply_lifting, build_lifting, discrete_curl
from .material import MaterialError, MaterialModel
from .mesh import Mesh, MeshError, PatchTable, build_structured_mesh, compute_patches, import_mesh
from .solver import (DiscreteResonanceError, Inertia, LDLFactorization, NotPositiveDefiniteError,
                     best_approximation, infsup_constant, solve_dg)

__version__ = "0.1.0"
