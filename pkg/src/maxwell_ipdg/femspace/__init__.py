from .basis import BasisError, ReferenceBasis, reference_basis, scalar_dim
from .quadrature import QuadratureError, QuadratureRule, quadrature
from .space import (SUPPORTED_K, BrokenField, DGSpace, SpaceError, evaluate, evaluate_curl,
                    project_L2)

__all__ = ["BasisError", "ReferenceBasis", "reference_basis", "scalar_dim", "QuadratureError",
           "QuadratureRule", "quadrature", "SUPPORTED_K", "BrokenField", "DGSpace",
           "SpaceError", "evaluate", "evaluate_curl", "project_L2"]
