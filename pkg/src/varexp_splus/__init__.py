"""varexp-splus - variable-exponent Lebesgue/Sobolev machinery and S+ probes.

Luxemburg norms on P1 meshes, Carathéodory kernels with p(z)-growth,
a damped-Newton Galerkin solver and numerical probes of the S+ property,
built with NumPy + SciPy.
"""

__version__ = "0.1.0"

from .errors import VarExpError
from .exponent_field import Domain, ExponentField
from .fem_mesh import Mesh, MeshedFunction, QuadratureRule
from .galerkin import GalerkinProblem, convergence_study, solve_level
from .modular_space import luxemburg_norm, modular, sobolev_norm
from .operator_kernel import build_kernel
from .splus_lab import SequenceSpec, run_probe

__all__ = [
    "VarExpError",
    "Domain",
    "ExponentField",
    "Mesh",
    "MeshedFunction",
    "QuadratureRule",
    "GalerkinProblem",
    "convergence_study",
    "solve_level",
    "luxemburg_norm",
    "modular",
    "sobolev_norm",
    "build_kernel",
    "SequenceSpec",
    "run_probe",
]
