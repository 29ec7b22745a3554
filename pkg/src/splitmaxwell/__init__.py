"""Structure-preserving macroscopic Maxwell solver on a discrete double de Rham complex."""

from .constitutive import ConstitutiveError, Medium, ModelSpec, SolverDivergence
from .dynamics import FunctionalGradient, MaxwellSystem, SimState, bracket, jacobi_check
from .exterior3 import FormK, Metric3
from .grid_complex import Cochain, DeRhamComplex, GridSpec, build_complex, pairing
from .metric_ops import HodgeOperator, MaterialMetric, MetricOps, build_hodge

__all__ = [
    "Cochain",
    "ConstitutiveError",
    "DeRhamComplex",
    "FormK",
    "FunctionalGradient",
    "GridSpec",
    "HodgeOperator",
    "MaterialMetric",
    "MaxwellSystem",
    "Medium",
    "Metric3",
    "MetricOps",
    "ModelSpec",
    "SimState",
    "SolverDivergence",
    "bracket",
    "build_complex",
    "build_hodge",
    "jacobi_check",
    "pairing",
]
