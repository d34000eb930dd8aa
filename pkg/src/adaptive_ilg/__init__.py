"""Adaptive iterative linearized Galerkin FEM for quasi-linear elliptic problems."""
from .driver import ILGConfig, LinearizationStall, RunRecord, fit_slope, run, slope
from .estimator import estimate, mark
from .fem import DiscreteFunction, SolverError, assemble, scheme_constants, solve
from .linearization import DampingCollapse, SchemeSpec, estimate_CH, iterate, step
from .mesh import MeshError, Triangulation, make_lshape_initial, min_angle, refine
from .model import singular_problem, smooth_problem
from .quadrature import rule

__version__ = "0.1.0"

__all__ = [
    "ILGConfig", "LinearizationStall", "RunRecord", "fit_slope", "run", "slope",
    "estimate", "mark", "DiscreteFunction", "SolverError", "assemble", "scheme_constants",
    "solve", "DampingCollapse", "SchemeSpec", "estimate_CH", "iterate", "step",
    "MeshError", "Triangulation", "make_lshape_initial", "min_angle", "refine",
    "singular_problem", "smooth_problem", "rule",
]
