"""gravitop: density-based topology optimization under self-weight.

Minimizes structural compliance for 2D/3D structures whose dominant load
is their own weight (plus optional fixed external loads), using a
three-field density representation, a smooth-step mass interpolation and
an implicit lower bound on the structural mass that keeps the volume
constraint active.
"""

from .errors import (AnalysisError, ConfigError, GravitopError, OptimizerError,
                     ParameterError)
from .field_chain import (FieldChain, FilterOperator, build_filter,
                          continuation_step, project, project_deriv)
from .fem import (Assembler, ElementKernel, FeState, analyze,
                  assemble_gravity, assemble_stiffness, compliance,
                  reference_stiffness, solve_system)
from .material import (MassDensityModel, SimpModel, heaviside,
                       heaviside_deriv)
from .mesh import (BoundarySpec, FixedRegion, Mesh, NodeSelector, PointLoad,
                   SymmetryFace, build_mesh, resolve_boundary)
from .optimizer import (MmaOptimizer, RunHistory, RunOptions, RunResult, run)
from .problems import (BuiltProblem, ProblemSpec, builtin, builtin_names,
                       spec_from_dict, spec_to_dict, with_overrides)
from .sensitivity import (GradientBundle, g1_value_and_gradient,
                          g2_value_and_gradient, objective_gradient)

__version__ = "0.1.0"

__all__ = [
    "AnalysisError", "ConfigError", "GravitopError", "OptimizerError",
    "ParameterError",
    "FieldChain", "FilterOperator", "build_filter", "continuation_step",
    "project", "project_deriv",
    "Assembler", "ElementKernel", "FeState", "analyze", "assemble_gravity",
    "assemble_stiffness", "compliance", "reference_stiffness", "solve_system",
    "MassDensityModel", "SimpModel", "heaviside", "heaviside_deriv",
    "BoundarySpec", "FixedRegion", "Mesh", "NodeSelector", "PointLoad",
    "SymmetryFace", "build_mesh", "resolve_boundary",
    "MmaOptimizer", "RunHistory", "RunOptions", "RunResult", "run",
    "BuiltProblem", "ProblemSpec", "builtin", "builtin_names",
    "spec_from_dict", "spec_to_dict", "with_overrides",
    "GradientBundle", "g1_value_and_gradient", "g2_value_and_gradient",
    "objective_gradient",
    "__version__",
]
