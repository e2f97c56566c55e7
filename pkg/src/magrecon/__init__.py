"""Reconstruction of air-filled flaws in nonlinear magnetic workpieces.

The package solves a two-phase inverse problem: given magnetic-induction
data over the whole domain, recover which part of a saturable steel
workpiece is actually air. The forward model is a quasi-linear potential
equation discretized with bilinear finite elements; the reconstruction is
a piecewise-constant level set descent driven by adjoint gradients.
"""

from .errors import (ConfigError, InvalidArgumentError, MagreconError,
                     NewtonFailureError, ParseError, ReconstructionAborted,
                     SolverFailureError, StallSignal)
from .fem import (Grid, NodalField, QuadVectorField, SymSparseOperator,
                  apply_dirichlet_zero, assemble_mass, build_grid,
                  gradient_at_quad, solve_spd)
from .fieldio import compare_fields, read_field, read_report, write_field, write_report
from .forward import NewtonConfig, SourceField, assemble_residual, assemble_tangent, newton_solve
from .gradient import (GradientBundle, assemble_gradient, evaluate_misfit,
                       gradient_bundle, solve_adjoint, solve_sensitivity)
from .materials import MaterialCurve, mix_v, mix_vprime, v2, v2_prime
from .optimizer import (PclsConfig, ReconReport, binarize, cfl_dt, clamp_12,
                        constraint_K, count_at_bounds, dL_dphi, run_reconstruction)
from .phantoms import (BuiltinExample, Circle, DiscDifference, Ellipse, NoiseSpec,
                       Phantom, add_noise, builtin_examples, generate_measurements,
                       make_source, rasterize)

__version__ = "0.1.0"

__all__ = [
    "Grid", "NodalField", "QuadVectorField", "SymSparseOperator",
    "build_grid", "gradient_at_quad", "assemble_mass", "apply_dirichlet_zero",
    "solve_spd",
    "MaterialCurve", "v2", "v2_prime", "mix_v", "mix_vprime",
    "NewtonConfig", "SourceField", "assemble_residual", "assemble_tangent",
    "newton_solve",
    "GradientBundle", "evaluate_misfit", "solve_adjoint", "solve_sensitivity",
    "assemble_gradient", "gradient_bundle",
    "PclsConfig", "ReconReport", "constraint_K", "dL_dphi", "cfl_dt",
    "clamp_12", "binarize", "count_at_bounds", "run_reconstruction",
    "Phantom", "Circle", "Ellipse", "DiscDifference", "NoiseSpec",
    "BuiltinExample", "rasterize", "make_source", "generate_measurements",
    "add_noise", "builtin_examples",
    "write_field", "read_field", "write_report", "read_report",
    "compare_fields",
    "MagreconError", "InvalidArgumentError", "SolverFailureError",
    "NewtonFailureError", "StallSignal", "ParseError", "ConfigError",
    "ReconstructionAborted",
]
