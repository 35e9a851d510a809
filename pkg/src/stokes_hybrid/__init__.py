"""Hybridized discontinuous Galerkin discretizations of the Stokes problem
on triangular meshes, with exactly divergence-free velocities, static
condensation, crack-capable meshes, and convergence benchmarks."""

from .analysis import (ErrorReport, energy_error, eoc, error_report,
                       inf_sup_probe, l2_errors, seminorm_diagnostics, structure_checks)
from .assembly import (CompatibilityError, LocalBlocks, SaddleSystem, assemble,
                       local_a, local_b, local_blocks)
from .cases import (ConvergenceReport, ExactSolution, RobustnessReport,
                    case_cracked_square, case_lshape, case_square_min_reg,
                    get_case, run_convergence, run_pressure_robustness)
from .mesh import (CrackSegment, Face, Mesh, cracked_square_mesh, dump_mesh,
                   lshape_mesh, refine_uniform, unit_square_mesh)
from .solver import (CondensedInfo, DiscreteStokesSolution, SolverError,
                     solve_condensed, solve_full)
from .spaces import (DofLayout, MethodConfig, SpaceSet, build_spaces,
                     default_alpha, eval_basis, facet_boundary_flux,
                     interpolate_facet_dirichlet)

__version__ = "0.1.0"

__all__ = [
    "CompatibilityError", "CondensedInfo", "ConvergenceReport", "CrackSegment",
    "DiscreteStokesSolution", "DofLayout", "ErrorReport", "ExactSolution",
    "Face", "LocalBlocks", "Mesh", "MethodConfig", "RobustnessReport",
    "SaddleSystem", "SolverError", "SpaceSet", "assemble",
    "case_cracked_square", "case_lshape", "case_square_min_reg",
    "cracked_square_mesh", "default_alpha", "dump_mesh", "energy_error",
    "eoc", "error_report", "eval_basis", "facet_boundary_flux", "get_case",
    "inf_sup_probe", "interpolate_facet_dirichlet", "l2_errors", "local_a",
    "local_b", "local_blocks", "lshape_mesh", "refine_uniform",
    "run_convergence", "run_pressure_robustness", "seminorm_diagnostics",
    "solve_condensed", "solve_full", "structure_checks", "unit_square_mesh",
    "__version__",
]
