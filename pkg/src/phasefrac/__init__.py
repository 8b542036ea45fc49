"""Phase-field brittle fracture on 2D triangle meshes.

A small numpy/scipy library for the variational (gradient-damage) description
of brittle fracture: a damage field alpha in [0, 1] smears cracks over bands
of width ~ell, stiffness degrades as (1 - alpha)^2 + k_ell, and quasi-static
evolution minimizes elastic plus dissipated energy under the irreversibility
constraint alpha >= alpha_previous.

The package provides

* structured triangle meshes of rectangles, optionally refined in a band
  (``mesh``);
* material data and closed-form critical loads (``model``);
* linear P1 assembly of energies, residuals, and Hessian blocks (``fem``);
* hand-rolled sparse CG/MINRES, stationary preconditioners, and a block
  field-split preconditioner (``linalg``);
* a reduced-space active-set semismooth Newton solver for box-constrained
  systems (``vi``);
* alternate minimization with over-relaxation, optionally composed with a
  coupled active-set Newton phase (``solver``);
* three benchmark problems and a quasi-static driver (``cases``);
* INI-config parsing, CSV/VTK artifact emission, and sweeps (``runio``,
  ``cli``).
"""

__version__ = "0.1.0"

from .cases import (ProblemSetup, StepFailureError, StepRecord,
                    crack_band_count, erfc, run_quasistatic, setup_surfing,
                    setup_thermal_shock, setup_traction, surfing_displacement,
                    thermal_strain)
from .fem import (DirichletBC, Discretization, EnergyBreakdown, State,
                  apply_dirichlet, assemble_energy, assemble_Kaa, assemble_Kua,
                  assemble_Kuu, assemble_load_u, assemble_residual_alpha,
                  assemble_residual_u, combine_bcs, eliminate_dirichlet)
from .linalg import (BlockJacobian, BreakdownError, ChebyshevPreconditioner,
                     FieldSplitPreconditioner, InnerSolverError,
                     JacobiPreconditioner, LinearSolveReport,
                     LinearSolverError, SingularOperatorError,
                     SSORPreconditioner, cg_solve, direct_factorize,
                     direct_solve, dump_matrix, extract_submatrix,
                     fieldsplit_apply, inner_cg, inner_direct, minres_solve,
                     stationary_precond)
from .mesh import (BOUNDARY_TAGS, Mesh, banded_rect_mesh, boundary_dofs,
                   rect_mesh)
from .model import (C_W, DamageModel, Material, critical_shock,
                    critical_traction, internal_length, stiffness_tensor)
from .runio import (ConfigError, RunConfig, SweepSpec, build_material,
                    build_setup, build_solver_config, echo_config,
                    parse_config, parse_sweep, run, sweep)
from .solver import (NonlinearReport, SolverConfig, am_solve,
                     coupled_newton_solve, damage_step, elastic_step,
                     first_order_residual, inactive_block_jacobian,
                     oram_n_solve, residual_norm, solve_load_step)
from .vi import (ActivePartition, ActiveSetReport, MCProblem, VIConfig,
                 classify_active, fb_composite, fb_phi, mcp_residual,
                 rsls_solve)

__all__ = [name for name in dir() if not name.startswith("_")]
