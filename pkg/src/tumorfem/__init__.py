"""Finite-element solver for a tumour growth model with lactate, viscoelasticity and damage."""
__version__ = "0.1.0"

from ._accel import USE_NUMBA, backend_name
from .assembly import (
    assemble_boundary_load,
    assemble_boundary_mass,
    assemble_elasticity,
    assemble_mass,
    assemble_stiffness,
    identity_tensor,
    isotropic_tensor,
    lumped_mass,
    strain_at_quadrature,
)
from .config import RunConfig, parse_config, serialize
from .diagnostics import (
    NormReport,
    audit_bounds,
    continuous_dependence_experiment,
    field_norms,
)
from .errors import (
    HypothesisViolation,
    InvalidParameter,
    NumericalError,
    OracleFailure,
    StabilityViolation,
    StepFailure,
    TumorFEMError,
    ValidationError,
)
from .mesh import Field, Interval, Mesh, Rectangle, build_mesh
from .model import (
    ModelCoefficients,
    alpha_eval,
    preset,
    psi_eval,
    validate_hypotheses,
    yosida_eval,
)
from .oracle import ConvergenceTable, dense_replay_step, heat_convergence_study, viscoelastic_relaxation_check
from .sparse import SparseMatrix, SolveReport, cg_solve, from_triplets, matvec
from .stepper import SimState, StepDiagnostics, gamma_picard, run_simulation, step_phi, step_sigma, step_u, step_z

