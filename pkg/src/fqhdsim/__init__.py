"""Solvers and diagnostics for the one-dimensional full quantum hydrodynamic
semiconductor model with non-flat doping."""

from .diagnostics import (
    ConvergenceStudy,
    DecayFit,
    NormSpec,
    convergence_slope,
    crossover_time,
    discrete_norm,
    energy_xi,
    entropy_psi,
    fit_decay_rate,
    perturbation_norm,
    semiclassical_error,
)
from .exceptions import (
    FqhdError,
    IterationLimitError,
    LinearSolveError,
    OutOfRegimeError,
    SupersonicRegimeError,
    VacuumError,
)
from .experiments import (
    ConfigError,
    DopingPreset,
    ExperimentSpec,
    RunSummary,
    boundary_data_for_strength,
    parse_config,
    run_experiment,
)
from .model import (
    AdmissibilityReport,
    BoundaryData,
    DopingProfile,
    FieldState,
    Grid,
    ScenarioParams,
    boundary_strength,
    check_admissible,
    density_bounds,
    enthalpy_F,
    sound_gap,
)
from .poisson import PotentialMethod, green_kernel, poisson_residual, potential_from_density
from .stationary import (
    SolverSettings,
    StationaryState,
    K_functional,
    bohm_boundary_defect,
    current_J,
    cvr_residual,
    rhs_g,
    rhs_h,
    solve_P1,
    solve_P2,
    solve_stationary,
    solve_stationary_limit,
    stationary_residual,
)
from .transient import (
    StepperConfig,
    TransientState,
    affine_initial_state,
    check_compatibility,
    fqhd_residual,
    perturbed_from_stationary,
    polish_stationary,
    run_transient,
    step_implicit,
    step_picard,
    transient_from_stationary,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
