"""Symmetric periodic orbits of a test particle near one primary of the
figure-eight choreography, via Levi-Civita regularization, symmetric
shooting and pseudo-arclength continuation."""

from .errors import (
    RefbpError,
    CollisionError,
    IntegrationError,
    StepUnderflowError,
    StepBudgetError,
    BracketingError,
    ConvergenceError,
)
from .dynamics import (
    MassConfig,
    RESTRICTED,
    BodyState,
    SystemState,
    EightConstants,
    eight_initial_conditions,
    choreography_initial_state,
    four_body_field,
    restricted_field,
    nbody_rhs,
    constants_report,
)
from .regularization import (
    REG_DIM,
    REG_COLUMNS,
    RegState,
    levi_civita_map,
    lc_inverse,
    binding_energy_cartesian,
    binding_energy_regularized,
    regularized_field,
    cartesian_to_regularized,
    regularized_to_cartesian,
    reg_rhs,
)
from .integrate import IntegratorSettings, Trajectory, propagate, locate_time_target
from .symmetry import (
    rtilde_reflect,
    rtilde_fixed_residual,
    verify_symmetric_periodic,
    SymmetryReport,
)
from .bvp import (
    TAU_SCALE,
    KeplerSeed,
    CartSeed,
    RegSeed,
    kepler_seed,
    seed_to_regularized,
    regularized_to_seed,
    reg_initial_state,
    reg_boundary_values,
    propagate_reg_seed,
    bvp_residual_reg,
    bvp_residual_cart,
    newton_solve,
    fd_jacobian,
    NewtonResult,
)
from .continuation import (
    FamilyPoint,
    FamilyCurve,
    ArclengthSettings,
    DiscoverySettings,
    PeriodicOrbitRecord,
    solve_point,
    trace_family,
    detect_periodic,
    refine_periodic,
    periodic_records,
    full_period_trajectory,
    particle_interpolant,
    motion_tag,
    label_families,
    discover_families,
)
from . import catalog

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
