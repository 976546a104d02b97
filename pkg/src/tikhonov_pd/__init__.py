"""Tikhonov regularized inertial primal-dual dynamics for equality constrained convex problems."""

from .dynamics import (
    PrimalDualState,
    Regime,
    SystemParams,
    TikhonovSchedule,
    classify_schedule,
    rhs_he_avd,
    rhs_tikhonov,
    rhs_z_avd,
    schedule_eval,
)
from .integrator import IntegrationConfig, Trajectory, integrate, integrate_fixed_rk4
from .problem import (
    ConstrainedProblem,
    QuadraticProblem,
    ReferenceSolution,
    augmented_lagrangian,
    grad_x_augmented,
    kkt_residual,
    lagrangian,
    make_example1,
    make_random_qp,
    minimal_norm_solution,
    solve_reference_qp,
)

__version__ = "0.1.0"
