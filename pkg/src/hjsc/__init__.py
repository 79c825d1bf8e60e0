"""Numerical lab for state-constrained equations ``u + a|Du|^p = f``.

Solve on a grid, pull minimizing curves out of the solution, and measure
semiconcavity near the boundary.
"""

from .costs import FAMILIES, make_cost, max_value
from .curves import (
    MinimizingCurve,
    curve_from_samples,
    dpp_defect,
    el_residual,
    energy_identity,
    extract_curve,
    hamilton_ode,
    speed_gradient_gap,
    value_drift,
)
from .diagnostics import (
    DiagnosticsReport,
    boundary_layer_maxima,
    region_maxima,
    condition3_check,
    diagnose,
    hitting_time_floor,
    sandwich_check,
    second_difference_at,
    second_difference_field,
    semiconcavity_bound_check,
    subsolution_constant,
)
from .domain import Domain
from .errors import (
    BranchInvalidError,
    DomainError,
    GradientMismatchError,
    HJSCError,
    NonConvergenceError,
    ParameterRangeError,
    RunawayError,
    SingularCurvatureError,
    StencilError,
)
from .examples import ExampleCase, PiecewiseLinearPath, catalog, get_case, path_cost
from .hamiltonian import (
    PowerHamiltonian,
    RunningCost,
    feedback_speed,
    feedback_velocity,
    lagrangian,
    legendre_coeff,
)
from .reference import Reference1D, curvature_estimate, integrate_branch
from .solver import Grid, SolverConfig, ValueField, bellman_update, build_grid, pde_residual, solve

__version__ = "0.1.0"
