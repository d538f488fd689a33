"""Noise-averaged electromagnetically induced transparency in a Lambda system."""

from .core import (
    InvalidParametersError,
    MediumParams,
    SystemParams,
    density_matrix_violations,
    devectorize,
    gamma_rad_per_s,
    ground_state,
    validate_params,
    vectorize,
)
from .liouvillian import Liouvillian, build_averaged_generator, build_generator_derivative
from .observables import (
    OpticalResponse,
    SingularGroupVelocityError,
    absorption,
    group_velocity,
    optical_response,
    refractive_index,
)
from .solvers import (
    IntegrationInstabilityError,
    SingularSteadyStateError,
    SteadyStateResult,
    propagate,
    solve_params,
    solve_steady_state,
    steady_state_derivative,
)
from .stochastic import integrate_ensemble, integrate_stochastic, validate_novikov
from .sweep import Axis, SweepSpec, contour_grid, run_sweep

__version__ = "0.1.0"
