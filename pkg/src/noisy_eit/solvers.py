"""Steady state of the averaged generator and a fixed-step RK4 propagator.

The steady state is found by replacing the sigma33 row of the generator with
the trace condition and solving the resulting 9x9 real system by LU
factorisation with partial pivoting (LAPACK ``gesv`` through numpy).  The
propagator integrates the same linear system in time and serves as an
independent check of the linear solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    TRACE_ROW,
    DensityMatrix,
    InvalidParametersError,
    density_matrix_violations,
    devectorize,
    validate_params,
    vectorize,
)
from .liouvillian import Liouvillian, build_averaged_generator, build_generator_derivative

#: Row of the generator replaced by the trace condition (the sigma33 equation).
REPLACED_ROW = 2

DEFAULT_DT = 1e-3
DEFAULT_T_FINAL = 200.0

#: Relative singular-value threshold below which a 9x9 system is treated as singular.
RANK_RTOL = 1e-12

INSTABILITY_BOUND = 10.0


class SingularSteadyStateError(np.linalg.LinAlgError):
    """The steady state is not unique; ``null_dim`` stationary directions exist."""

    def __init__(self, null_dim: int):
        self.null_dim = null_dim
        super().__init__(
            f"steady state is not unique: generator null space has dimension {null_dim} "
            "(pass rho0 to select the state reached from a given initial condition)")


class IntegrationInstabilityError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class SteadyStateResult:
    sigma: DensityMatrix
    residual: float
    method: str

    @property
    def sigma31(self) -> complex:
        return complex(self.sigma[2, 0])


def _replaced_system(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.array(matrix, dtype=float)
    a[REPLACED_ROW] = TRACE_ROW
    b = np.zeros(9)
    b[REPLACED_ROW] = 1.0
    return a, b


def null_space_dimension(matrix: np.ndarray, rtol: float = RANK_RTOL) -> int:
    s = np.linalg.svd(matrix, compute_uv=False)
    return int(np.sum(s <= rtol * max(s[0], 1.0)))


def _is_singular(a: np.ndarray) -> bool:
    s = np.linalg.svd(a, compute_uv=False)
    return s[-1] <= RANK_RTOL * s[0]


def _check_steady_state_params(gen: Liouvillian) -> None:
    violations = [v for v in validate_params(gen.params) if v.startswith("no decay")]
    if violations:
        raise InvalidParametersError(violations)


def _asymptotic_projection(matrix: np.ndarray, x0: np.ndarray) -> np.ndarray:
    # Long-time limit exp(G t) x0 for a generator whose non-zero eigenvalues
    # all have negative real part: project onto the right null space along
    # the conserved quantities (left null space).
    u, s, vt = np.linalg.svd(matrix)
    null = s <= RANK_RTOL * max(s[0], 1.0)
    right = vt[null].T
    left = u[:, null].T
    return right @ np.linalg.solve(left @ right, left @ x0)


def solve_steady_state(gen: Liouvillian, rho0: DensityMatrix | None = None) -> SteadyStateResult:
    """Unique steady state of ``gen`` with unit trace.

    If the steady state is degenerate (e.g. no coupling and no noise with
    gamma2 = 0, so level |2> decouples), a :class:`SingularSteadyStateError`
    naming the null-space dimension is raised, unless ``rho0`` is given, in
    which case the stationary state reached from ``rho0`` is returned.
    """
    _check_steady_state_params(gen)
    a, b = _replaced_system(gen.matrix)
    if _is_singular(a):
        null_dim = null_space_dimension(gen.matrix)
        if rho0 is None:
            raise SingularSteadyStateError(null_dim)
        x = _asymptotic_projection(gen.matrix, vectorize(rho0))
        residual = float(np.max(np.abs(gen.matrix @ x)))
    else:
        x = np.linalg.solve(a, b)
        kept = np.arange(9) != REPLACED_ROW
        residual = float(np.max(np.abs((gen.matrix @ x)[kept])))
    return SteadyStateResult(sigma=devectorize(x), residual=residual, method="linear-solve")


def steady_state_derivative(gen: Liouvillian, wrt: str = "delta") -> tuple[np.ndarray, np.ndarray]:
    """Steady-state vector ``x`` and its exact derivative ``dx/d(wrt)``.

    Differentiating ``A x = b`` for the trace-replaced system gives
    ``A dx = -(dA) x``; the trace row does not depend on any parameter.
    """
    _check_steady_state_params(gen)
    a, b = _replaced_system(gen.matrix)
    if _is_singular(a):
        raise SingularSteadyStateError(null_space_dimension(gen.matrix))
    da = build_generator_derivative(gen.params, wrt)
    da[REPLACED_ROW] = 0.0
    x = np.linalg.solve(a, b)
    dx = np.linalg.solve(a, -da @ x)
    return x, dx


def rk4_step_matrix(matrix: np.ndarray, dt: float) -> np.ndarray:
    """One classical RK4 step for the autonomous linear system x' = G x.

    For linear systems the four RK4 stages collapse to the degree-4 Taylor
    polynomial of exp(G dt).
    """
    h = dt * np.asarray(matrix)
    h2 = h @ h
    return np.eye(len(h)) + h + h2 / 2 + h2 @ h / 6 + h2 @ h2 / 24


def _check_propagation_inputs(rho0, t_final, dt):
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not t_final >= 0:
        raise ValueError("t_final must be non-negative")
    violations = density_matrix_violations(rho0)
    if violations:
        raise ValueError("rho0 is not a valid density matrix: " + "; ".join(violations))


def _step_plan(t_final: float, dt: float) -> tuple[int, float]:
    n = int(np.floor(t_final / dt + 1e-9))
    rest = t_final - n * dt
    return n, rest if rest > 1e-12 * max(dt, 1.0) else 0.0


def _check_stable(step: np.ndarray, dt: float) -> None:
    radius = np.max(np.abs(np.linalg.eigvals(step)))
    if radius > 1.0 + 1e-9:
        raise IntegrationInstabilityError(
            f"RK4 step with dt={dt:g} is unstable (spectral radius {radius:.6g}); use a smaller dt")


def propagate(gen: Liouvillian, rho0: DensityMatrix, t_final: float,
              dt: float = DEFAULT_DT) -> DensityMatrix:
    """Integrate d(vec sigma)/dt = G vec sigma from 0 to ``t_final`` with fixed-step RK4.

    Whole steps are applied as a power of the one-step RK4 matrix; a final
    partial step covers any remainder of ``t_final / dt``.
    """
    _check_propagation_inputs(rho0, t_final, dt)
    step = rk4_step_matrix(gen.matrix, dt)
    _check_stable(step, dt)
    n, rest = _step_plan(t_final, dt)
    x = np.linalg.matrix_power(step, n) @ vectorize(rho0)
    if rest:
        x = rk4_step_matrix(gen.matrix, rest) @ x
    if np.max(np.abs(x)) > INSTABILITY_BOUND:
        raise IntegrationInstabilityError("density matrix entries blew up; use a smaller dt")
    return devectorize(x)


def propagate_trajectory(gen: Liouvillian, rho0: DensityMatrix, n_steps: int,
                         dt: float = DEFAULT_DT, every: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Step-by-step RK4 trajectory, returning (times, states as 9-vectors) every ``every`` steps."""
    _check_propagation_inputs(rho0, n_steps * dt, dt)
    step = rk4_step_matrix(gen.matrix, dt)
    _check_stable(step, dt)
    stride = np.linalg.matrix_power(step, every)
    n_out = n_steps // every
    xs = np.empty((n_out + 1, 9))
    xs[0] = vectorize(rho0)
    for k in range(n_out):
        xs[k + 1] = stride @ xs[k]
        if np.max(np.abs(xs[k + 1])) > INSTABILITY_BOUND:
            raise IntegrationInstabilityError("density matrix entries blew up; use a smaller dt")
    return dt * every * np.arange(n_out + 1), xs


def steady_state_by_integration(gen: Liouvillian, rho0: DensityMatrix | None = None,
                                t_final: float = DEFAULT_T_FINAL,
                                dt: float = DEFAULT_DT) -> SteadyStateResult:
    """Long-time limit of :func:`propagate`, used as an oracle for the linear solve."""
    if rho0 is None:
        rho0 = devectorize(np.array([1.0, 0, 0, 0, 0, 0, 0, 0, 0]))
    sigma = propagate(gen, rho0, t_final, dt)
    residual = float(np.max(np.abs(gen.matrix @ vectorize(sigma))))
    return SteadyStateResult(sigma=sigma, residual=residual, method="time-integrate")


def solve_params(params) -> SteadyStateResult:
    """Convenience wrapper: build the generator for ``params`` and solve it."""
    return solve_steady_state(build_averaged_generator(params))
