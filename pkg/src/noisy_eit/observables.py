"""Probe absorption, refractive index and group velocity from sigma31."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from .core import (
    InvalidParametersError,
    MediumParams,
    SystemParams,
    devectorize,
    ground_state,
    validate_medium,
    validate_params,
)
from .liouvillian import build_averaged_generator
from .solvers import solve_steady_state, steady_state_derivative

#: Far-detuned reference point (units of Gamma) for "arbitrary units" absorption.
ARB_REFERENCE_DELTA = 3.0
DEFAULT_FD_STEP = 1e-3
SINGULAR_DENOMINATOR = 1e-6


class SingularGroupVelocityError(ArithmeticError):
    """n_R - omega_p dn_R/dDelta vanishes: superluminal/singular regime."""


@dataclass(frozen=True)
class OpticalResponse:
    sigma31: complex
    alpha: float
    n_r: float
    dn_r_ddelta: float
    v_g: float


def _check(params: SystemParams, medium: MediumParams) -> None:
    violations = validate_params(params) + validate_medium(medium)
    if violations:
        raise InvalidParametersError(violations)


def probe_angular_frequency(delta: float, medium: MediumParams) -> float:
    """omega_p = 2 pi c / lambda0 - Delta * Gamma (Delta in units of Gamma)."""
    return 2 * math.pi * SPEED_OF_LIGHT / medium.lambda0 - delta * medium.gamma_hz


def susceptibility_prefactor(params: SystemParams, medium: MediumParams) -> float:
    """N lambda0^3 pi / (Omega_p / Gamma), shared by absorption and dispersion."""
    return medium.number_density * medium.lambda0 ** 3 * math.pi / params.omega_p_rabi


def absorption(sigma31: complex, params: SystemParams, medium: MediumParams) -> float:
    """Absorption coefficient (1/m) at the probe wavelength for detuning ``params.delta``."""
    _check(params, medium)
    lambda_p = 2 * math.pi * SPEED_OF_LIGHT / probe_angular_frequency(params.delta, medium)
    # + 0.0 normalises a signed zero at exact transparency
    return susceptibility_prefactor(params, medium) * complex(sigma31).imag / lambda_p + 0.0


def refractive_index(sigma31: complex, params: SystemParams, medium: MediumParams) -> float:
    _check(params, medium)
    return 1.0 + susceptibility_prefactor(params, medium) * complex(sigma31).real


def group_velocity_from(n_r: float, dn_r_ddelta: float, delta: float,
                        medium: MediumParams) -> float:
    """V_g = c / (n_R - omega_p dn_R/dDelta) with dn_R/dDelta in seconds."""
    denominator = n_r - probe_angular_frequency(delta, medium) * dn_r_ddelta
    if abs(denominator) < SINGULAR_DENOMINATOR:
        raise SingularGroupVelocityError(
            f"group-velocity denominator {denominator:.3e} is near zero")
    return SPEED_OF_LIGHT / denominator


def _sigma31(params: SystemParams) -> complex:
    return solve_steady_state(build_averaged_generator(params)).sigma31


def refractive_index_slope(params: SystemParams, medium: MediumParams,
                           method: str = "analytic-derivative",
                           h: float = DEFAULT_FD_STEP) -> tuple[complex, float]:
    """Return (sigma31, dn_R/dDelta) with the derivative in seconds (Delta in rad/s).

    ``analytic-derivative`` differentiates the trace-replaced linear system;
    ``central-difference`` re-solves at Delta +/- h (h in units of Gamma).
    """
    _check(params, medium)
    prefactor = susceptibility_prefactor(params, medium)
    if method == "analytic-derivative":
        x, dx = steady_state_derivative(build_averaged_generator(params), "delta")
        sigma31 = complex(devectorize(x)[2, 0])
        # Re sigma31 = Re sigma13 (vector component 5)
        slope = dx[5]
    elif method == "central-difference":
        sigma31 = _sigma31(params)
        plus = _sigma31(params.replace(delta=params.delta + h)).real
        minus = _sigma31(params.replace(delta=params.delta - h)).real
        slope = (plus - minus) / (2 * h)
    else:
        raise ValueError(f"unknown derivative method {method!r}")
    return sigma31, prefactor * slope / medium.gamma_hz


def optical_response(params: SystemParams, medium: MediumParams,
                     method: str = "analytic-derivative",
                     h: float = DEFAULT_FD_STEP) -> OpticalResponse:
    """Solve the steady state at ``params`` and evaluate all probe observables."""
    sigma31, slope = refractive_index_slope(params, medium, method, h)
    n_r = refractive_index(sigma31, params, medium)
    return OpticalResponse(
        sigma31=sigma31,
        alpha=absorption(sigma31, params, medium),
        n_r=n_r,
        dn_r_ddelta=slope,
        v_g=group_velocity_from(n_r, slope, params.delta, medium),
    )


def group_velocity(params: SystemParams, medium: MediumParams,
                   method: str = "analytic-derivative", h: float = DEFAULT_FD_STEP) -> float:
    return optical_response(params, medium, method, h).v_g


def reference_absorption(params: SystemParams, medium: MediumParams) -> float:
    """Noise-free absorption at Delta = 3 Gamma, the unit of "arbitrary units"."""
    ref = params.replace(delta=ARB_REFERENCE_DELTA, f0sq=0.0)
    return absorption(_sigma31(ref), ref, medium)


def two_level_absorption(params: SystemParams, medium: MediumParams) -> float:
    """Absorption without coupling field and noise (the non-EIT background).

    Level |2> is then stranded, so the stationary state reached from the
    ground state is used.
    """
    bare = params.replace(omega_c_rabi=0.0, f0sq=0.0)
    sigma = solve_steady_state(build_averaged_generator(bare), ground_state()).sigma31
    return absorption(sigma, bare, medium)


@dataclass(frozen=True)
class DipMetrics:
    """Transparency-dip summary of an absorption spectrum on a Delta grid.

    ``depth`` and ``width`` measure the dip against the no-coupling background
    absorption; ``shoulder_depth``/``shoulder_width`` measure it against the
    highest absorption on the grid.
    """

    alpha_center: float
    depth: float
    width: float
    shoulder_depth: float
    shoulder_width: float


def _half_level_width(delta: np.ndarray, profile: np.ndarray, centre: int) -> float:
    # ``profile`` peaks at ``centre``; return the full width where it falls to half that value.
    half = profile[centre] / 2
    edges = []
    for direction in (1, -1):
        i = centre
        while 0 <= i + direction < len(profile) and profile[i + direction] > half:
            i += direction
        j = i + direction
        if not 0 <= j < len(profile):
            return math.nan
        frac = (profile[i] - half) / (profile[i] - profile[j])
        edges.append(delta[i] + frac * (delta[j] - delta[i]))
    return abs(edges[0] - edges[1])


def dip_metrics(delta, alpha, background) -> DipMetrics:
    """Depth and full width at half depth of the dip around Delta = 0."""
    delta = np.asarray(delta, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    background = np.asarray(background, dtype=float)
    centre = int(np.argmin(np.abs(delta)))
    transparency = background - alpha
    shoulder = alpha.max() - alpha
    return DipMetrics(
        alpha_center=float(alpha[centre]),
        depth=float(transparency[centre]),
        width=_half_level_width(delta, transparency, centre),
        shoulder_depth=float(shoulder[centre]),
        shoulder_width=_half_level_width(delta, shoulder, centre),
    )
