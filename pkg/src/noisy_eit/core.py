"""Parameter and state types for the noisy three-level Lambda system.

All rates, detunings and Rabi frequencies are dimensionless, measured in
units of the excited-state decay rate Gamma (= gamma1 by default).  Physical
units only enter through :class:`MediumParams`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

#: Level indices used throughout: |1> ground, |2> metastable, |3> excited.
GROUND, METASTABLE, EXCITED = 0, 1, 2

#: Natural linewidth of the Rb-85 D2 reference parameter set, in MHz.
DEFAULT_GAMMA_MHZ = 5.0

GAMMA_CONVENTIONS = ("rad", "2pi")

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-9

DensityMatrix = np.ndarray


class InvalidParametersError(ValueError):
    """Raised when a parameter set violates its invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class SystemParams:
    """Rates and fields of the Lambda system in units of Gamma.

    ``omega_mu`` is the rotation frequency of the noise coupling term and is
    only used by the explicit stochastic integrator.
    """

    omega_p_rabi: float = 1e-3
    omega_c_rabi: float = 1.0
    delta: float = 0.0
    gamma1: float = 1.0
    gamma2: float = 0.0
    f0sq: float = 0.0
    omega_mu: float = 600.0

    def replace(self, **changes) -> "SystemParams":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return SystemParams(**values)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def gamma_rad_per_s(convention: str = "rad", gamma_mhz: float = DEFAULT_GAMMA_MHZ) -> float:
    """Angular value of Gamma for a quoted "x MHz" linewidth.

    ``"rad"`` reads the number as 10^6 rad/s, ``"2pi"`` as 2*pi * 10^6 rad/s.
    """
    if convention == "rad":
        return gamma_mhz * 1e6
    if convention == "2pi":
        return 2.0 * math.pi * gamma_mhz * 1e6
    raise ValueError(f"unknown gamma convention {convention!r}; expected one of {GAMMA_CONVENTIONS}")


@dataclass(frozen=True)
class MediumParams:
    """Vapour constants: density (m^-3), resonance wavelength (m), Gamma (rad/s)."""

    number_density: float = 1e18
    lambda0: float = 780e-9
    gamma_hz: float = 5e6

    @classmethod
    def with_convention(cls, convention: str = "rad", gamma_mhz: float = DEFAULT_GAMMA_MHZ,
                        **kwargs) -> "MediumParams":
        return cls(gamma_hz=gamma_rad_per_s(convention, gamma_mhz), **kwargs)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_RATE_FIELDS = ("omega_p_rabi", "omega_c_rabi", "gamma1", "gamma2", "f0sq", "omega_mu")


def validate_params(params: SystemParams, *, steady_state: bool = True) -> list[str]:
    """Return the list of invariant violations of ``params`` (empty if valid).

    With ``steady_state=False`` only the conditions needed for well-defined
    dynamics are checked (finite values, non-negative rates).  The full check
    additionally requires a decay channel and a non-zero probe, without
    which the steady state or the optical response is undefined.
    """
    violations = []
    for name in ("delta",) + _RATE_FIELDS:
        value = getattr(params, name)
        if not math.isfinite(value):
            violations.append(f"{name} must be finite")
    for name in _RATE_FIELDS:
        value = getattr(params, name)
        if math.isfinite(value) and value < 0:
            if name == "f0sq":
                violations.append("f0sq must be non-negative (negative noise strength)")
            else:
                violations.append(f"{name} must be non-negative")
    if steady_state:
        if params.gamma1 + params.gamma2 <= 0:
            violations.append("no decay channel: gamma1 + gamma2 must be positive")
        if params.omega_p_rabi <= 0:
            violations.append("omega_p_rabi must be positive (zero probe has no optical response)")
    return violations


def validate_medium(medium: MediumParams) -> list[str]:
    violations = []
    for name in ("number_density", "lambda0", "gamma_hz"):
        value = getattr(medium, name)
        if not (math.isfinite(value) and value > 0):
            violations.append(f"{name} must be positive")
    return violations


def require_valid(params: SystemParams, *, steady_state: bool = True) -> None:
    violations = validate_params(params, steady_state=steady_state)
    if violations:
        raise InvalidParametersError(violations)


# Real vectorization: populations, then (Re, Im) of the upper-triangle coherences.
_COHERENCES = ((0, 1), (0, 2), (1, 2))
TRACE_ROW = np.array([1.0, 1.0, 1.0, 0, 0, 0, 0, 0, 0])


def vectorize(rho: DensityMatrix) -> np.ndarray:
    """Map a Hermitian 3x3 matrix to the real 9-vector

    (rho11, rho22, rho33, Re rho12, Im rho12, Re rho13, Im rho13, Re rho23, Im rho23).
    """
    rho = np.asarray(rho)
    out = np.empty(9)
    out[:3] = np.diagonal(rho).real
    for k, (i, j) in enumerate(_COHERENCES):
        out[3 + 2 * k] = rho[i, j].real
        out[4 + 2 * k] = rho[i, j].imag
    return out


def devectorize(x) -> DensityMatrix:
    """Inverse of :func:`vectorize`; the result is Hermitian by construction."""
    x = np.asarray(x, dtype=float)
    rho = np.diag(x[:3]).astype(complex)
    for k, (i, j) in enumerate(_COHERENCES):
        rho[i, j] = complex(x[3 + 2 * k], x[4 + 2 * k])
        rho[j, i] = rho[i, j].conjugate()
    return rho


def pure_state(amplitudes) -> DensityMatrix:
    psi = np.asarray(amplitudes, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def ground_state() -> DensityMatrix:
    return pure_state([1, 0, 0])


def density_matrix_violations(rho: DensityMatrix) -> list[str]:
    """Check hermiticity, unit trace and positivity at the package tolerances."""
    rho = np.asarray(rho)
    if rho.shape != (3, 3):
        return [f"density matrix must be 3x3, got shape {rho.shape}"]
    if not np.all(np.isfinite(rho)):
        return ["density matrix has non-finite entries"]
    violations = []
    if np.max(np.abs(rho - rho.conj().T)) > HERMITICITY_TOL:
        violations.append("not Hermitian")
    if abs(np.trace(rho) - 1) > TRACE_TOL:
        violations.append(f"trace is {np.trace(rho).real:.3e}, expected 1")
    min_eig = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    if min_eig < -POSITIVITY_TOL:
        violations.append(f"not positive semidefinite (min eigenvalue {min_eig:.3e})")
    return violations
