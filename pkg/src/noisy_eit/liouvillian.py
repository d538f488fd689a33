"""Noise-averaged Lindblad generator as a real 9x9 matrix.

The averaged equations of motion are linear in each of the six rates, so the
generator is assembled as ``sum_k p_k * G_k`` where ``G_k`` is obtained by
evaluating the element-wise right-hand side with a single unit rate.  This
makes every parameter derivative exact and the generator affine in each
parameter separately.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import SystemParams, devectorize, require_valid, vectorize

#: Parameters that enter the generator linearly, in assembly order.
LINEAR_PARAMETERS = ("delta", "f0sq", "omega_p_rabi", "omega_c_rabi", "gamma1", "gamma2")

#: Accepted ``wrt`` identifiers for :func:`build_generator_derivative`.
DERIVATIVE_PARAMETERS = {
    "delta": "delta",
    "omega_c": "omega_c_rabi",
    "omega_c_rabi": "omega_c_rabi",
    "f0sq": "f0sq",
}


def averaged_rhs(sigma, delta, f0sq, omega_p, omega_c, gamma1, gamma2):
    """d(sigma)/dt for the noise-averaged density matrix.

    Element-wise form of the closed equations obtained after averaging the
    injected white noise: population exchange at rate ``f0sq`` between |1>
    and |2>, dephasing ``f0sq`` on sigma12 and ``(f0sq + gamma1 + gamma2)/2``
    on sigma13 and sigma23.  The probe term of the sigma23 equation uses
    sigma21, as required by the Hamiltonian it derives from.
    """
    s = sigma
    g = 0.5 * (f0sq + gamma1 + gamma2)
    exchange = f0sq * (s[1, 1] - s[0, 0])
    d = np.zeros((3, 3), dtype=complex)
    d[0, 0] = 1j * omega_p * (s[2, 0] - s[0, 2]) + gamma1 * s[2, 2] + exchange
    d[1, 1] = 1j * omega_c * (s[2, 1] - s[1, 2]) + gamma2 * s[2, 2] - exchange
    d[2, 2] = (-1j * omega_p * (s[2, 0] - s[0, 2]) - 1j * omega_c * (s[2, 1] - s[1, 2])
               - (gamma1 + gamma2) * s[2, 2])
    d[0, 1] = (1j * delta - f0sq) * s[0, 1] + 1j * omega_p * s[2, 1] - 1j * omega_c * s[0, 2]
    d[0, 2] = ((1j * delta - g) * s[0, 2] - 1j * omega_c * s[0, 1]
               + 1j * omega_p * (s[2, 2] - s[0, 0]))
    d[1, 2] = -g * s[1, 2] + 1j * omega_c * (s[2, 2] - s[1, 1]) - 1j * omega_p * s[1, 0]
    for i, j in ((0, 1), (0, 2), (1, 2)):
        d[j, i] = d[i, j].conjugate()
    return d


@lru_cache(maxsize=None)
def _unit_generators() -> np.ndarray:
    basis = np.eye(9)
    units = np.empty((len(LINEAR_PARAMETERS), 9, 9))
    for k, name in enumerate(LINEAR_PARAMETERS):
        rates = dict.fromkeys(LINEAR_PARAMETERS, 0.0)
        rates[name] = 1.0
        args = [rates[n] for n in LINEAR_PARAMETERS]
        for col in range(9):
            units[k, :, col] = vectorize(averaged_rhs(devectorize(basis[col]), *args))
    units.setflags(write=False)
    return units


@dataclass(frozen=True, eq=False)
class Liouvillian:
    """Real generator ``G`` with ``d(vec sigma)/dt = G @ vec sigma``."""

    matrix: np.ndarray
    params: SystemParams

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x

    def to_csv(self) -> str:
        """9x9 CSV block of the generator (debug dump)."""
        buf = io.StringIO()
        np.savetxt(buf, self.matrix, delimiter=",", fmt="%.17g")
        return buf.getvalue()


def build_averaged_generator(params: SystemParams) -> Liouvillian:
    """Assemble the noise-averaged generator for ``params``.

    Only the dynamical conditions are enforced here (finite, non-negative
    rates); uniqueness of the steady state is the solver's concern.
    """
    require_valid(params, steady_state=False)
    coeffs = np.array([getattr(params, name) for name in LINEAR_PARAMETERS], dtype=float)
    matrix = np.tensordot(coeffs, _unit_generators(), axes=1)
    matrix.setflags(write=False)
    return Liouvillian(matrix=matrix, params=params)


def build_generator_derivative(params: SystemParams, wrt: str) -> np.ndarray:
    """Exact partial derivative of the generator with respect to ``wrt``.

    ``wrt`` is one of ``"delta"``, ``"omega_c"`` or ``"f0sq"``.  Because the
    generator is linear in each rate, the result is independent of ``params``
    (which is still validated for consistency with the forward build).
    """
    try:
        name = DERIVATIVE_PARAMETERS[wrt]
    except KeyError:
        raise ValueError(f"unknown parameter id {wrt!r}; expected one of "
                         f"{sorted(DERIVATIVE_PARAMETERS)}") from None
    require_valid(params, steady_state=False)
    return _unit_generators()[LINEAR_PARAMETERS.index(name)].copy()
