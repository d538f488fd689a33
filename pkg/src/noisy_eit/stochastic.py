"""Explicit-noise trajectories and a Monte-Carlo check of the noise average.

Each trajectory integrates the element-wise equations of motion with the
injected white noise f(t) present explicitly (including its e^{+-i omega_mu t}
phase factors).  The noise is multiplicative, and the averaged equations
correspond to the Stratonovich reading of it, so trajectories are advanced
with the stochastic Heun (predictor-corrector) scheme.

Trajectory ``k`` of an ensemble draws its increments from a Philox stream
keyed by ``base_seed + k``; results therefore do not depend on how the work
is scheduled or chunked.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange
from numba.core.errors import NumbaWarning
from scipy.optimize import curve_fit

from .core import (
    DensityMatrix,
    SystemParams,
    density_matrix_violations,
    devectorize,
    ground_state,
    pure_state,
    require_valid,
    vectorize,
)
from .liouvillian import build_averaged_generator
from .solvers import IntegrationInstabilityError, propagate

# an outdated system TBB only makes numba fall back to another threading layer
warnings.filterwarnings("ignore", message="The TBB threading layer", category=NumbaWarning)

DEFAULT_DT = 1e-4
DEFAULT_T_FINAL = 30.0
DEFAULT_N_TRAJ = 2000
MIN_N_TRAJ = 100
CHUNK_STEPS = 2048

PASS, FAIL, INCONCLUSIVE = "PASS", "FAIL", "INCONCLUSIVE"


@dataclass(frozen=True, eq=False)
class NoiseTrajectory:
    """Wiener increments dW_k ~ N(0, dt); the noise is f(t_k) = sqrt(f0sq) dW_k / dt."""

    seed: int
    dt: float
    samples: np.ndarray

    def noise(self, f0sq: float) -> np.ndarray:
        return math.sqrt(f0sq) * self.samples / self.dt


def noise_stream(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed)))


def make_noise_trajectory(seed: int, dt: float, n_steps: int) -> NoiseTrajectory:
    samples = noise_stream(seed).standard_normal(n_steps) * math.sqrt(dt)
    return NoiseTrajectory(seed=seed, dt=dt, samples=samples)


# -- trajectory kernel -------------------------------------------------------
# State layout per trajectory: (r11, r22, r33, r12, r13, r23) as complex.

@njit(cache=True, inline="always")
def _drift(r11, r22, r33, r12, r13, r23, delta, wp, wc, g1, g2):
    r21 = r12.conjugate()
    r31 = r13.conjugate()
    r32 = r23.conjugate()
    g = 0.5 * (g1 + g2)
    probe = 1j * wp * (r31 - r13)
    coupling = 1j * wc * (r32 - r23)
    d11 = probe + g1 * r33
    d22 = coupling + g2 * r33
    d33 = -probe - coupling - (g1 + g2) * r33
    d12 = 1j * delta * r12 + 1j * wp * r32 - 1j * wc * r13
    d13 = (1j * delta - g) * r13 - 1j * wc * r12 + 1j * wp * (r33 - r11)
    d23 = -g * r23 + 1j * wc * (r33 - r22) - 1j * wp * r21
    return d11, d22, d33, d12, d13, d23


@njit(cache=True, inline="always")
def _noise_coefficient(r11, r22, r12, r13, r23, phase):
    # Coefficient of f(t); phase = exp(-i omega_mu t).
    r21 = r12.conjugate()
    cphase = phase.conjugate()
    b11 = 1j * (phase * r21 - cphase * r12)
    b12 = 1j * phase * (r22 - r11)
    b13 = 1j * phase * r23
    b23 = 1j * cphase * r13
    return b11, -b11, b12, b13, b23


@njit(cache=True, parallel=True)
def _heun_segment(state, dw, phases, dt, f0, delta, wp, wc, g1, g2, status):
    # phases[j] = exp(-i omega_mu t_j) for the segment's step boundaries (length n_steps + 1)
    n_traj, n_steps = dw.shape
    for k in prange(n_traj):
        if status[k]:
            continue
        r11, r22, r33, r12, r13, r23 = (state[k, 0], state[k, 1], state[k, 2],
                                         state[k, 3], state[k, 4], state[k, 5])
        for j in range(n_steps):
            xi = f0 * dw[k, j]
            p0 = phases[j]
            p1 = phases[j + 1]
            a11, a22, a33, a12, a13, a23 = _drift(r11, r22, r33, r12, r13, r23,
                                                  delta, wp, wc, g1, g2)
            b11, b22, b12, b13, b23 = _noise_coefficient(r11, r22, r12, r13, r23, p0)
            q11 = r11 + a11 * dt + b11 * xi
            q22 = r22 + a22 * dt + b22 * xi
            q33 = r33 + a33 * dt
            q12 = r12 + a12 * dt + b12 * xi
            q13 = r13 + a13 * dt + b13 * xi
            q23 = r23 + a23 * dt + b23 * xi
            c11, c22, c33, c12, c13, c23 = _drift(q11, q22, q33, q12, q13, q23,
                                                  delta, wp, wc, g1, g2)
            e11, e22, e12, e13, e23 = _noise_coefficient(q11, q22, q12, q13, q23, p1)
            h = 0.5 * dt
            hx = 0.5 * xi
            r11 = r11 + (a11 + c11) * h + (b11 + e11) * hx
            r22 = r22 + (a22 + c22) * h + (b22 + e22) * hx
            r33 = r33 + (a33 + c33) * h
            r12 = r12 + (a12 + c12) * h + (b12 + e12) * hx
            r13 = r13 + (a13 + c13) * h + (b13 + e13) * hx
            r23 = r23 + (a23 + c23) * h + (b23 + e23) * hx
            if (abs(r11) > 10.0 or abs(r22) > 10.0 or abs(r33) > 10.0
                    or abs(r12) > 10.0 or abs(r13) > 10.0 or abs(r23) > 10.0):
                status[k] = 1
                break
        state[k, 0] = r11
        state[k, 1] = r22
        state[k, 2] = r33
        state[k, 3] = r12
        state[k, 4] = r13
        state[k, 5] = r23


def _pack(rho: DensityMatrix) -> np.ndarray:
    return np.array([rho[0, 0], rho[1, 1], rho[2, 2], rho[0, 1], rho[0, 2], rho[1, 2]],
                    dtype=np.complex128)


def _unpack(state: np.ndarray) -> DensityMatrix:
    r11, r22, r33, r12, r13, r23 = state
    return np.array([[r11, r12, r13],
                     [r12.conjugate(), r22, r23],
                     [r13.conjugate(), r23.conjugate(), r33]])


def _as_vectors(states: np.ndarray) -> np.ndarray:
    out = np.empty((len(states), 9))
    out[:, :3] = states[:, :3].real
    out[:, 3::2] = states[:, 3:].real
    out[:, 4::2] = states[:, 3:].imag
    return out


def _check_step(params: SystemParams, t_final: float, dt: float) -> int:
    if not t_final > 0:
        raise ValueError("t_final must be positive")
    if not dt > 0 or dt > 0.01 / max(1.0, params.f0sq):
        raise ValueError(f"dt={dt:g} too large: need 0 < dt <= 0.01/max(1, f0sq)")
    if params.f0sq > 0 and params.omega_mu * dt > 0.1:
        raise ValueError(f"dt={dt:g} does not resolve omega_mu={params.omega_mu:g} "
                         "(need omega_mu * dt <= 0.1)")
    n = int(round(t_final / dt))
    if not math.isclose(n * dt, t_final, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError("t_final must be an integer multiple of dt")
    return n


def _kernel_args(params: SystemParams, dt: float):
    return (dt, math.sqrt(params.f0sq), params.delta,
            params.omega_p_rabi, params.omega_c_rabi, params.gamma1, params.gamma2)


def _phases(params: SystemParams, dt: float, step0: int, n_steps: int) -> np.ndarray:
    t = dt * np.arange(step0, step0 + n_steps + 1)
    return np.exp(-1j * params.omega_mu * t)


def integrate_stochastic(params: SystemParams, rho0: DensityMatrix, t_final: float,
                         dt: float = DEFAULT_DT, seed: int = 0) -> DensityMatrix:
    """One noise realisation of the explicit equations of motion, at ``t_final``."""
    require_valid(params, steady_state=False)
    n_steps = _check_step(params, t_final, dt)
    violations = density_matrix_violations(rho0)
    if violations:
        raise ValueError("rho0 is not a valid density matrix: " + "; ".join(violations))
    noise = make_noise_trajectory(seed, dt, n_steps)
    state = _pack(rho0)[None, :].copy()
    status = np.zeros(1, dtype=np.int8)
    dt_, *rest = _kernel_args(params, dt)
    _heun_segment(state, noise.samples[None, :], _phases(params, dt, 0, n_steps), dt_, *rest,
                  status)
    if status[0]:
        raise IntegrationInstabilityError("stochastic trajectory blew up; use a smaller dt")
    return _unpack(state[0])


@dataclass(frozen=True, eq=False)
class EnsembleEstimate:
    """Trajectory average at the recorded times.

    ``mean_path``/``stderr_path`` hold the 9-vector (see ``core.vectorize``)
    mean and standard error for each entry of ``times``; the last row is the
    final state.
    """

    n_traj: int
    times: np.ndarray
    mean_path: np.ndarray
    stderr_path: np.ndarray

    @property
    def mean_sigma(self) -> DensityMatrix:
        return devectorize(self.mean_path[-1])

    @property
    def stderr(self) -> np.ndarray:
        return self.stderr_path[-1]


def _moments(states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = _as_vectors(states)
    n = len(x)
    total = x.sum(axis=0)
    mean = total / n
    if n < 2:
        return mean, np.zeros(9)
    var = ((x - mean) ** 2).sum(axis=0) / (n - 1)
    return mean, np.sqrt(var / n)


def integrate_ensemble(params: SystemParams, rho0: DensityMatrix, t_final: float,
                       dt: float = DEFAULT_DT, n_traj: int = DEFAULT_N_TRAJ,
                       base_seed: int = 0, n_records: int = 1) -> EnsembleEstimate:
    """Average ``n_traj`` trajectories, recording ``n_records`` equally spaced snapshots.

    Trajectory ``k`` is bit-identical to ``integrate_stochastic(..., seed=base_seed + k)``.
    """
    require_valid(params, steady_state=False)
    n_steps = _check_step(params, t_final, dt)
    if n_traj < 1:
        raise ValueError("n_traj must be positive")
    if n_records < 1 or n_steps % n_records:
        raise ValueError("n_records must divide the number of steps")
    violations = density_matrix_violations(rho0)
    if violations:
        raise ValueError("rho0 is not a valid density matrix: " + "; ".join(violations))

    streams = [noise_stream(base_seed + k) for k in range(n_traj)]
    state = np.tile(_pack(rho0), (n_traj, 1))
    status = np.zeros(n_traj, dtype=np.int8)
    dt_, *rest = _kernel_args(params, dt)
    sqrt_dt = math.sqrt(dt)
    record_every = n_steps // n_records

    means, errors = [], []
    m, e = _moments(state)
    means.append(m)
    errors.append(e)
    step = 0
    while step < n_steps:
        next_record = (step // record_every + 1) * record_every
        length = min(CHUNK_STEPS, next_record - step)
        dw = np.empty((n_traj, length))
        for k, stream in enumerate(streams):
            dw[k] = stream.standard_normal(length)
        dw *= sqrt_dt
        _heun_segment(state, dw, _phases(params, dt, step, length), dt_, *rest, status)
        if status.any():
            raise IntegrationInstabilityError(
                f"{int(status.sum())} trajectories blew up; use a smaller dt")
        step += length
        if step == next_record:
            m, e = _moments(state)
            means.append(m)
            errors.append(e)
    times = dt * record_every * np.arange(n_records + 1)
    return EnsembleEstimate(n_traj=n_traj, times=times, mean_path=np.array(means),
                            stderr_path=np.array(errors))


@dataclass(frozen=True, eq=False)
class NovikovVerdict:
    """Entry-wise comparison of the Monte-Carlo mean with the averaged generator."""

    status: str
    params: SystemParams
    n_traj: int
    t_final: float
    dt: float
    base_seed: int
    mc_mean: np.ndarray
    stderr: np.ndarray
    averaged: np.ndarray
    tolerance: np.ndarray
    effect_size: float
    reason: str = ""
    labels: tuple = field(default=("rho11", "rho22", "rho33", "re_rho12", "im_rho12",
                                   "re_rho13", "im_rho13", "re_rho23", "im_rho23"))

    @property
    def deviation(self) -> np.ndarray:
        return np.abs(self.mc_mean - self.averaged)

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "reason": self.reason,
            "params": self.params.as_dict(),
            "n_traj": self.n_traj,
            "t_final": self.t_final,
            "dt": self.dt,
            "base_seed": self.base_seed,
            "effect_size": self.effect_size,
            "entries": [
                {"entry": label, "mc_mean": float(m), "averaged": float(a),
                 "deviation": float(d), "stderr": float(s), "tolerance": float(t)}
                for label, m, a, d, s, t in zip(self.labels, self.mc_mean, self.averaged,
                                                self.deviation, self.stderr, self.tolerance)
            ],
        }

    def to_text(self) -> str:
        lines = [f"Novikov validation: {self.status}"
                 + (f" ({self.reason})" if self.reason else ""),
                 f"  n_traj={self.n_traj} t_final={self.t_final:g} dt={self.dt:g} "
                 f"base_seed={self.base_seed} effect_size={self.effect_size:.3e}",
                 f"  {'entry':<10}{'mc_mean':>14}{'averaged':>14}{'deviation':>12}"
                 f"{'stderr':>12}{'tolerance':>12}  ok"]
        for label, m, a, d, s, t in zip(self.labels, self.mc_mean, self.averaged,
                                        self.deviation, self.stderr, self.tolerance):
            lines.append(f"  {label:<10}{m:>14.6e}{a:>14.6e}{d:>12.3e}{s:>12.3e}{t:>12.3e}"
                         f"  {'yes' if d <= t else 'NO'}")
        return "\n".join(lines)


def validate_novikov(params: SystemParams, n_traj: int = DEFAULT_N_TRAJ,
                     t_final: float = DEFAULT_T_FINAL, dt: float = DEFAULT_DT,
                     base_seed: int = 0, rho0: DensityMatrix | None = None,
                     ode_dt: float = 1e-3) -> NovikovVerdict:
    """Compare the trajectory average at ``t_final`` with the averaged dynamics.

    Each of the nine real entries must agree within ``max(3 stderr, 10 dt)``.
    The verdict is INCONCLUSIVE when the ensemble is too small to resolve the
    noise-induced change of the state (``n_traj < 100`` or a standard error
    at least as large as that change).
    """
    rho0 = ground_state() if rho0 is None else rho0
    if params.f0sq > 0 and params.omega_mu < 10 * max(params.f0sq, params.gamma1 + params.gamma2,
                                                      params.omega_c_rabi, abs(params.delta)):
        warnings.warn("omega_mu is not large compared with the other rates; the averaged "
                      "equations neglect terms rotating at 2 omega_mu", stacklevel=2)
    averaged = vectorize(propagate(build_averaged_generator(params), rho0, t_final, ode_dt))
    noiseless = vectorize(propagate(build_averaged_generator(params.replace(f0sq=0.0)),
                                    rho0, t_final, ode_dt))
    effect = float(np.max(np.abs(averaged - noiseless)))

    ensemble = integrate_ensemble(params, rho0, t_final, dt, n_traj, base_seed)
    mean, stderr = ensemble.mean_path[-1], ensemble.stderr
    tolerance = np.maximum(3 * stderr, 10 * dt)
    agree = bool(np.all(np.abs(mean - averaged) <= tolerance))

    reason = ""
    if params.f0sq == 0:
        status = PASS if agree else FAIL
    elif n_traj < MIN_N_TRAJ:
        status, reason = INCONCLUSIVE, f"n_traj={n_traj} < {MIN_N_TRAJ}"
    elif np.max(stderr) >= effect:
        status, reason = INCONCLUSIVE, "standard error exceeds the noise-induced effect"
    else:
        status = PASS if agree else FAIL
    return NovikovVerdict(status=status, params=params, n_traj=n_traj, t_final=t_final, dt=dt,
                          base_seed=base_seed, mc_mean=mean, stderr=stderr, averaged=averaged,
                          tolerance=tolerance, effect_size=effect, reason=reason)


def fit_decay_rate(times, values, stderr=None) -> tuple[float, float]:
    """Fit ``A exp(-rate t)``; returns (rate, one-sigma uncertainty)."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    sigma = None
    if stderr is not None:
        # deterministic points (e.g. t = 0) have zero spread; floor at the smallest positive error
        sigma = np.asarray(stderr, dtype=float)
        positive = sigma[sigma > 0]
        sigma = np.maximum(sigma, positive.min() if positive.size else 1.0)
    guess_rate = -np.polyfit(times, np.log(np.maximum(np.abs(values), 1e-12)), 1)[0]
    popt, pcov = curve_fit(lambda t, a, k: a * np.exp(-k * t), times, values,
                           p0=(values[0], max(guess_rate, 1e-6)), sigma=sigma,
                           absolute_sigma=sigma is not None)
    return float(popt[1]), float(np.sqrt(pcov[1, 1]))


@dataclass(frozen=True)
class DephasingRates:
    f0sq: float
    coherence_rate: float
    coherence_rate_err: float
    exchange_rate: float
    exchange_rate_err: float


def pure_dephasing_rates(f0sq: float, n_traj: int = 5000, t_final: float = 2.0,
                         dt: float = DEFAULT_DT, base_seed: int = 0, n_records: int = 40,
                         omega_mu: float = 600.0, n_batches: int = 10) -> DephasingRates:
    """Decay rates of <rho12> and <rho11 - rho22> with only the noise acting.

    The averaged equations predict ``f0sq`` and ``2 f0sq`` respectively.
    Rates are fitted to the pooled ensemble mean; their uncertainties come
    from the spread of fits to ``n_batches`` independent sub-ensembles, since
    the recorded time points share trajectories and are correlated.
    """
    if n_traj % n_batches:
        raise ValueError("n_traj must be a multiple of n_batches")
    params = SystemParams(omega_p_rabi=0.0, omega_c_rabi=0.0, delta=0.0, gamma1=0.0,
                          gamma2=0.0, f0sq=f0sq, omega_mu=omega_mu)
    size = n_traj // n_batches

    def batch_paths(rho0, seed0):
        runs = [integrate_ensemble(params, rho0, t_final, dt, size, seed0 + b * size, n_records)
                for b in range(n_batches)]
        return runs[0].times, np.array([r.mean_path for r in runs])

    def rate(times, paths, observable):
        pooled, _ = fit_decay_rate(times, observable(paths.mean(axis=0)))
        batch = [fit_decay_rate(times, observable(p))[0] for p in paths]
        return pooled, float(np.std(batch, ddof=1) / math.sqrt(n_batches))

    times, paths = batch_paths(pure_state([1, 1, 0]), base_seed)
    k12, e12 = rate(times, paths, lambda m: np.hypot(m[:, 3], m[:, 4]))
    times, paths = batch_paths(ground_state(), base_seed + n_traj)
    kx, ex = rate(times, paths, lambda m: m[:, 0] - m[:, 1])
    return DephasingRates(f0sq=f0sq, coherence_rate=k12, coherence_rate_err=e12,
                          exchange_rate=kx, exchange_rate_err=ex)
