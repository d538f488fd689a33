"""Parameter sweeps over detuning, coupling strength and noise strength."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import InvalidParametersError, MediumParams, SystemParams
from .observables import (
    SingularGroupVelocityError,
    absorption,
    optical_response,
    refractive_index,
)
from .solvers import SingularSteadyStateError, solve_params

#: Sweepable axes and the SystemParams field each one sets.
AXIS_FIELDS = {"delta": "delta", "omega_c": "omega_c_rabi", "f0sq": "f0sq"}
OUTPUTS = ("sigma31", "alpha", "n_r", "v_g")
CSV_COLUMNS = ("delta", "omega_c", "f0sq", "re_sigma31", "im_sigma31", "alpha", "n_r", "v_g")


@dataclass(frozen=True)
class Axis:
    name: str
    values: tuple

    @classmethod
    def linear(cls, name: str, lo: float, hi: float, n_points: int) -> "Axis":
        if n_points < 1:
            raise ValueError("n_points must be at least 1")
        if n_points == 1 and lo != hi:
            raise ValueError("a one-point axis needs min == max")
        if n_points > 1 and not lo < hi:
            raise ValueError("axis min must be below max")
        return cls(name, tuple(float(v) for v in np.linspace(lo, hi, n_points)))

    @classmethod
    def of(cls, name: str, values) -> "Axis":
        return cls(name, tuple(float(v) for v in values))

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class SweepSpec:
    axis1: Axis
    axis2: Axis | None = None
    base: SystemParams = field(default_factory=SystemParams)
    medium: MediumParams = field(default_factory=MediumParams)
    outputs: tuple = OUTPUTS

    def validate(self) -> list[str]:
        problems = []
        axes = [a for a in (self.axis1, self.axis2) if a is not None]
        for axis in axes:
            if axis.name not in AXIS_FIELDS:
                problems.append(f"unknown sweep axis {axis.name!r}")
            if len(axis) < 1:
                problems.append(f"axis {axis.name!r} is empty")
        if len(axes) == 2 and axes[0].name == axes[1].name:
            problems.append(f"parameter {axes[0].name!r} used on two axes")
        unknown = set(self.outputs) - set(OUTPUTS)
        if unknown:
            problems.append(f"unknown outputs {sorted(unknown)}")
        return problems

    def grid(self) -> list[SystemParams]:
        """Parameter sets in row-major order (axis1 outer, axis2 inner)."""
        points = []
        for v1 in self.axis1.values:
            p1 = self.base.replace(**{AXIS_FIELDS[self.axis1.name]: v1})
            if self.axis2 is None:
                points.append(p1)
            else:
                points.extend(p1.replace(**{AXIS_FIELDS[self.axis2.name]: v2})
                              for v2 in self.axis2.values)
        return points


@dataclass(frozen=True)
class SpectrumRecord:
    delta: float
    omega_c: float
    f0sq: float
    sigma31: complex = complex("nan+nanj")
    alpha: float = math.nan
    n_r: float = math.nan
    v_g: float = math.nan
    error: str | None = None

    def row(self) -> dict:
        return {
            "delta": self.delta,
            "omega_c": self.omega_c,
            "f0sq": self.f0sq,
            "re_sigma31": self.sigma31.real,
            "im_sigma31": self.sigma31.imag,
            "alpha": self.alpha,
            "n_r": self.n_r,
            "v_g": self.v_g,
        }


def evaluate_point(params: SystemParams, medium: MediumParams,
                   outputs=OUTPUTS) -> SpectrumRecord:
    """Solve one grid point; failures are recorded in ``error`` rather than raised."""
    keys = dict(delta=params.delta, omega_c=params.omega_c_rabi, f0sq=params.f0sq)
    try:
        response = optical_response(params, medium)
    except SingularGroupVelocityError:
        sigma31 = solve_params(params).sigma31
        return SpectrumRecord(**keys, sigma31=sigma31,
                              alpha=absorption(sigma31, params, medium),
                              n_r=refractive_index(sigma31, params, medium),
                              error="vg-singular")
    except SingularSteadyStateError:
        return SpectrumRecord(**keys, error="singular-steady-state")
    except InvalidParametersError:
        return SpectrumRecord(**keys, error="invalid-params")
    nan = math.nan
    return SpectrumRecord(
        **keys,
        sigma31=response.sigma31 if "sigma31" in outputs else complex(nan, nan),
        alpha=response.alpha if "alpha" in outputs else nan,
        n_r=response.n_r if "n_r" in outputs else nan,
        v_g=response.v_g if "v_g" in outputs else nan,
    )


def run_sweep(spec: SweepSpec, threads: int = 1) -> list[SpectrumRecord]:
    """Evaluate every grid point of ``spec``; output order is the grid order.

    Points are independent; with ``threads > 1`` they are evaluated by a
    thread pool and gathered by index, so the result does not depend on the
    thread count.
    """
    problems = spec.validate()
    if problems:
        raise ValueError("; ".join(problems))
    points = spec.grid()

    def work(p):
        return evaluate_point(p, spec.medium, spec.outputs)

    if threads <= 1:
        return [work(p) for p in points]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, points))


@dataclass(frozen=True, eq=False)
class ContourGrid:
    """Absorption alpha[i, j] at (omega_c[i], f0sq[j]) for fixed detuning."""

    omega_c: np.ndarray
    f0sq: np.ndarray
    alpha: np.ndarray
    delta: float
    errors: tuple = ()


def contour_grid(spec: SweepSpec, threads: int = 1) -> ContourGrid:
    """Absorption on the (omega_c, f0sq) plane at the detuning of ``spec.base``."""
    if spec.axis1.name != "omega_c" or spec.axis2 is None or spec.axis2.name != "f0sq":
        raise ValueError("contour grid needs axis1='omega_c' and axis2='f0sq'")
    records = run_sweep(SweepSpec(spec.axis1, spec.axis2, spec.base, spec.medium,
                                  ("alpha",)), threads)
    shape = (len(spec.axis1), len(spec.axis2))
    alpha = np.array([r.alpha for r in records]).reshape(shape)
    errors = tuple((i, r.error) for i, r in enumerate(records) if r.error
                   and r.error != "vg-singular")
    return ContourGrid(omega_c=np.array(spec.axis1.values), f0sq=np.array(spec.axis2.values),
                       alpha=alpha, delta=spec.base.delta, errors=errors)


def detuning_spectrum(base: SystemParams, medium: MediumParams, lo: float = -3.0,
                      hi: float = 3.0, n_points: int = 601, threads: int = 1):
    return run_sweep(SweepSpec(Axis.linear("delta", lo, hi, n_points), base=base,
                               medium=medium), threads)


def default_contour_spec(base: SystemParams | None = None,
                         medium: MediumParams | None = None) -> SweepSpec:
    return SweepSpec(Axis.linear("omega_c", 0.2, 2.2, 61), Axis.linear("f0sq", 0.0, 2.0, 41),
                     base=base or SystemParams(), medium=medium or MediumParams())
