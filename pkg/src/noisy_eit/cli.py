"""Command-line entry point: ``noisy-eit <command> [options]``.

Configuration comes from an optional flat JSON file (``--config``) whose keys
mirror :class:`RunConfig`; command-line flags override file values.  All
dimensionless inputs are in units of Gamma.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .core import (
    GAMMA_CONVENTIONS,
    MediumParams,
    SystemParams,
    gamma_rad_per_s,
    validate_medium,
    validate_params,
)
from .liouvillian import build_averaged_generator
from .observables import (
    SingularGroupVelocityError,
    dip_metrics,
    group_velocity,
    reference_absorption,
    two_level_absorption,
)
from .output import (
    contour_to_csv,
    contour_to_json,
    records_to_csv,
    records_to_json,
    write_text,
)
from .solvers import SingularSteadyStateError
from .stochastic import FAIL, INCONCLUSIVE, PASS, validate_novikov
from .sweep import Axis, SweepSpec, contour_grid, run_sweep

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 1, 2
MC_EXIT = {PASS: 0, FAIL: 3, INCONCLUSIVE: 4}


@dataclass
class RunConfig:
    # system, units of Gamma; f0sq may list several noise strengths
    omega_p_rabi: float = 1e-3
    omega_c_rabi: float = 1.0
    delta: float = 0.0
    gamma1: float = 1.0
    gamma2: float = 0.0
    f0sq: list = field(default_factory=lambda: [0.0])
    omega_mu: float = 600.0
    # medium
    number_density: float = 1e18
    lambda0: float = 780e-9
    gamma_mhz: float = 5.0
    gamma_convention: str = "rad"
    # sweep axes
    delta_min: float = -3.0
    delta_max: float = 3.0
    delta_points: int = 601
    omega_c_min: float = 0.2
    omega_c_max: float = 2.2
    omega_c_points: int = 61
    f0sq_min: float = 0.0
    f0sq_max: float = 2.0
    f0sq_points: int = 41
    groupvel_vs_f0sq: bool = False
    groupvel_deltas: list = field(default_factory=lambda: [0.0, 0.25])
    # Monte Carlo
    n_traj: int = 2000
    t_final: float = 30.0
    dt: float = 1e-4
    seed: int = 0
    # run
    out: str | None = None
    format: str = "csv"
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)

    def system(self, **changes) -> SystemParams:
        values = dict(omega_p_rabi=self.omega_p_rabi, omega_c_rabi=self.omega_c_rabi,
                      delta=self.delta, gamma1=self.gamma1, gamma2=self.gamma2,
                      f0sq=self.f0sq[0], omega_mu=self.omega_mu)
        values.update(changes)
        return SystemParams(**values)

    def medium(self, convention: str | None = None) -> MediumParams:
        return MediumParams(number_density=self.number_density, lambda0=self.lambda0,
                            gamma_hz=gamma_rad_per_s(convention or self.gamma_convention,
                                                     self.gamma_mhz))

    def metadata(self, command: str) -> dict:
        meta = asdict(self)
        meta.pop("out")
        meta.pop("threads")
        meta["command"] = command
        meta["gamma_rad_per_s"] = gamma_rad_per_s(self.gamma_convention, self.gamma_mhz)
        return meta

    def problems(self) -> list[str]:
        out = []
        if self.gamma_convention not in GAMMA_CONVENTIONS:
            out.append(f"gamma_convention must be one of {GAMMA_CONVENTIONS}")
        if self.format not in ("csv", "json"):
            out.append("format must be 'csv' or 'json'")
        if not self.f0sq:
            out.append("f0sq needs at least one value")
        if self.threads < 1:
            out.append("threads must be at least 1")
        if out:
            return out
        for f0sq in self.f0sq:
            out.extend(v for v in validate_params(self.system(f0sq=f0sq)) if v not in out)
        out.extend(validate_medium(self.medium()))
        if self.out is not None and self.out != "-":
            parent = Path(self.out).resolve().parent
            if not parent.is_dir() or not os.access(parent, os.W_OK):
                out.append(f"output directory {parent} is not writable")
        return out


CONFIG_KEYS = {f.name for f in fields(RunConfig)}


def load_config(path: str | None) -> RunConfig:
    config = RunConfig()
    if path is None:
        return config
    data = json.loads(Path(path).read_text())
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for key, value in data.items():
        if key in ("f0sq", "groupvel_deltas") and not isinstance(value, list):
            value = [value]
        setattr(config, key, value)
    return config


def _range(text: str) -> tuple[float, float, int]:
    try:
        lo, hi, n = text.split(":")
        return float(lo), float(hi), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected min:max:n, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat JSON configuration file")
    common.add_argument("--out", help="output file (stdout if omitted)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--f0sq", type=_float_list, help="noise strength(s), e.g. 0,0.7,1.6")
    common.add_argument("--delta", type=float, help="probe detuning (fixed-detuning commands)")
    common.add_argument("--omega-c", type=float, dest="omega_c_rabi", help="coupling Rabi frequency")
    common.add_argument("--omega-p", type=float, dest="omega_p_rabi", help="probe Rabi frequency")
    common.add_argument("--gamma1", type=float)
    common.add_argument("--gamma2", type=float)
    common.add_argument("--delta-range", type=_range, metavar="MIN:MAX:N")
    common.add_argument("--f0sq-range", type=_range, metavar="MIN:MAX:N")
    common.add_argument("--omega-c-range", type=_range, metavar="MIN:MAX:N")
    common.add_argument("--gamma-convention", choices=GAMMA_CONVENTIONS)
    common.add_argument("--threads", type=int)
    common.add_argument("--seed", type=int)

    parser = argparse.ArgumentParser(
        prog="noisy-eit",
        description="Steady-state EIT spectra of a Lambda system with injected white noise.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common], help="absorption/dispersion vs detuning")
    gv = sub.add_parser("groupvel", parents=[common], help="group velocity vs detuning or noise")
    gv.add_argument("--vs-f0sq", action="store_true", dest="groupvel_vs_f0sq",
                    help="sweep noise strength at the detunings in --at-deltas")
    gv.add_argument("--at-deltas", type=_float_list, dest="groupvel_deltas")
    sub.add_parser("contour", parents=[common], help="absorption on the (omega_c, f0sq) plane")
    mc = sub.add_parser("mc-validate", parents=[common],
                        help="Monte-Carlo check of the noise-averaged equations")
    mc.add_argument("--n-traj", type=int)
    mc.add_argument("--t-final", type=float)
    mc.add_argument("--dt", type=float)
    mc.add_argument("--omega-mu", type=float)
    sub.add_parser("dump-generator", parents=[common], help="print the 9x9 generator as CSV")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    config = load_config(args.config)
    for key in ("out", "format", "f0sq", "delta", "omega_c_rabi", "omega_p_rabi", "gamma1",
                "gamma2", "gamma_convention", "threads", "seed", "n_traj", "t_final", "dt",
                "omega_mu", "groupvel_deltas"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(config, key, value)
    if getattr(args, "groupvel_vs_f0sq", False):
        config.groupvel_vs_f0sq = True
    for prefix in ("delta", "f0sq", "omega_c"):
        value = getattr(args, f"{prefix}_range")
        if value is not None:
            lo, hi, n = value
            setattr(config, f"{prefix}_min", lo)
            setattr(config, f"{prefix}_max", hi)
            setattr(config, f"{prefix}_points", n)
    return config


def _write_records(config: RunConfig, command: str, records) -> int:
    meta = config.metadata(command)
    text = (records_to_json if config.format == "json" else records_to_csv)(records, meta)
    write_text(config.out, text)
    hard = [r for r in records if r.error and r.error != "vg-singular"]
    return EXIT_SOLVER if hard else EXIT_OK


def _delta_axis(config: RunConfig) -> Axis:
    return Axis.linear("delta", config.delta_min, config.delta_max, config.delta_points)


def cmd_spectrum(config: RunConfig) -> int:
    medium = config.medium()
    axis = _delta_axis(config)
    records = []
    for f0sq in config.f0sq:
        base = config.system(f0sq=f0sq)
        family = run_sweep(SweepSpec(axis, base=base, medium=medium), config.threads)
        records.extend(family)
        if any(r.error and r.error != "vg-singular" for r in family):
            continue
        background = [two_level_absorption(base.replace(delta=d), medium) for d in axis.values]
        metrics = dip_metrics(axis.values, [r.alpha for r in family], background)
        unit = reference_absorption(base, medium)
        print(f"f0sq={f0sq:g}: alpha(0)={metrics.alpha_center:.6g} 1/m "
              f"({metrics.alpha_center / unit:.6g} arb.), dip depth={metrics.depth:.6g} 1/m, "
              f"dip FWHD={metrics.width:.6g} Gamma (shoulder-referenced "
              f"{metrics.shoulder_width:.6g} Gamma)", file=sys.stderr)
    return _write_records(config, "spectrum", records)


def cmd_groupvel(config: RunConfig) -> int:
    medium = config.medium()
    records = []
    if config.groupvel_vs_f0sq:
        f_axis = Axis.linear("f0sq", config.f0sq_min, config.f0sq_max, config.f0sq_points)
        for delta in config.groupvel_deltas:
            records.extend(run_sweep(SweepSpec(f_axis, base=config.system(delta=delta),
                                               medium=medium), config.threads))
    else:
        for f0sq in config.f0sq:
            records.extend(run_sweep(SweepSpec(_delta_axis(config), base=config.system(f0sq=f0sq),
                                               medium=medium), config.threads))
    for f0sq in config.f0sq:
        params = config.system(f0sq=f0sq, delta=0.0)
        parts = []
        for convention in GAMMA_CONVENTIONS:
            try:
                vg = group_velocity(params, config.medium(convention))
                parts.append(f"{vg:.6g} m/s ({convention})")
            except (SingularGroupVelocityError, SingularSteadyStateError) as exc:
                parts.append(f"undefined ({convention}: {exc})")
        print(f"f0sq={f0sq:g}: V_g(delta=0) = " + ", ".join(parts), file=sys.stderr)
    return _write_records(config, "groupvel", records)


def cmd_contour(config: RunConfig) -> int:
    spec = SweepSpec(Axis.linear("omega_c", config.omega_c_min, config.omega_c_max,
                                 config.omega_c_points),
                     Axis.linear("f0sq", config.f0sq_min, config.f0sq_max, config.f0sq_points),
                     base=config.system(), medium=config.medium())
    grid = contour_grid(spec, config.threads)
    meta = config.metadata("contour")
    meta["note"] = "fixed detuning is an assumption (default 0)"
    text = (contour_to_json if config.format == "json" else contour_to_csv)(grid, meta)
    write_text(config.out, text)
    return EXIT_SOLVER if grid.errors else EXIT_OK


def cmd_mc_validate(config: RunConfig) -> int:
    verdict = validate_novikov(config.system(), n_traj=config.n_traj, t_final=config.t_final,
                               dt=config.dt, base_seed=config.seed)
    print(verdict.to_text(), file=sys.stderr)
    if config.out is not None:
        if config.format == "json":
            payload = dict(verdict.to_dict(), metadata=config.metadata("mc-validate"))
            write_text(config.out, json.dumps(payload, indent=1, sort_keys=True) + "\n")
        else:
            write_text(config.out, verdict.to_text() + "\n")
    return MC_EXIT[verdict.status]


def cmd_dump_generator(config: RunConfig) -> int:
    write_text(config.out, build_averaged_generator(config.system()).to_csv())
    return EXIT_OK


COMMANDS = {
    "spectrum": cmd_spectrum,
    "groupvel": cmd_groupvel,
    "contour": cmd_contour,
    "mc-validate": cmd_mc_validate,
    "dump-generator": cmd_dump_generator,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    problems = config.problems()
    if problems:
        for problem in problems:
            print(f"error: {problem}", file=sys.stderr)
        return EXIT_INVALID
    try:
        return COMMANDS[args.command](config)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (SingularSteadyStateError, np.linalg.LinAlgError, ArithmeticError, RuntimeError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
