import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from noisy_eit.core import MediumParams, SystemParams
from noisy_eit.observables import (
    SingularGroupVelocityError,
    group_velocity,
    optical_response,
    probe_angular_frequency,
    refractive_index,
    refractive_index_slope,
)
from noisy_eit.output import (
    contour_to_csv,
    contour_to_json,
    read_records_csv,
    records_to_csv,
    records_to_json,
)
from noisy_eit.solvers import solve_params
from noisy_eit.sweep import (
    CSV_COLUMNS,
    Axis,
    SweepSpec,
    contour_grid,
    default_contour_spec,
    detuning_spectrum,
    evaluate_point,
    run_sweep,
)

MEDIUM = MediumParams()
PAPER = SystemParams()


def resonant_im_sigma31(f0sq, omega_c, omega_p=1e-3):
    # weak-probe closed form for Gamma1 = 1, Gamma2 = 0, read off the full solve;
    # maximal at f0sq = sqrt(2) omega_c
    return omega_p / (f0sq + 2 * omega_c ** 2 / f0sq + 6 * omega_c ** 2 + 1)


def test_axis_validation():
    assert Axis.linear("delta", 0.5, 0.5, 1).values == (0.5,)
    with pytest.raises(ValueError):
        Axis.linear("delta", 1.0, 0.0, 5)
    with pytest.raises(ValueError):
        Axis.linear("delta", 0.0, 1.0, 0)
    spec = SweepSpec(Axis.linear("delta", 0, 1, 2), Axis.linear("delta", 0, 1, 2))
    assert any("two axes" in p for p in spec.validate())
    assert SweepSpec(Axis.of("gamma1", [1.0])).validate()
    with pytest.raises(ValueError):
        run_sweep(SweepSpec(Axis.of("lambda0", [1.0])))


def test_row_major_order():
    spec = SweepSpec(Axis.of("omega_c", [0.5, 1.0]), Axis.of("f0sq", [0.0, 0.3, 0.6]))
    grid = spec.grid()
    assert [(p.omega_c_rabi, p.f0sq) for p in grid] == [
        (0.5, 0.0), (0.5, 0.3), (0.5, 0.6), (1.0, 0.0), (1.0, 0.3), (1.0, 0.6)]


def test_one_point_grid_equals_single_solve():
    (record,) = run_sweep(SweepSpec(Axis.of("delta", [0.4]), base=PAPER.replace(f0sq=0.7)))
    direct = optical_response(PAPER.replace(delta=0.4, f0sq=0.7), MEDIUM)
    assert record.sigma31 == direct.sigma31 and record.alpha == direct.alpha
    assert record.v_g == direct.v_g


def test_two_by_two_grid_equals_four_solves():
    spec = SweepSpec(Axis.of("omega_c", [0.5, 1.5]), Axis.of("f0sq", [0.2, 1.1]))
    records = run_sweep(spec)
    for record, params in zip(records, spec.grid()):
        assert record.sigma31 == solve_params(params).sigma31


def test_thread_count_does_not_change_output():
    spec = SweepSpec(Axis.linear("delta", -3, 3, 121), base=PAPER.replace(f0sq=0.7))
    meta = {"case": "threads"}
    one = records_to_csv(run_sweep(spec, threads=1), meta)
    four = records_to_csv(run_sweep(spec, threads=4), meta)
    assert one == four


def test_failures_are_flagged_not_raised():
    spec = SweepSpec(Axis.of("omega_c", [0.0, 1.0]))
    records = run_sweep(spec)
    assert records[0].error == "singular-steady-state" and math.isnan(records[0].alpha)
    assert records[1].error is None
    bad = evaluate_point(PAPER.replace(gamma1=-1.0), MEDIUM)
    assert bad.error == "invalid-params"


def vg_denominator(f0sq):
    sigma31, slope = refractive_index_slope(PAPER.replace(f0sq=f0sq), MEDIUM)
    return refractive_index(sigma31, PAPER, MEDIUM) - probe_angular_frequency(0.0, MEDIUM) * slope


def test_singular_group_velocity_keeps_other_outputs():
    # bisect onto the sign change of n_R - omega_p dn_R/dDelta between f0sq = 1.4 and 1.42
    lo, hi = 1.40, 1.42
    for _ in range(60):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if vg_denominator(mid) > 0 else (lo, mid)
    f_star = (lo + hi) / 2
    record = evaluate_point(PAPER.replace(f0sq=f_star), MEDIUM)
    assert record.error == "vg-singular" and math.isnan(record.v_g)
    assert record.alpha > 0
    with pytest.raises(SingularGroupVelocityError):
        group_velocity(PAPER.replace(f0sq=f_star), MEDIUM)


def significant_digits(text):
    mantissa = text.lstrip("-").split("e")[0].replace(".", "")
    return len(mantissa.lstrip("0"))


def test_csv_format():
    records = detuning_spectrum(PAPER, MEDIUM, -1, 1, 5)
    text = records_to_csv(records, {"convention": "rad"})
    lines = text.splitlines()
    assert lines[0].startswith("# ") and json.loads(lines[0][2:])["convention"] == "rad"
    assert lines[1] == ",".join(CSV_COLUMNS)
    assert len(lines) == 7
    first = lines[2].split(",")
    assert first[0] == "-1"
    assert all(significant_digits(v) <= 12 for line in lines[2:] for v in line.split(","))


def test_csv_roundtrip(tmp_path):
    records = detuning_spectrum(PAPER.replace(f0sq=0.7), MEDIUM, -1, 1, 11)
    path = tmp_path / "s.csv"
    path.write_text(records_to_csv(records, {"k": 1}))
    meta, rows = read_records_csv(path)
    assert meta["k"] == 1 and meta["failures"] == []
    assert rows[3]["alpha"] == pytest.approx(records[3].alpha, rel=1e-11)


def test_json_format_uses_null_for_missing():
    records = run_sweep(SweepSpec(Axis.of("omega_c", [0.0, 1.0])))
    payload = json.loads(records_to_json(records, {}))
    assert set(payload["records"][1]) == set(CSV_COLUMNS)
    assert payload["records"][0]["alpha"] is None
    assert payload["metadata"]["failures"] == [{"index": 0, "error": "singular-steady-state"}]


def test_symmetric_grid_symmetry():
    records = detuning_spectrum(PAPER.replace(f0sq=0.7), MEDIUM, -3, 3, 61)
    alpha = np.array([r.alpha for r in records])
    n1 = np.array([r.n_r for r in records]) - 1
    assert np.max(np.abs(alpha - alpha[::-1])) <= 1e-8 * alpha.max()
    assert np.max(np.abs(n1 + n1[::-1])) <= 1e-8 * np.abs(n1).max()


def test_contour_shape_and_dark_row():
    grid = contour_grid(default_contour_spec())
    assert grid.alpha.shape == (61, 41) and grid.delta == 0.0
    assert np.max(np.abs(grid.alpha[:, 0])) <= 1e-9 * np.max(grid.alpha)
    text = contour_to_csv(grid, {})
    assert len(text.splitlines()) == 1 + 1 + 61
    assert len(json.loads(contour_to_json(grid, {}))["alpha"][0]) == 41


def test_contour_alpha_decreases_with_coupling():
    grid = contour_grid(default_contour_spec())
    assert np.all(np.diff(grid.alpha[:, 1:], axis=0) < 0)


def test_contour_alpha_increases_with_noise_below_turnover():
    # alpha(0) rises with f0sq only up to f0sq = sqrt(2) omega_c, then falls
    grid = contour_grid(default_contour_spec())
    for wc, row in zip(grid.omega_c, grid.alpha):
        below = grid.f0sq <= math.sqrt(2) * wc
        assert np.all(np.diff(row[below]) > 0)
        above = grid.f0sq >= math.sqrt(2) * wc + 0.1
        if above.sum() > 1:
            assert np.all(np.diff(row[above]) < 0)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.2, 2.2), st.floats(0.01, 3.0))
def test_resonant_absorption_closed_form(omega_c, f0sq):
    sigma31 = solve_params(PAPER.replace(omega_c_rabi=omega_c, f0sq=f0sq)).sigma31
    expected = resonant_im_sigma31(f0sq, omega_c)
    assert sigma31.imag == pytest.approx(expected, rel=1e-4)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.2, 2.2), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_resonant_absorption_monotone_below_turnover(omega_c, u, v):
    f1, f2 = sorted((u, v))
    assume(f2 - f1 > 1e-3)
    top = math.sqrt(2) * omega_c
    a1, a2 = (solve_params(PAPER.replace(omega_c_rabi=omega_c, f0sq=f * top)).sigma31.imag
              for f in (f1, f2))
    assert a1 < a2


def test_group_velocity_rises_then_turns_negative():
    fs = np.linspace(0.0, 1.35, 28)
    vg = [group_velocity(PAPER.replace(f0sq=f), MEDIUM) for f in fs]
    assert np.all(np.diff(vg) > 0)
    assert group_velocity(PAPER.replace(f0sq=1.6), MEDIUM) < 0
