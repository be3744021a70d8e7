"""Scenario loading, validation, calendars, and synthetic generation."""
import os

import numpy as np
import pytest

from conftest import constant_chronics, triangle_grid
from gridops.chronics import (
    MixConfig,
    calendar_at,
    forecast_at,
    frame_at,
    generate_synthetic,
    load_scenario,
    renewable_energy_share,
    save_scenario,
)
from gridops.exceptions import ChronicsError


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _write_minimal_scenario(directory, steps=4, gen=60.0, load=60.0):
    os.makedirs(directory, exist_ok=True)
    _write_csv(os.path.join(directory, "load_p.csv"), ["load_000"], [[load]] * steps)
    _write_csv(os.path.join(directory, "load_q.csv"), ["load_000"], [[5.0]] * steps)
    _write_csv(os.path.join(directory, "prod_p.csv"), ["gen_000"], [[gen]] * steps)
    _write_csv(os.path.join(directory, "prod_v.csv"), ["gen_000"], [[1.0]] * steps)


def test_load_scenario_minimal(tmp_path, case2):
    _write_minimal_scenario(tmp_path)
    ch = load_scenario(str(tmp_path), case2)
    assert ch.step_count == 4
    assert ch.load_ids == ("load_000",)
    assert ch.forecast_load_p is None
    assert ch.maintenance == ()


def test_row_count_mismatch_names_file(tmp_path):
    _write_minimal_scenario(tmp_path)
    _write_csv(os.path.join(tmp_path, "prod_p.csv"), ["gen_000"], [[60.0]] * 3)
    with pytest.raises(ChronicsError, match="prod_p.csv"):
        load_scenario(str(tmp_path))


def test_missing_series_file_is_an_error(tmp_path):
    _write_minimal_scenario(tmp_path)
    os.remove(os.path.join(tmp_path, "prod_v.csv"))
    with pytest.raises(ChronicsError, match="prod_v.csv"):
        load_scenario(str(tmp_path))


def test_maintenance_windows_parse(tmp_path, case2):
    _write_minimal_scenario(tmp_path)
    with open(os.path.join(tmp_path, "maintenance.csv"), "w", encoding="utf-8") as fh:
        fh.write("line_id,start_step,end_step\nline_000,1,3\n")
    ch = load_scenario(str(tmp_path), case2)
    assert ch.maintenance == (("line_000", 1, 3),)


def test_maintenance_bad_header_rejected(tmp_path):
    _write_minimal_scenario(tmp_path)
    with open(os.path.join(tmp_path, "maintenance.csv"), "w", encoding="utf-8") as fh:
        fh.write("line,begin,finish\nline_000,1,3\n")
    with pytest.raises(ChronicsError, match="header"):
        load_scenario(str(tmp_path))


def test_maintenance_window_out_of_range(tmp_path):
    _write_minimal_scenario(tmp_path, steps=4)
    with open(os.path.join(tmp_path, "maintenance.csv"), "w", encoding="utf-8") as fh:
        fh.write("line_id,start_step,end_step\nline_000,2,9\n")
    with pytest.raises(ChronicsError, match="window"):
        load_scenario(str(tmp_path))


def test_bind_rejects_unknown_generator(tmp_path, case2):
    _write_minimal_scenario(tmp_path)
    _write_csv(os.path.join(tmp_path, "prod_p.csv"), ["gen_unknown"], [[60.0]] * 4)
    _write_csv(os.path.join(tmp_path, "prod_v.csv"), ["gen_unknown"], [[1.0]] * 4)
    with pytest.raises(ChronicsError):
        load_scenario(str(tmp_path), case2)


def test_bind_rejects_generation_shortfall(tmp_path, case2):
    _write_minimal_scenario(tmp_path, gen=40.0, load=60.0)
    with pytest.raises(ChronicsError, match="step"):
        load_scenario(str(tmp_path), case2)


def test_frame_and_persistence_forecast():
    model = triangle_grid()
    ch = constant_chronics(model, 5, 90.0)
    frame = frame_at(ch, 2)
    fc = forecast_at(ch, 2)
    assert np.array_equal(frame.load_p, fc.load_p)
    assert np.array_equal(frame.gen_p, fc.gen_p)
    with pytest.raises(IndexError):
        frame_at(ch, 5)
    with pytest.raises(IndexError):
        forecast_at(ch, -1)


def test_forecast_columns_win_over_persistence(case5):
    ch = generate_synthetic(case5, MixConfig(renewable_share=0.10, seed=0, days=1))
    fc = forecast_at(ch, 10)
    assert np.array_equal(fc.load_p, ch.forecast_load_p[10])
    assert not np.array_equal(fc.load_p, ch.load_p[10])


def test_calendar_monday_start():
    model = triangle_grid()
    ch = constant_chronics(model, 2016, 90.0)
    assert calendar_at(ch, 0) == (1, 0, 0, 0)
    assert calendar_at(ch, 1) == (1, 0, 0, 5)
    assert calendar_at(ch, 288) == (1, 1, 0, 0)  # Tuesday midnight
    assert calendar_at(ch, 289) == (1, 1, 0, 5)
    assert calendar_at(ch, 6 * 288 + 277) == (1, 6, 23, 5)


def test_save_load_round_trip(tmp_path, case5):
    ch = generate_synthetic(case5, MixConfig(renewable_share=0.20, seed=3, days=1))
    save_scenario(ch, str(tmp_path / "s"))
    back = load_scenario(str(tmp_path / "s"), case5)
    assert back.step_count == ch.step_count
    assert np.array_equal(back.load_p, ch.load_p)
    assert np.array_equal(back.gen_p, ch.gen_p)
    assert np.array_equal(back.forecast_load_p, ch.forecast_load_p)
    assert np.array_equal(back.forecast_gen_p, ch.forecast_gen_p)
    assert back.maintenance == ch.maintenance


def test_generation_is_seed_deterministic(case5):
    a = generate_synthetic(case5, MixConfig(renewable_share=0.15, seed=9, days=1))
    b = generate_synthetic(case5, MixConfig(renewable_share=0.15, seed=9, days=1))
    c = generate_synthetic(case5, MixConfig(renewable_share=0.15, seed=10, days=1))
    assert np.array_equal(a.load_p, b.load_p)
    assert np.array_equal(a.gen_p, b.gen_p)
    assert not np.array_equal(a.load_p, c.load_p)


def test_mix_config_bounds():
    with pytest.raises(ValueError):
        MixConfig(renewable_share=0.04)
    with pytest.raises(ValueError):
        MixConfig(renewable_share=0.41)
    with pytest.raises(ValueError):
        MixConfig(renewable_share=0.2, days=0)


@pytest.mark.parametrize("share", [0.10, 0.30])
def test_realized_share_within_three_points(case5, share):
    ch = generate_synthetic(case5, MixConfig(renewable_share=share, seed=4, days=2))
    assert abs(renewable_energy_share(ch, case5) - share) <= 0.03


def test_generated_series_respect_unit_envelopes(case5):
    ch = generate_synthetic(case5, MixConfig(renewable_share=0.25, seed=6, days=2))
    p_max = case5.gen_p_max
    assert (ch.gen_p >= -1e-9).all()
    assert (ch.gen_p <= p_max[None, :] + 1e-9).all()
    disp = case5.gen_dispatchable
    deltas = np.diff(ch.gen_p[:, disp], axis=0)
    up = case5.gen_ramp_up[disp]
    down = case5.gen_ramp_down[disp]
    assert (deltas <= up[None, :] + 1e-9).all()
    assert (-deltas <= down[None, :] + 1e-9).all()
    assert (ch.load_p > 0).all()


def test_generation_requires_renewables():
    model = triangle_grid()  # thermal only
    with pytest.raises(ChronicsError):
        generate_synthetic(model, MixConfig(renewable_share=0.10, seed=0, days=1))
