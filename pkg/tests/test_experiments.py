import math

import numpy as np
import pytest

from misopt import (
    ArcScenarioSpec,
    MisGeometry,
    SolverConfig,
    build_arc_scenario,
    case_study,
    sms_baseline,
    sweep_allocation,
    sweep_ms2_sizes,
    sweep_users_1d2d,
)
from misopt.experiments import (
    allocation_steps,
    results_digest,
    write_case_study_csv,
    write_manifest,
    write_sweep_csv,
    write_users_csv,
)

FAST = SolverConfig(rng_seed=0, num_restarts=1, max_inner_iters=60, max_outer_iters=10)


def test_arc_scenario_endpoints():
    spec = ArcScenarioSpec(geom=MisGeometry(2, 2, 1, 1), num_users=2)
    scenario = build_arc_scenario(spec)
    azimuths = [angles.azimuth for angles, _ in scenario.users]
    np.testing.assert_allclose(azimuths, [-math.pi / 3, math.pi / 3], atol=1e-15)
    assert all(iota == 0.01 for _, iota in scenario.users)
    assert all(angles.elevation == math.pi / 4 for angles, _ in scenario.users)


def test_arc_scenario_uniform_spacing():
    spec3 = ArcScenarioSpec(geom=MisGeometry(2, 2, 1, 1), num_users=3)
    azimuths = [a.azimuth for a, _ in build_arc_scenario(spec3).users]
    np.testing.assert_allclose(azimuths, [-math.pi / 3, 0.0, math.pi / 3], atol=1e-15)

    spec4 = ArcScenarioSpec(geom=MisGeometry(2, 2, 1, 1), num_users=4)
    azimuths = [a.azimuth for a, _ in build_arc_scenario(spec4).users]
    gaps = np.diff(azimuths)
    np.testing.assert_allclose(gaps, 2 * math.pi / 9, atol=1e-15)


def test_arc_scenario_validation():
    with pytest.raises(ValueError):
        ArcScenarioSpec(geom=MisGeometry(2, 2, 1, 1), num_users=0)
    with pytest.raises(ValueError):
        ArcScenarioSpec(
            geom=MisGeometry(2, 2, 1, 1), num_users=2, azimuth_lo=1.0, azimuth_hi=-1.0
        )


def test_sms_baseline_reduces_to_single_pattern():
    spec = ArcScenarioSpec(geom=MisGeometry(2, 2, 1, 1), num_users=2)
    report = sms_baseline(spec, FAST)
    assert report.schedule.shape == (2, 1)
    np.testing.assert_array_equal(report.chosen_pattern, [1, 1])


def test_sms_baseline_single_element_value():
    spec = ArcScenarioSpec(geom=MisGeometry(1, 1, 1, 1), num_users=2)
    report = sms_baseline(spec, FAST)
    assert report.worst_snr == pytest.approx(0.01, rel=1e-9)


def test_sms_baseline_matched_filter_value():
    spec = ArcScenarioSpec(geom=MisGeometry(2, 1, 1, 1), num_users=1)
    report = sms_baseline(spec, SolverConfig(rng_seed=1, num_restarts=2))
    assert report.worst_snr == pytest.approx(0.04, rel=1e-4)


def test_allocation_steps_hand_listed_total_64():
    dims = [
        (g.m_rows, g.m_cols, g.n_rows, g.n_cols) for g in allocation_steps(64, 1)
    ]
    assert dims == [
        (8, 8, 8, 8),
        (8, 7, 2, 4),
        (8, 6, 4, 4),
        (8, 5, 6, 4),
        (8, 4, 8, 4),
    ]
    dims2 = [
        (g.m_rows, g.m_cols, g.n_rows, g.n_cols) for g in allocation_steps(64, 2)
    ]
    assert dims2 == [
        (8, 8, 8, 8),
        (7, 8, 4, 2),
        (6, 8, 4, 4),
        (5, 8, 4, 6),
        (4, 8, 4, 8),
    ]
    # total element count is conserved along both ladders
    for geoms in (allocation_steps(64, 1), allocation_steps(64, 2)):
        for i, geom in enumerate(geoms):
            if i == 0:
                assert geom.num_ms1 == 64
            else:
                assert geom.num_ms1 + geom.num_ms2 == 64


def test_allocation_steps_validation():
    with pytest.raises(ValueError, match="square"):
        allocation_steps(60, 1)
    with pytest.raises(ValueError, match="even"):
        allocation_steps(81, 1)
    with pytest.raises(ValueError, match="scheme"):
        allocation_steps(64, 3)


def test_sweep_allocation_tiny():
    result = sweep_allocation(4, 1, 2, FAST)
    assert result.col_labels == [0, 2]
    assert result.gain[0] == 1.0
    assert np.all(result.mis_snr > 0)
    assert result.cell_labels[0] == "single-layer"


def test_sweep_ms2_tiny_grid_nesting_and_baseline():
    results = sweep_ms2_sizes(2, 2, [2], FAST)
    res = results[2]
    assert res.gain.shape == (2, 2)
    assert res.gain[1, 1] == 1.0  # full-size cell is the baseline itself
    assert np.all(res.gain >= 1.0 - 1e-6)
    assert np.all(res.baseline_snr == res.reports["2x2"].worst_snr)


def test_sweep_ms2_reproducible():
    first = sweep_ms2_sizes(2, 2, [2], FAST)[2]
    second = sweep_ms2_sizes(2, 2, [2], FAST)[2]
    np.testing.assert_array_equal(first.mis_snr, second.mis_snr)
    np.testing.assert_array_equal(first.gain, second.gain)


def test_sweep_users_small():
    sweep = sweep_users_1d2d(
        FAST,
        user_counts=(2, 3),
        one_d=MisGeometry(1, 4, 1, 2),
        two_d=MisGeometry(2, 2, 1, 1),
    )
    assert len(sweep.rows) == 4
    one_d_rows = [r for r in sweep.rows if r.label.startswith("1d")]
    assert [r.num_users for r in one_d_rows] == [2, 3]
    assert all(r.num_patterns == 3 for r in one_d_rows)
    assert all(r.worst_snr > 0 for r in sweep.rows)


def test_case_study_figure_six_improves_on_baseline():
    result = case_study(6, SolverConfig(rng_seed=7, num_restarts=2))
    assert result.snr_table.shape == (4, 2)
    assert result.sms_snr_table.shape == (4, 1)
    assert result.mis.worst_snr > result.sms.worst_snr
    assert set(result.mis.chosen_pattern.tolist()) == {1, 2}


def test_case_study_rejects_unknown_figure():
    with pytest.raises(ValueError):
        case_study(5, FAST)


def test_csv_writers_deterministic(tmp_path):
    result = sweep_allocation(4, 1, 2, FAST)
    path_a = tmp_path / "a.csv"
    path_b = tmp_path / "b.csv"
    write_sweep_csv(result, path_a)
    write_sweep_csv(result, path_b)
    assert path_a.read_bytes() == path_b.read_bytes()
    header = path_a.read_text().splitlines()[0]
    assert header == "geometry,users,seed,baseline_snr,mis_snr,gain"
    assert results_digest([path_a]) == results_digest([path_b])


def test_users_csv_and_manifest(tmp_path):
    sweep = sweep_users_1d2d(
        FAST,
        user_counts=(2,),
        one_d=MisGeometry(1, 4, 1, 2),
        two_d=MisGeometry(2, 2, 1, 1),
    )
    path = tmp_path / "users.csv"
    write_users_csv(sweep, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "config,users,num_patterns,worst_snr,worst_snr_db,seed"
    assert len(lines) == 3

    manifest = tmp_path / "manifest.json"
    write_manifest(
        manifest,
        config={"subcommand": "sweep-users", "seed": 0},
        seed=0,
        digest=results_digest([path]),
        tool_version="0.1.0",
    )
    import json

    payload = json.loads(manifest.read_text())
    assert set(payload) == {"config", "seed", "tool_version", "results_digest"}


def test_case_study_csv_schema(tmp_path):
    result = case_study(6, SolverConfig(rng_seed=7, num_restarts=1))
    path = tmp_path / "case.csv"
    write_case_study_csv(result, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "scheme,user,pattern,snr,snr_db,chosen"
    # 4 users x 2 patterns for the two-layer run plus 4 x 1 for the baseline
    assert len(lines) == 1 + 8 + 4
