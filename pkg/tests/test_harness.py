"""Experiment harness tests: seeds, summaries, IQR, export round-trips."""

import json
import math

import numpy as np
import pytest

from dxnesici.harness import (
    CellSummary,
    ExperimentSpec,
    TrialRow,
    derive_trial_seed,
    export_results,
    iqr,
    read_trials_csv,
    run_experiment,
    run_trial,
    summarize_rows,
    write_trials_csv,
)


def small_spec(**kw):
    base = dict(
        function="sphere-onemax",
        n=4,
        variant="dxnesici",
        lambdas=(4, 6),
        trials=3,
        seed=7,
        out_dir=None,
    )
    base.update(kw)
    return ExperimentSpec(**base)


# -- seeds ---------------------------------------------------------------------


def test_derived_seeds_are_stable_and_distinct():
    s1 = derive_trial_seed(1, "sphere-onemax", 8, 0)
    s2 = derive_trial_seed(1, "sphere-onemax", 8, 0)
    assert s1 == s2
    assert derive_trial_seed(1, "sphere-onemax", 8, 1) != s1
    assert derive_trial_seed(1, "sphere-onemax", 10, 0) != s1
    assert derive_trial_seed(2, "sphere-onemax", 8, 0) != s1
    assert derive_trial_seed(1, "nint-tablet", 8, 0) != s1


def test_variant_not_part_of_seed():
    # ablation variants share streams on the same (problem, lambda, trial)
    assert derive_trial_seed(1, "nint-tablet", 8, 0) == derive_trial_seed(
        1, "nint-tablet", 8, 0
    )


# -- iqr -----------------------------------------------------------------------


def test_iqr_linear_interpolation_convention():
    assert iqr([10, 20, 30, 40]) == pytest.approx(15.0)


def test_iqr_single_sample_zero():
    assert iqr([1962]) == 0.0


def test_iqr_rejects_empty():
    with pytest.raises(ValueError):
        iqr([])


# -- summaries -----------------------------------------------------------------


def rows_for(lam, evals, successes):
    return [
        TrialRow(
            function="f", n=4, variant="v", lam=lam, trial=i, seed=i,
            success=s, evals=e, best_f=0.0 if s else 1.0,
            reason="success" if s else "eval_budget",
        )
        for i, (e, s) in enumerate(zip(evals, successes))
    ]


def test_best_cell_ties_break_on_mean_evals():
    rows = rows_for(6, [3000, 3000], [True, True]) + rows_for(8, [2500, 2500], [True, True])
    cells, best = summarize_rows(rows)
    assert best.lam == 8
    assert [c.lam for c in cells] == [6, 8]


def test_best_cell_prefers_success_count():
    rows = rows_for(6, [100, 100], [True, False]) + rows_for(8, [9000, 9000], [True, True])
    _, best = summarize_rows(rows)
    assert best.lam == 8


def test_summary_marks_empty_cells_absent():
    rows = rows_for(6, [100, 100], [False, False])
    cells, best = summarize_rows(rows)
    assert cells[0].n_success == 0
    assert cells[0].mean_evals is None and cells[0].iqr_evals is None


# -- trials and experiments ------------------------------------------------------


def test_run_trial_replays_from_derived_seed():
    seed = derive_trial_seed(3, "sphere-onemax", 6, 2)
    r1 = run_trial("sphere-onemax", 4, "dxnesici", 6, seed)
    r2 = run_trial("sphere-onemax", 4, "dxnesici", 6, seed)
    assert r1.evaluations_used == r2.evaluations_used
    assert r1.best_f == r2.best_f
    np.testing.assert_array_equal(r1.best_x_bar, r2.best_x_bar)


def test_run_experiment_bit_exact_rerun():
    spec = small_spec()
    res1, res2 = run_experiment(spec), run_experiment(spec)
    assert res1.rows == res2.rows
    assert res1.cells == res2.cells and res1.best == res2.best


def test_run_experiment_parallel_matches_serial():
    spec = small_spec()
    serial = run_experiment(spec)
    parallel = run_experiment(small_spec(jobs=2))
    assert serial.rows == parallel.rows


def test_single_trial_rerun_matches_experiment_row():
    spec = small_spec()
    res = run_experiment(spec)
    row = res.rows[4]
    replay = run_trial(spec.function, spec.n, spec.variant, row.lam, row.seed)
    assert replay.evaluations_used == row.evals
    assert replay.best_f == row.best_f
    assert replay.terminated_as.value == row.reason


def test_experiment_rows_sorted():
    res = run_experiment(small_spec(jobs=2))
    keys = [(r.lam, r.trial) for r in res.rows]
    assert keys == sorted(keys)


# -- export ---------------------------------------------------------------------


def test_csv_round_trip(tmp_path):
    spec = small_spec()
    res = run_experiment(spec)
    path = tmp_path / "trials.csv"
    write_trials_csv(res.rows, path)
    back = read_trials_csv(path)
    assert back == res.rows


def test_summaries_recomputable_from_csv(tmp_path):
    spec = small_spec()
    res = run_experiment(spec)
    paths = export_results(res, tmp_path)
    back = read_trials_csv(paths["trials"])
    cells, best = summarize_rows(back)
    assert cells == res.cells and best == res.best
    payload = json.loads(paths["summary"].read_text())
    assert payload["best"]["lambda"] == res.best.lam
    assert len(payload["cells"]) == len(res.cells)


def test_empty_rows_csv_has_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    write_trials_csv([], path)
    lines = path.read_text().strip().splitlines()
    assert len(lines) == 1
    assert lines[0].split(",")[0] == "function"


def test_float_formatting_17_digits(tmp_path):
    rows = rows_for(6, [100], [True])
    rows = [row.__class__(**{**row.__dict__, "best_f": 1 / 3}) for row in rows]
    path = tmp_path / "t.csv"
    write_trials_csv(rows, path)
    assert "0.33333333333333331" in path.read_text()
    assert read_trials_csv(path)[0].best_f == 1 / 3


def test_trace_export(tmp_path):
    spec = small_spec(trace=True, trials=1, lambdas=(4,))
    res = run_experiment(spec)
    paths = export_results(res, tmp_path)
    trace_files = sorted(paths["traces"].glob("*.csv"))
    assert len(trace_files) == 1
    header = trace_files[0].read_text().splitlines()[0].split(",")
    assert header[:5] == ["g", "evals", "sigma", "p_norm", "best_f"]
    assert "m_0" in header and "scale_3" in header and "leaps" in header


def test_export_error_has_offending_path():
    spec = small_spec(trials=1, lambdas=(4,))
    res = run_experiment(spec)
    with pytest.raises(OSError, match="/proc"):
        export_results(res, "/proc/nope")


# -- spec validation --------------------------------------------------------------


def test_spec_validation():
    with pytest.raises(ValueError):
        small_spec(trials=0)
    with pytest.raises(ValueError):
        small_spec(lambdas=())
    with pytest.raises(ValueError):
        small_spec(lambdas=(5,))
