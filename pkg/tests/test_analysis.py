import math
from dataclasses import asdict

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import SyntheticRunner, fake_result
from pinnforge import analysis
from pinnforge.autodiff import MlpArchitecture
from pinnforge.exceptions import InsufficientData
from pinnforge.io import read_csv
from pinnforge.problems import get_problem
from pinnforge.search import SearchSpace, auto_pinn

REACTION = get_problem("reaction")
ARCH = MlpArchitecture(8, 3)


def _pairs(losses, errors):
    return [fake_result(ARCH, l, e) for l, e in zip(losses, errors)]


@given(st.floats(-3, 3), st.floats(-5, 5))
def test_regression_recovers_line(a, b):
    loss = np.logspace(-6, 0, 12)
    errors = 10 ** (a * np.log10(loss) + b)
    fit = analysis.loss_error_regression(_pairs(loss, errors))
    assert fit.slope == pytest.approx(a, abs=1e-10)
    assert fit.intercept == pytest.approx(b, abs=1e-10)
    assert 0 <= fit.r_squared <= 1 + 1e-12


def test_regression_examples():
    loss = np.logspace(-5, -1, 9)
    fit = analysis.loss_error_regression(_pairs(loss, loss))
    assert fit.slope == pytest.approx(1.0, abs=1e-12) and fit.r_squared == pytest.approx(1.0, abs=1e-12)
    fit = analysis.loss_error_regression(_pairs(loss, 3.0 * loss**0.5))
    assert fit.slope == pytest.approx(0.5, abs=1e-12)


def test_regression_skips_diverged_and_needs_data():
    trials = _pairs([1e-3, 1e-2], [1e-2, 1e-1]) + [fake_result(ARCH, 0, diverged=True)]
    with pytest.raises(InsufficientData):
        analysis.loss_error_regression(trials)
    with pytest.raises(InsufficientData):
        analysis.loss_error_regression(_pairs([1e-3] * 4, [1e-2, 2e-2, 3e-2, 4e-2]))


def test_permutation_control_lower():
    rng = np.random.default_rng(0)
    loss = 10 ** rng.uniform(-6, -1, 24)
    err = 10 ** (0.5 * np.log10(loss) + 0.1 * rng.standard_normal(24))
    trials = _pairs(loss, err)
    fit, control = analysis.loss_error_regression(trials), analysis.permutation_control(trials, seed=0)
    assert fit.r_squared > 0.9 and control.r_squared < fit.r_squared
    assert control == analysis.permutation_control(trials, seed=0)


def _heatmap_runner():
    return SyntheticRunner(lambda a: a.width * a.depth * (1 + a.changing_point) / 1e4,
                           error=lambda a, s: a.width / 1000 + (s % 7) / 1e4)


def test_heatmap_counts_and_aggregates():
    runner = _heatmap_runner()
    hm = analysis.heatmap_grid(REACTION, None, runner=runner)
    assert len(hm.cells) == 48 and len(runner.calls) == 144 and len(hm.trials) == 144
    assert analysis.heatmap_aggregates(hm.cells) == hm.aggregates
    for act in {c.activation for c in hm.cells}:
        mine = [c.min_error for c in hm.cells if c.activation == act]
        agg = {(a["kind"], a["key"]): a["value"] for a in hm.aggregates if a["activation"] == act}
        assert agg[("median", "all")] == float(np.median(mine))
        assert agg[("min", "all")] == min(mine)
        assert agg[("mean", "all")] == float(np.mean(mine))
        col = [c.min_error for c in hm.cells if c.activation == act and (c.width, c.depth) == (64, 5)]
        assert agg[("column_mean", "64x5")] == float(np.mean(col))
    assert all(c.error_distance >= 0 and c.n_seeds == 3 for c in hm.cells)


def test_heatmap_exact_stub():
    hm = analysis.heatmap_grid(REACTION, None, structures=[(8, 3)], changing_points=[0.5], activations=["tanh"],
                               runner=SyntheticRunner(lambda a: 0.0, error=lambda a, s: 0.0))
    assert [(c.min_error, c.error_distance) for c in hm.cells] == [(0.0, 0.0)]


def test_heatmap_csv_roundtrip(tmp_path):
    hm = analysis.heatmap_grid(REACTION, None, runner=_heatmap_runner(), seeds=2)
    cells_path, aggs_path = hm.write(tmp_path, "reaction", "reaction/random", 0)
    comments, rows = read_csv(cells_path)
    assert comments[0].startswith("# problem=reaction, sampling=reaction/random, seed=0, git=")
    assert rows == [asdict(c) for c in hm.cells]
    _, agg_rows = read_csv(aggs_path)
    assert [r["value"] for r in agg_rows] == [a["value"] for a in hm.aggregates]


def test_heatmap_uses_shared_seeds():
    runner = SyntheticRunner(lambda a: 1.0)
    analysis.heatmap_grid(REACTION, None, structures=[(8, 3), (12, 4)], runner=runner, seeds=3, master_seed=4)
    seeds = analysis.analysis_seeds(4, 3)
    assert [s for _, s in runner.calls[:3]] == seeds and [s for _, s in runner.calls[3:6]] == seeds


def test_sweep_examples():
    runner = SyntheticRunner(lambda a: 0.1, error=lambda a, s: float(a.width))
    rows = analysis.structure_error_sweep(REACTION, None, "tanh", 0.5, [16], [3], runner=runner)
    assert len(rows) == 1 and len(runner.calls) == 3 and rows[0]["mean_best_error"] == 16.0
    rows = analysis.structure_error_sweep(REACTION, None, "relu", 0.3, [8, 12, 16], [3, 4],
                                          runner=SyntheticRunner(lambda a: 0.1, error=lambda a, s: float(a.width)))
    assert len(rows) == 6 and [r["mean_best_error"] for r in rows] == [8.0, 8.0, 12.0, 12.0, 16.0, 16.0]
    with pytest.raises(ValueError):
        analysis.structure_error_sweep(REACTION, None, "tanh", 0.5, [], [3], runner=runner)


def _fake_report(method, medians):
    return {"method": method, "problem": "reaction", "sampling": "reaction/random",
            "verification": [{"median_best_error": m} for m in medians]}


def test_comparison_summary_examples():
    one = analysis.comparison_summary([_fake_report("autopinn", [0.2])])[0]
    assert one["best_median_error"] == one["worst_median_error"] == 0.2
    two = analysis.comparison_summary([_fake_report("autopinn", [0.1, 0.5])])[0]
    assert (two["best_median_error"], two["worst_median_error"]) == (0.1, 0.5)
    rows = analysis.comparison_summary([_fake_report("autopinn", [0.1]), _fake_report("random", [0.3, None])])
    assert [(r["method"], r["best_median_error"], r["worst_median_error"]) for r in rows] == [
        ("autopinn", 0.1, 0.1), ("random", 0.3, math.inf)]
    with pytest.raises(ValueError):
        analysis.comparison_summary([{"method": "x", "verification": []}])


@given(st.lists(st.floats(0, 10), min_size=1, max_size=6), st.floats(0, 10))
def test_adding_worse_candidate_never_improves_best(medians, extra):
    before = analysis.comparison_summary([_fake_report("m", medians)])[0]["best_median_error"]
    after = analysis.comparison_summary([_fake_report("m", medians + [max(medians) + extra])])[0]
    assert after["best_median_error"] == before


def test_comparison_accepts_report_objects():
    rep = auto_pinn(REACTION, None, trial_runner=SyntheticRunner(lambda a: a.width / 100))
    row = analysis.comparison_summary([rep])[0]
    assert row["method"] == "autopinn" and row["n_candidates"] == 5
