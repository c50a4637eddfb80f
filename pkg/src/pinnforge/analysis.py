"""Grid studies over trained trials: error heatmaps, structure sweeps, loss/error regression.

Every study returns plain records and can emit plot-ready CSV.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .activations import Activation
from .autodiff import MlpArchitecture
from .exceptions import InsufficientData
from .io import provenance, write_csv
from .search import (
    SearchReport,
    TrainingRunner,
    TrialRunner,
    _STEP_CODES,
    run_trials,
)
from .trainer import TrainConfig, TrialResult

DESK_STRUCTURES = ((32, 4), (64, 5), (128, 6), (256, 8))
DESK_CHANGING_POINTS = (0.1, 0.3, 0.5)


def analysis_seeds(master_seed: int, n: int) -> list[int]:
    """Initialization seeds shared by every configuration of a study."""
    seq = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, _STEP_CODES["analysis"]])
    return [int(s) for s in seq.generate_state(n, dtype=np.uint64)]


def _runner(problem, sampling, runner, train_cfg, n_test):
    if runner is not None:
        return runner
    from .sampling import sample_points, test_grid

    return TrainingRunner(problem, sample_points(problem, sampling), test_grid(problem, n_test), train_cfg)


@dataclass
class HeatmapCell:
    width: int
    depth: int
    activation: str
    changing_point: float
    min_error: float  # mean over seeds of the smallest error reached
    error_distance: float  # mean over seeds of |best_error - error_at_best_loss|
    error_at_best_loss: float
    best_loss: float
    n_seeds: int


CELL_FIELDS = [f for f in HeatmapCell.__dataclass_fields__]
AGGREGATE_FIELDS = ["activation", "kind", "key", "value"]


@dataclass
class Heatmap:
    cells: list[HeatmapCell]
    aggregates: list[dict]
    trials: list[TrialResult] = field(repr=False)

    def write(self, directory, problem=None, sampling=None, seed=None) -> tuple:
        comment = provenance(problem, sampling, seed)
        cells = write_csv(f"{directory}/heatmap_cells.csv", CELL_FIELDS, [asdict(c) for c in self.cells], comment)
        aggs = write_csv(f"{directory}/heatmap_aggregates.csv", AGGREGATE_FIELDS, self.aggregates, comment)
        return cells, aggs


def make_cell(arch: MlpArchitecture, results: Sequence[TrialResult]) -> HeatmapCell:
    return HeatmapCell(
        width=arch.width,
        depth=arch.depth,
        activation=arch.activation.value,
        changing_point=arch.changing_point,
        min_error=float(np.mean([r.best_error for r in results])),
        error_distance=float(np.mean([abs(r.best_error - r.error_at_best_loss) for r in results])),
        error_at_best_loss=float(np.mean([r.error_at_best_loss for r in results])),
        best_loss=float(np.mean([r.best_loss for r in results])),
        n_seeds=len(results),
    )


def heatmap_aggregates(cells: Sequence[HeatmapCell]) -> list[dict]:
    """Per activation: mean/median/min over cells, and row (changing point) / column (structure) means."""
    out = []
    for act in dict.fromkeys(c.activation for c in cells):
        mine = [c for c in cells if c.activation == act]
        errs = np.array([c.min_error for c in mine])
        out += [
            {"activation": act, "kind": "mean", "key": "all", "value": float(np.mean(errs))},
            {"activation": act, "kind": "median", "key": "all", "value": float(np.median(errs))},
            {"activation": act, "kind": "min", "key": "all", "value": float(np.min(errs))},
        ]
        for cp in dict.fromkeys(c.changing_point for c in mine):
            vals = [c.min_error for c in mine if c.changing_point == cp]
            out.append({"activation": act, "kind": "row_mean", "key": f"cp={cp:g}", "value": float(np.mean(vals))})
        for w, d in dict.fromkeys((c.width, c.depth) for c in mine):
            vals = [c.min_error for c in mine if (c.width, c.depth) == (w, d)]
            out.append({"activation": act, "kind": "column_mean", "key": f"{w}x{d}", "value": float(np.mean(vals))})
    return out


def heatmap_grid(problem, sampling, structures: Sequence[tuple[int, int]] = DESK_STRUCTURES,
                 changing_points: Sequence[float] = DESK_CHANGING_POINTS,
                 activations: Sequence[Activation] = tuple(Activation), seeds: int = 3,
                 runner: TrialRunner | None = None, train_cfg: TrainConfig | None = None,
                 master_seed: int = 0, parallelism: int = 1, n_test: int = 101) -> Heatmap:
    runner = _runner(problem, sampling, runner, train_cfg, n_test)
    seed_list = analysis_seeds(master_seed, seeds)
    archs = [MlpArchitecture(w, d, a, cp)
             for a in activations for cp in changing_points for (w, d) in structures]
    jobs = [(a, s) for a in archs for s in seed_list]
    results = run_trials(runner, jobs, parallelism)
    cells = [make_cell(a, results[i * seeds:(i + 1) * seeds]) for i, a in enumerate(archs)]
    return Heatmap(cells, heatmap_aggregates(cells), results)


@dataclass(frozen=True)
class RegressionSummary:
    slope: float
    intercept: float
    r_squared: float
    n: int


def _usable(trials: Sequence[TrialResult]) -> tuple[np.ndarray, np.ndarray]:
    pairs = [(r.best_loss, r.error_at_best_loss) for r in trials
             if not r.diverged and 0 < r.best_loss < math.inf and 0 < r.error_at_best_loss < math.inf]
    if len(pairs) < 3:
        raise InsufficientData(f"need at least 3 usable trials, got {len(pairs)}")
    arr = np.log10(np.array(pairs))
    return arr[:, 0], arr[:, 1]


def _ols(x, y) -> RegressionSummary:
    if np.ptp(x) == 0:
        raise InsufficientData("all losses identical; regression undefined")
    fit = stats.linregress(x, y)
    return RegressionSummary(float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2), len(x))


def loss_error_regression(trials: Sequence[TrialResult]) -> RegressionSummary:
    """Least squares of log10(error at best loss) on log10(best loss)."""
    return _ols(*_usable(trials))


def permutation_control(trials: Sequence[TrialResult], seed: int = 0) -> RegressionSummary:
    """The same regression after randomly re-pairing losses with errors."""
    x, y = _usable(trials)
    rng = np.random.default_rng(seed)
    return _ols(x, y[rng.permutation(len(y))])


SWEEP_FIELDS = ["width", "depth", "activation", "changing_point", "mean_best_error", "n_seeds"]


def structure_error_sweep(problem, sampling, activation, changing_point: float, widths: Sequence[int],
                          depths: Sequence[int], seeds: int = 3, runner: TrialRunner | None = None,
                          train_cfg: TrainConfig | None = None, master_seed: int = 0, parallelism: int = 1,
                          n_test: int = 101) -> list[dict]:
    """Mean best error over seeds for every (width, depth) pair."""
    if not widths or not depths:
        raise ValueError("widths and depths must be non-empty")
    runner = _runner(problem, sampling, runner, train_cfg, n_test)
    seed_list = analysis_seeds(master_seed, seeds)
    act = Activation.parse(activation)
    archs = [MlpArchitecture(w, d, act, changing_point) for w, d in itertools.product(widths, depths)]
    results = run_trials(runner, [(a, s) for a in archs for s in seed_list], parallelism)
    rows = []
    for i, a in enumerate(archs):
        group = results[i * seeds:(i + 1) * seeds]
        rows.append({
            "width": a.width, "depth": a.depth, "activation": act.value, "changing_point": changing_point,
            "mean_best_error": float(np.mean([r.best_error for r in group])), "n_seeds": seeds,
        })
    return rows


def comparison_summary(reports: Sequence[SearchReport | dict]) -> list[dict]:
    """Best and worst per-candidate median error, per (method, problem, sampling)."""
    groups: dict[tuple, list[float]] = {}
    for rep in reports:
        d = rep.to_dict() if isinstance(rep, SearchReport) else rep
        if not d.get("verification"):
            raise ValueError(f"report for {d.get('method')} has no verification statistics")
        key = (d["method"], d.get("problem"), d.get("sampling"))
        groups.setdefault(key, []).extend(
            math.inf if v["median_best_error"] is None else v["median_best_error"] for v in d["verification"]
        )
    return [
        {"method": m, "problem": p, "sampling": s, "best_median_error": min(v), "worst_median_error": max(v),
         "n_candidates": len(v)}
        for (m, p, s), v in groups.items()
    ]
