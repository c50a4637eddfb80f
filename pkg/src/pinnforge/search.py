"""Architecture search: the decoupled step-wise pipeline and a random-search baseline.

Both searches minimize the best training loss a trial reaches.  A trial
runner is any callable ``runner(arch, seed) -> TrialResult``; the default
one trains a :class:`~pinnforge.estimator.PinnRegressor`.
"""
from __future__ import annotations

import itertools
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from sklearn.base import clone

from .activations import Activation
from .autodiff import MlpArchitecture
from .exceptions import AllDiverged
from .problems import PdeProblem
from .sampling import PointSet, SamplingSpec, TestGrid
from .trainer import TrainConfig, TrialResult

log = logging.getLogger(__name__)

DEPTHS = tuple(range(3, 11))
CHANGING_POINTS = (0.1, 0.2, 0.3, 0.4, 0.5)
DEFAULT_CHANGING_POINT = 0.5

TrialRunner = Callable[[MlpArchitecture, int], TrialResult]

# stream ids for per-trial seed derivation
_STEP_CODES = {"step1": 1, "step2.1": 2, "step2.2": 3, "step3": 4, "step4": 5, "random": 6, "analysis": 7}


def derive_seed(master_seed: int, step: str, index: int) -> int:
    """64-bit trial seed from ``(master_seed, step, index)``; independent of execution order."""
    seq = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, _STEP_CODES[step], int(index)])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class SearchSpace:
    widths: tuple[int, ...]
    depths: tuple[int, ...] = DEPTHS
    activations: tuple[Activation, ...] = tuple(Activation)
    changing_points: tuple[float, ...] = CHANGING_POINTS

    @classmethod
    def for_problem(cls, problem: PdeProblem) -> "SearchSpace":
        return cls(tuple(problem.widths))

    @property
    def size(self) -> int:
        return len(self.widths) * len(self.depths) * len(self.activations) * len(self.changing_points)

    def __iter__(self):
        for w, d, a, cp in itertools.product(self.widths, self.depths, self.activations, self.changing_points):
            yield MlpArchitecture(w, d, a, cp)

    def __contains__(self, arch: MlpArchitecture) -> bool:
        return (arch.width in self.widths and arch.depth in self.depths
                and arch.activation in self.activations and arch.changing_point in self.changing_points)

    def width_intervals(self, n_intervals: int) -> list[tuple[int, ...]]:
        """Contiguous width blocks; earlier blocks take the remainder (63 -> 8*7 + 7)."""
        return [tuple(int(w) for w in block) for block in np.array_split(np.array(self.widths), n_intervals)]

    def geometric_widths(self, n: int) -> list[int]:
        """``n`` widths spaced geometrically over the width range, snapped to the grid."""
        lo, hi = self.widths[0], self.widths[-1]
        targets = [lo * (hi / lo) ** (k / (n - 1)) for k in range(n)] if n > 1 else [lo]
        return _dedupe(_snap(self.widths, v) for v in targets)

    def uniform_depths(self, n: int) -> list[int]:
        targets = np.linspace(self.depths[0], self.depths[-1], n) if n > 1 else [self.depths[0]]
        return _dedupe(_snap(self.depths, v) for v in targets)


def _snap(grid: Sequence[int], value: float) -> int:
    # nearest grid point; exact ties go to the smaller value
    return min(grid, key=lambda g: (abs(g - value), g))


def _dedupe(values) -> list[int]:
    out = []
    for v in values:
        if v not in out:
            out.append(v)
    return out


@dataclass(frozen=True)
class SearchConfig:
    k_candidates: int = 5
    n_act_widths: int = 3
    n_act_depths: int = 3
    n_intervals: int = 8
    samples_per_interval: int = 3
    top_intervals: int = 2
    verify_repeats: int = 5
    master_seed: int = 0
    parallelism: int = 1


@dataclass
class LoggedTrial:
    step: str
    result: TrialResult

    def row(self, timing: bool = True) -> dict:
        r = self.result
        row = {
            "step": self.step,
            "width": r.arch.width,
            "depth": r.arch.depth,
            "activation": r.arch.activation.value,
            "changing_point": r.arch.changing_point,
            "seed": r.seed,
            "best_loss": r.best_loss,
            "error_at_best_loss": r.error_at_best_loss,
            "best_error": r.best_error,
            "diverged": r.diverged,
        }
        if timing:
            row["wall_time"] = r.wall_time
        return row


@dataclass
class SearchReport:
    method: str
    problem: str | None = None
    sampling: str | None = None
    master_seed: int = 0
    chosen_activation: Activation | None = None
    interval_scores: list[float] = field(default_factory=list)
    intervals: list[tuple[int, ...]] = field(default_factory=list)
    top_intervals: list[int] = field(default_factory=list)
    candidate_structures: list[dict] = field(default_factory=list)
    candidates: list[MlpArchitecture] = field(default_factory=list)
    verification: list[dict] = field(default_factory=list)
    trial_log: list[LoggedTrial] = field(default_factory=list)
    step_counts: dict[str, int] = field(default_factory=dict)

    @property
    def total_trials(self) -> int:
        """Search trials, excluding verification retrains."""
        return sum(n for step, n in self.step_counts.items() if step != "step4")

    def to_dict(self, timing: bool = False) -> dict:
        def num(v):
            return float(v) if math.isfinite(v) else None

        return {
            "method": self.method,
            "problem": self.problem,
            "sampling": self.sampling,
            "master_seed": self.master_seed,
            "chosen_activation": self.chosen_activation.value if self.chosen_activation else None,
            "interval_scores": [num(v) for v in self.interval_scores],
            "intervals": [list(iv) for iv in self.intervals],
            "top_intervals": list(self.top_intervals),
            "candidate_structures": [
                {**c, "best_loss": num(c["best_loss"])} for c in self.candidate_structures
            ],
            "candidates": [a.to_dict() for a in self.candidates],
            "verification": [
                {**v, "arch": v["arch"].to_dict(),
                 "best_errors": [num(e) for e in v["best_errors"]],
                 "errors_at_best_loss": [num(e) for e in v["errors_at_best_loss"]],
                 "median_best_error": num(v["median_best_error"]),
                 "median_error_at_best_loss": num(v["median_error_at_best_loss"])}
                for v in self.verification
            ],
            "step_counts": dict(self.step_counts),
            "total_trials": self.total_trials,
            "trial_log": [
                {k: (num(v) if isinstance(v, float) else v) for k, v in t.row(timing).items()}
                for t in self.trial_log
            ],
        }

    def _log(self, step: str, results: Sequence[TrialResult]):
        self.trial_log.extend(LoggedTrial(step, r) for r in results)
        self.step_counts[step] = self.step_counts.get(step, 0) + len(results)


def default_parallelism() -> int:
    env = os.environ.get("PINNFORGE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_trials(runner: TrialRunner, jobs: Sequence[tuple[MlpArchitecture, int]], parallelism: int = 1) -> list[TrialResult]:
    """Run ``jobs`` and return their results in job order."""
    if parallelism <= 1 or len(jobs) <= 1:
        return [runner(arch, seed) for arch, seed in jobs]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(lambda job: runner(*job), jobs))


def median_objective(results: Sequence[TrialResult]) -> float:
    """Median search objective; diverged trials count as +inf."""
    if not results:
        return math.inf
    return float(np.median([r.objective for r in results]))


def _jobs(archs, cfg: SearchConfig, step: str, offset: int = 0):
    return [(a, derive_seed(cfg.master_seed, step, offset + i)) for i, a in enumerate(archs)]


def step1_activation(space: SearchSpace, cfg: SearchConfig, trial_runner: TrialRunner,
                     report: SearchReport | None = None) -> Activation:
    """Pick the activation with the smallest median objective over a width x depth probe set."""
    widths = space.geometric_widths(cfg.n_act_widths)
    depths = space.uniform_depths(cfg.n_act_depths)
    archs = [MlpArchitecture(w, d, act, DEFAULT_CHANGING_POINT)
             for act in space.activations for w in widths for d in depths]
    results = run_trials(trial_runner, _jobs(archs, cfg, "step1"), cfg.parallelism)
    if report is not None:
        report._log("step1", results)
    if all(r.diverged for r in results):
        raise AllDiverged("every activation probe diverged")
    scores = {act: median_objective([r for r in results if r.arch.activation is act]) for act in space.activations}
    order = {act: i for i, act in enumerate(space.activations)}
    chosen = min(space.activations, key=lambda a: (scores[a], order[a]))
    log.info("step 1: activation scores %s -> %s", {a.value: s for a, s in scores.items()}, chosen.value)
    return chosen


def step2a_width_regions(space: SearchSpace, cfg: SearchConfig, activation: Activation, trial_runner: TrialRunner,
                         report: SearchReport | None = None) -> list[int]:
    """Indices of the best ``top_intervals`` width intervals, best first."""
    intervals = space.width_intervals(cfg.n_intervals)
    depths = space.uniform_depths(cfg.n_act_depths)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.master_seed & 0xFFFFFFFFFFFFFFFF,
                                                         _STEP_CODES["step2.1"], 0]))
    archs, owner = [], []
    for k, block in enumerate(intervals):
        n = min(cfg.samples_per_interval, len(block))
        picked = sorted(int(w) for w in rng.choice(block, size=n, replace=False))
        for w in picked:
            for d in depths:
                archs.append(MlpArchitecture(w, d, activation, DEFAULT_CHANGING_POINT))
                owner.append(k)
    results = run_trials(trial_runner, _jobs(archs, cfg, "step2.1"), cfg.parallelism)
    scores = [median_objective([r for r, o in zip(results, owner) if o == k]) for k in range(len(intervals))]
    if report is not None:
        report._log("step2.1", results)
        report.intervals = intervals
        report.interval_scores = scores
    if all(math.isinf(s) for s in scores):
        raise AllDiverged("every width interval diverged")
    top = sorted(range(len(intervals)), key=lambda k: (scores[k], k))[:cfg.top_intervals]
    log.info("step 2.1: interval scores %s -> %s", scores, top)
    if report is not None:
        report.top_intervals = top
    return top


def _structure_key(r: TrialResult):
    return (r.objective, r.arch.width, r.arch.depth)


def step2b_structures(space: SearchSpace, cfg: SearchConfig, activation: Activation, intervals: Sequence[int],
                      trial_runner: TrialRunner, report: SearchReport | None = None) -> list[TrialResult]:
    """Exhaustive width x depth sweep inside the chosen intervals; the best ``k_candidates`` trials."""
    blocks = space.width_intervals(cfg.n_intervals)
    widths = sorted({w for k in intervals for w in blocks[k]})
    archs = [MlpArchitecture(w, d, activation, DEFAULT_CHANGING_POINT) for w in widths for d in space.depths]
    results = run_trials(trial_runner, _jobs(archs, cfg, "step2.2"), cfg.parallelism)
    best = sorted(results, key=_structure_key)[:cfg.k_candidates]
    if report is not None:
        report._log("step2.2", results)
        report.candidate_structures = [
            {"width": r.arch.width, "depth": r.arch.depth, "best_loss": r.objective} for r in best
        ]
    return best


def step3_changing_point(candidates: Sequence[MlpArchitecture], trial_runner: TrialRunner,
                         cfg: SearchConfig | None = None, changing_points: Sequence[float] = CHANGING_POINTS,
                         report: SearchReport | None = None) -> list[MlpArchitecture]:
    """Best changing point per candidate; ties go to the larger changing point."""
    cfg = cfg or SearchConfig()
    archs = [MlpArchitecture(c.width, c.depth, c.activation, cp) for c in candidates for cp in changing_points]
    results = run_trials(trial_runner, _jobs(archs, cfg, "step3"), cfg.parallelism)
    if report is not None:
        report._log("step3", results)
    chosen = []
    n = len(changing_points)
    for i, c in enumerate(candidates):
        group = results[i * n:(i + 1) * n]
        best = min(group, key=lambda r: (r.objective, -r.arch.changing_point))
        chosen.append(best.arch)
    return chosen


def step4_verify(candidates: Sequence[MlpArchitecture], cfg: SearchConfig, trial_runner: TrialRunner,
                 report: SearchReport | None = None, step: str = "step4") -> list[dict]:
    """Retrain each candidate ``verify_repeats`` times; median errors per candidate."""
    archs = [c for c in candidates for _ in range(cfg.verify_repeats)]
    results = run_trials(trial_runner, _jobs(archs, cfg, "step4"), cfg.parallelism)
    if report is not None:
        report._log(step, results)
    out = []
    n = cfg.verify_repeats
    for i, c in enumerate(candidates):
        group = results[i * n:(i + 1) * n]
        best_errors = [r.best_error for r in group]
        at_best = [r.error_at_best_loss for r in group]
        out.append({
            "arch": c,
            "best_errors": best_errors,
            "errors_at_best_loss": at_best,
            "median_best_error": float(np.median(best_errors)),
            "median_error_at_best_loss": float(np.median(at_best)),
        })
    return out


class TrainingRunner:
    """Trial runner that fits a fresh estimator per ``(arch, seed)`` on shared data."""

    def __init__(self, problem: PdeProblem, points: PointSet, test: TestGrid, train_cfg: TrainConfig | None = None,
                 estimator=None):
        from .estimator import PinnRegressor

        self.problem = problem
        self.points = points
        self.test = test
        cfg = train_cfg or TrainConfig()
        self.estimator = estimator if estimator is not None else PinnRegressor(
            problem=problem.id.value, epochs=cfg.epochs, learning_rate=cfg.learning_rate, log_every=cfg.log_every,
        )

    def __call__(self, arch: MlpArchitecture, seed: int) -> TrialResult:
        est = clone(self.estimator).set_params(
            width=arch.width, depth=arch.depth, activation=arch.activation.value,
            changing_point=arch.changing_point, random_state=seed,
        )
        est.fit(self.points, test_grid=self.test)
        return est.result_


def _resolve_runner(problem, sampling, trial_runner, train_cfg, n_test):
    if trial_runner is not None:
        return trial_runner
    from .sampling import sample_points, test_grid

    return TrainingRunner(problem, sample_points(problem, sampling), test_grid(problem, n_test), train_cfg)


def auto_pinn(problem: PdeProblem, sampling: SamplingSpec | None, space: SearchSpace | None = None,
              cfg: SearchConfig | None = None, trial_runner: TrialRunner | None = None,
              train_cfg: TrainConfig | None = None, n_test: int = 101) -> SearchReport:
    """Run the step-wise search and return its report.

    Step 0 fixes the changing point at 0.5; step 1 picks the activation;
    step 2.1 finds good width intervals; step 2.2 sweeps widths x depths
    inside them for the top candidates; step 3 picks each candidate's
    changing point; step 4 retrains the finalists for median errors.
    """
    space = space or SearchSpace.for_problem(problem)
    cfg = cfg or SearchConfig()
    runner = _resolve_runner(problem, sampling, trial_runner, train_cfg, n_test)
    report = SearchReport("autopinn", problem.id.value, getattr(sampling, "name", None), cfg.master_seed)
    act = step1_activation(space, cfg, runner, report)
    report.chosen_activation = act
    intervals = step2a_width_regions(space, cfg, act, runner, report)
    structures = step2b_structures(space, cfg, act, intervals, runner, report)
    finals = step3_changing_point([r.arch for r in structures], runner, cfg, space.changing_points, report)
    report.candidates = finals
    report.verification = step4_verify(finals, cfg, runner, report)
    return report


def random_search(problem: PdeProblem, sampling: SamplingSpec | None, space: SearchSpace | None = None,
                  budget: int = 261, seed: int = 0, cfg: SearchConfig | None = None,
                  trial_runner: TrialRunner | None = None, train_cfg: TrainConfig | None = None,
                  n_test: int = 101) -> SearchReport:
    """Uniform i.i.d. configurations from the whole space; the best ``k_candidates`` are verified."""
    if budget < 1:
        raise ValueError("budget must be at least 1")
    space = space or SearchSpace.for_problem(problem)
    cfg = cfg or SearchConfig(master_seed=seed)
    runner = _resolve_runner(problem, sampling, trial_runner, train_cfg, n_test)
    report = SearchReport("random", problem.id.value, getattr(sampling, "name", None), seed)
    rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, _STEP_CODES["random"], 0]))
    archs = [
        MlpArchitecture(
            space.widths[rng.integers(len(space.widths))],
            space.depths[rng.integers(len(space.depths))],
            space.activations[rng.integers(len(space.activations))],
            space.changing_points[rng.integers(len(space.changing_points))],
        )
        for _ in range(budget)
    ]
    cfg_seeded = SearchConfig(**{**cfg.__dict__, "master_seed": seed})
    results = run_trials(runner, _jobs(archs, cfg_seeded, "random"), cfg.parallelism)
    report._log("random", results)
    if all(r.diverged for r in results):
        raise AllDiverged("every random-search trial diverged")
    ranked, seen = [], set()
    for r in sorted(results, key=lambda r: (r.objective, r.arch.width, r.arch.depth,
                                             r.arch.activation.value, -r.arch.changing_point)):
        if r.arch not in seen:
            seen.add(r.arch)
            ranked.append(r)
        if len(ranked) == cfg.k_candidates:
            break
    report.candidate_structures = [
        {"width": r.arch.width, "depth": r.arch.depth, "best_loss": r.objective} for r in ranked
    ]
    report.candidates = [r.arch for r in ranked]
    report.verification = step4_verify(report.candidates, cfg_seeded, runner, report)
    return report
