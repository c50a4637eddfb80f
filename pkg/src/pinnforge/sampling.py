"""Training-point sampling and dense test grids.

Named presets mirror the data-sampling table of the benchmark suite and are
addressed as ``"<problem>/<preset>"``, e.g. ``"heat_0/uniform1"``.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import GridInfeasible, GridInfeasibleWarning
from .problems import PdeProblem, ProblemId, exact_solution, get_problem

JUMP_EXCLUSION = 1e-9
# grid aspect ratio may differ from the domain's by at most this factor
MAX_ASPECT_MISMATCH = 2.0


class Scheme(str, enum.Enum):
    RANDOM = "random"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class SamplingSpec:
    scheme: Scheme
    n_collocation: int
    n_boundary: int
    n_initial: int
    seed: int = 0
    name: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        for count in ("n_collocation", "n_boundary", "n_initial"):
            if int(getattr(self, count)) < 1:
                raise ValueError(f"{count} must be positive")

    def with_seed(self, seed: int) -> "SamplingSpec":
        return replace(self, seed=int(seed))


_TABLE = {
    ProblemId.HEAT_0: {
        "random1": ("random", 105, 40, 20),
        "random2": ("random", 512, 200, 100),
        "uniform1": ("uniform", 105, 40, 20),
        "uniform2": ("uniform", 512, 200, 100),
    },
    ProblemId.HEAT_1: {
        "random1": ("random", 400, 100, 50),
        "random2": ("random", 2500, 500, 250),
        "uniform1": ("uniform", 400, 100, 50),
        "uniform2": ("uniform", 2500, 500, 250),
    },
    ProblemId.WAVE: {
        "random1": ("random", 2025, 200, 200),
        "random2": ("random", 5041, 500, 500),
        "uniform1": ("uniform", 2025, 200, 200),
        "uniform2": ("uniform", 5041, 500, 500),
    },
    ProblemId.BURGERS: {
        "uniform1": ("uniform", 5040, 500, 500),
        "uniform2": ("uniform", 10057, 1000, 1000),
    },
    ProblemId.ADVECTION_0: {
        "random1": ("random", 200, 40, 20),
        "random2": ("random", 800, 160, 80),
    },
    ProblemId.ADVECTION_1: {
        "random1": ("random", 200, 40, 20),
        "random2": ("random", 800, 160, 80),
    },
    ProblemId.REACTION: {
        "random": ("random", 800, 160, 80),
        "uniform": ("uniform", 800, 160, 80),
    },
}


def preset_names(problem_id: ProblemId | str | None = None) -> list[str]:
    ids = [ProblemId.parse(problem_id)] if problem_id is not None else list(_TABLE)
    return [f"{pid.value}/{name}" for pid in ids for name in _TABLE[pid]]


def get_preset(key: str, sampling: str | None = None, seed: int = 0) -> tuple[PdeProblem, SamplingSpec]:
    """Resolve ``"heat_0/uniform1"`` (or ``key="heat_0", sampling="uniform1"``)."""
    if sampling is None:
        if "/" not in key:
            raise ValueError(f"preset {key!r} must look like '<problem>/<sampling>'")
        key, sampling = key.split("/", 1)
    problem = get_problem(key)
    rows = _TABLE[problem.id]
    name = sampling.strip().lower()
    if name not in rows:
        raise ValueError(
            f"no sampling preset {sampling!r} for {problem.id.value}; available: {', '.join(rows)}"
        )
    scheme, nc, nb, ni = rows[name]
    return problem, SamplingSpec(Scheme(scheme), nc, nb, ni, seed=seed, name=f"{problem.id.value}/{name}")


@dataclass(frozen=True)
class PointSet:
    collocation: np.ndarray
    boundary: np.ndarray
    initial: np.ndarray
    grid_shape: tuple[int, int] | None = None
    fallback: bool = False

    def duplicated(self, times: int = 2) -> "PointSet":
        """Every point repeated ``times`` times (used to check mean semantics)."""
        return replace(
            self,
            collocation=np.concatenate([self.collocation] * times),
            boundary=np.concatenate([self.boundary] * times),
            initial=np.concatenate([self.initial] * times),
        )


def grid_shape(n: int, aspect: float, max_mismatch: float = MAX_ASPECT_MISMATCH) -> tuple[int, int] | None:
    """Factor ``n = n_x * n_t`` with ``n_x / n_t`` closest (in log) to ``aspect``.

    Returns ``None`` when no factorization with both factors >= 2 lies
    within ``max_mismatch`` of the target aspect ratio.
    """
    best, best_gap = None, math.log(max_mismatch) + 1e-12
    target = math.log(aspect)
    for nt in range(2, n // 2 + 1):
        if n % nt:
            continue
        nx = n // nt
        if nx < 2:
            continue
        gap = abs(math.log(nx / nt) - target)
        if gap < best_gap - 1e-15:
            best, best_gap = (nx, nt), gap
    return best


def _open_uniform(rng, lo, hi, size):
    # strictly inside (lo, hi)
    u = rng.uniform(np.nextafter(0.0, 1.0), 1.0, size=size)
    return lo + (hi - lo) * u


def _split(n: int, parts: int) -> list[int]:
    base, extra = divmod(n, parts)
    return [base + (i < extra) for i in range(parts)]


def sample_points(problem: PdeProblem, spec: SamplingSpec, strict: bool = False) -> PointSet:
    """Draw collocation, boundary and initial points for ``problem``.

    Uniform grids whose collocation count has no admissible factorization
    fall back to the largest smaller count that does; a
    :class:`GridInfeasibleWarning` is emitted, or :class:`GridInfeasible`
    raised when ``strict``.
    """
    (x0, x1), (t0, t1) = problem.x_range, problem.t_range
    sides = problem.boundary_sides
    side_x = {"left": x0, "right": x1}
    counts = _split(spec.n_boundary, len(sides))
    side_labels = np.concatenate([np.full(c, i) for i, c in enumerate(counts)])
    shape, fallback = None, False

    if spec.scheme is Scheme.RANDOM:
        rng = np.random.default_rng(spec.seed)
        colloc = np.column_stack([
            _open_uniform(rng, x0, x1, spec.n_collocation),
            _open_uniform(rng, t0, t1, spec.n_collocation),
        ])
        bt = rng.uniform(t0, t1, size=spec.n_boundary)
        ix = rng.uniform(x0, x1, size=spec.n_initial)
    else:
        aspect = (x1 - x0) / (t1 - t0)
        n = spec.n_collocation
        shape = grid_shape(n, aspect)
        if shape is None:
            if strict:
                raise GridInfeasible(f"no admissible grid with exactly {n} interior points")
            while shape is None and n > 4:
                n -= 1
                shape = grid_shape(n, aspect)
            fallback = True
            warnings.warn(
                f"{problem.id.value}: uniform grid uses {n} of {spec.n_collocation} requested points",
                GridInfeasibleWarning, stacklevel=2,
            )
        nx, nt = shape
        gx = np.linspace(x0, x1, nx + 2)[1:-1]
        gt = np.linspace(t0, t1, nt + 2)[1:-1]
        X, T = np.meshgrid(gx, gt, indexing="ij")
        colloc = np.column_stack([X.ravel(), T.ravel()])
        bt = np.concatenate([np.linspace(t0, t1, c) for c in counts])
        ix = np.linspace(x0, x1, spec.n_initial)

    bx = np.array([side_x[sides[i]] for i in side_labels], dtype=float)
    return PointSet(
        collocation=colloc,
        boundary=np.column_stack([bx, bt]),
        initial=np.column_stack([ix, np.full(spec.n_initial, t0)]),
        grid_shape=shape,
        fallback=fallback,
    )


@dataclass(frozen=True)
class TestGrid:
    points: np.ndarray
    values: np.ndarray

    __test__ = False  # not a pytest class

    def __len__(self) -> int:
        return len(self.values)


def test_grid(problem: PdeProblem, n_per_axis: int = 101) -> TestGrid:
    """Uniform ``n x n`` grid over the closed domain with reference values."""
    if n_per_axis < 2:
        raise ValueError("n_per_axis must be at least 2")
    (x0, x1), (t0, t1) = problem.x_range, problem.t_range
    X, T = np.meshgrid(np.linspace(x0, x1, n_per_axis), np.linspace(t0, t1, n_per_axis), indexing="ij")
    pts = np.column_stack([X.ravel(), T.ravel()])
    keep = ~problem.near_jump(pts[:, 0], pts[:, 1], JUMP_EXCLUSION)
    pts = pts[keep]
    return TestGrid(pts, np.asarray(exact_solution(problem, pts[:, 0], pts[:, 1]), dtype=float))


test_grid.__test__ = False
