"""Composite PINN loss, two-phase Adam/L-BFGS training and trial metrics."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Protocol

import numpy as np

from .autodiff import Jet, LossTerm, MlpArchitecture, MlpNetwork, jet, loss_gradient, predict, term_values
from .exceptions import ZeroNorm
from .optim import LBFGS, Adam
from .problems import Constraint, PdeProblem
from .sampling import PointSet, TestGrid

log = logging.getLogger(__name__)

MAX_CURVE_POINTS = 500


class JetModel(Protocol):
    """Anything that can stand in for a network when evaluating losses."""

    def jet(self, X: np.ndarray, orders) -> Jet: ...

    def predict(self, X: np.ndarray) -> np.ndarray: ...


def _model_jet(model, X, orders) -> Jet:
    if isinstance(model, MlpNetwork):
        return jet(model, X, orders)
    return model.jet(X, orders)


def _model_predict(model, X) -> np.ndarray:
    if isinstance(model, MlpNetwork):
        return predict(model, X)
    return np.asarray(model.predict(X), dtype=float)


def _constraint_residual(term: Constraint):
    channel = term.channel

    def fn(j: Jet, X: np.ndarray):
        r = term.mismatch(j, X)
        return r, {channel: np.ones_like(r)}

    return fn


def _side_mask(problem: PdeProblem, boundary: np.ndarray, locations) -> np.ndarray:
    x0, x1 = problem.x_range
    mask = np.zeros(len(boundary), dtype=bool)
    if "left" in locations:
        mask |= boundary[:, 0] == x0
    if "right" in locations:
        mask |= boundary[:, 0] == x1
    return mask


def build_loss_terms(problem: PdeProblem, points: PointSet) -> list[LossTerm]:
    """One mean-squared term for the PDE residual and one per boundary/initial constraint.

    Each boundary constraint is averaged over the boundary points lying on
    the sides it applies to.
    """
    terms = [LossTerm("pde", points.collocation, problem.residual_orders, problem.residual_fn, "residual")]
    orders_of = {"u": (), "x": ("x",), "t": ("t",)}
    for i, term in enumerate(problem.bc_terms):
        pts = points.boundary[_side_mask(problem, points.boundary, term.locations)]
        terms.append(LossTerm(f"bc{i}:{term.kind.value}", pts, orders_of[term.channel],
                              _constraint_residual(term), "boundary"))
    for i, term in enumerate(problem.ic_terms):
        terms.append(LossTerm(f"ic{i}:{term.kind.value}", points.initial, orders_of[term.channel],
                              _constraint_residual(term), "initial"))
    return terms


@dataclass(frozen=True)
class LossParts:
    total: float
    residual: float
    boundary: float
    initial: float


def _group(terms, values) -> LossParts:
    parts = {"residual": 0.0, "boundary": 0.0, "initial": 0.0}
    for term, v in zip(terms, values):
        parts[term.group] += v
    return LossParts(sum(parts.values()), parts["residual"], parts["boundary"], parts["initial"])


def composite_loss(model, points: PointSet, problem: PdeProblem) -> LossParts:
    """Residual, boundary and initial mean-squared losses and their sum."""
    terms = build_loss_terms(problem, points)
    if isinstance(model, MlpNetwork):
        values = term_values(model, terms)
    else:
        values = []
        for term in terms:
            r, _ = term.residual(_model_jet(model, term.points, term.orders), term.points)
            values.append(float(np.mean(r * r)))
    return _group(terms, values)


def l2_relative_error(model, test: TestGrid) -> float:
    """``||pred - exact|| / ||exact||`` over the test grid."""
    denom = float(np.sqrt(np.sum(test.values ** 2)))
    if denom == 0.0:
        raise ZeroNorm("reference solution vanishes on the test grid")
    diff = _model_predict(model, test.points) - test.values
    return float(np.sqrt(np.sum(diff * diff))) / denom


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5 + 1e-9))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10000
    learning_rate: float = 1e-5
    changing_point: float | None = None  # None: take it from the architecture
    log_every: int = 100
    seed: int = 0
    lbfgs_history: int = 50
    max_line_search: int = 25

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.log_every < 1:
            raise ValueError("log_every must be positive")
        if self.changing_point is not None and not 0.0 <= self.changing_point <= 1.0:
            raise ValueError("changing_point must lie in [0, 1]")

    def split(self, changing_point: float | None = None) -> tuple[int, int]:
        """``(adam_epochs, lbfgs_iterations)`` for the given changing point."""
        cp = self.changing_point if changing_point is None else changing_point
        if cp is None:
            raise ValueError("no changing point given")
        adam = min(self.epochs, _round_half_up(cp * self.epochs))
        return adam, self.epochs - adam

    @property
    def adam_epochs(self) -> int:
        return self.split()[0]

    @property
    def lbfgs_iterations(self) -> int:
        return self.split()[1]


@dataclass
class TrialResult:
    arch: MlpArchitecture
    best_loss: float
    error_at_best_loss: float
    best_error: float
    final_loss: float
    loss_curve: list[tuple[int, float]] = field(repr=False)
    seed: int
    diverged: bool = False
    wall_time: float = 0.0
    adam_steps: int = 0
    lbfgs_steps: int = 0
    stalled: bool = False

    @property
    def objective(self) -> float:
        """Search objective; diverged trials sort after every finite one."""
        return math.inf if self.diverged or not math.isfinite(self.best_loss) else self.best_loss

    def to_dict(self, timing: bool = True) -> dict:
        d = asdict(self)
        d.pop("arch")
        d = {**self.arch.to_dict(), **d}
        d["loss_curve"] = [[int(s), _json_float(v)] for s, v in self.loss_curve]
        for key in ("best_loss", "error_at_best_loss", "best_error", "final_loss"):
            d[key] = _json_float(d[key])
        if not timing:
            d.pop("wall_time")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrialResult":
        d = dict(d)
        arch = MlpArchitecture(d.pop("width"), d.pop("depth"), d.pop("activation"), d.pop("changing_point"))
        for key in ("best_loss", "error_at_best_loss", "best_error", "final_loss"):
            d[key] = _from_json_float(d.get(key))
        d["loss_curve"] = [(int(s), _from_json_float(v)) for s, v in d.get("loss_curve", [])]
        known = cls.__dataclass_fields__
        return cls(arch=arch, **{k: v for k, v in d.items() if k in known})


def _json_float(v):
    v = float(v)
    return v if math.isfinite(v) else None


def _from_json_float(v):
    return math.inf if v is None else float(v)


def downsample_curve(losses: list[float], limit: int = MAX_CURVE_POINTS) -> list[tuple[int, float]]:
    n = len(losses)
    if n <= limit:
        return list(enumerate(losses))
    idx = np.unique(np.linspace(0, n - 1, limit).round().astype(int))
    return [(int(i), losses[i]) for i in idx]


class _Tracker:
    """Running best loss paired with the test error of the parameters that produced it.

    Errors of a new best are computed lazily at the next checkpoint; the
    paired value is identical to evaluating immediately.
    """

    def __init__(self, net: MlpNetwork, test: TestGrid, log_every: int):
        self.net = net
        self.test = test
        self.log_every = log_every
        self.losses: list[float] = []
        self.best_loss = math.inf
        self.best_theta = None
        self.pending = False
        self.error_at_best = math.nan
        self.best_error = math.inf

    def error(self, theta) -> float:
        return l2_relative_error(self.net.with_params(theta), self.test)

    def record(self, step: int, loss: float, theta: np.ndarray, last: bool = False) -> bool:
        if not math.isfinite(loss):
            return False
        self.losses.append(loss)
        if loss < self.best_loss:
            self.best_loss = loss
            self.best_theta = theta.copy()
            self.pending = True
        if last or step % self.log_every == 0:
            self.checkpoint(theta)
        return True

    def checkpoint(self, theta=None):
        if theta is not None:
            self.best_error = min(self.best_error, self.error(theta))
        if self.pending:
            self.error_at_best = self.error(self.best_theta)
            self.best_error = min(self.best_error, self.error_at_best)
            self.pending = False


def train(net: MlpNetwork, points: PointSet, problem: PdeProblem, cfg: TrainConfig, test: TestGrid) -> TrialResult:
    """Adam for ``adam_epochs`` steps, then L-BFGS for the remaining epochs.

    ``net`` is not modified.  The parameters that reached the best loss are
    attached to the result as ``result.network``.
    """
    start = time.perf_counter()
    arch = net.architecture
    cp = cfg.changing_point if cfg.changing_point is not None else arch.changing_point
    n_adam, n_lbfgs = cfg.split(cp)
    terms = build_loss_terms(problem, points)
    theta = net.params.copy()
    model = net.with_params(theta)

    def fg(th):
        model.params = th
        loss, grad, _ = loss_gradient(model, terms)
        return loss, grad.flat

    tracker = _Tracker(net, test, cfg.log_every)
    diverged = stalled = False
    adam_steps = lbfgs_steps = 0

    opt = Adam(cfg.learning_rate)
    for step in range(n_adam):
        loss, grad = fg(theta)
        if not tracker.record(step, loss, theta):
            diverged = True
            break
        opt.step(theta, grad)
        adam_steps += 1

    if not diverged:
        loss, grad = fg(theta)
        if not tracker.record(n_adam, loss, theta, last=n_lbfgs == 0):
            diverged = True
    if not diverged and n_lbfgs:
        lbfgs = LBFGS(cfg.lbfgs_history, max_line_search=cfg.max_line_search)
        for it in range(1, n_lbfgs + 1):
            theta, loss, grad, moved = lbfgs.step(fg, theta, loss, grad)
            if not moved:
                stalled = True
                log.debug("%s: L-BFGS made no progress at iteration %d", arch, it)
                tracker.checkpoint(theta)
                break
            lbfgs_steps += 1
            if not tracker.record(n_adam + it, loss, theta, last=it == n_lbfgs):
                diverged = True
                break
    tracker.checkpoint()

    best_loss = math.inf if diverged else tracker.best_loss
    final_loss = math.inf if diverged else tracker.losses[-1]
    error_at_best = tracker.error_at_best
    best_error = tracker.best_error
    if diverged and not math.isfinite(best_error):
        error_at_best = best_error = math.inf
    result = TrialResult(
        arch=arch,
        best_loss=best_loss,
        error_at_best_loss=error_at_best,
        best_error=best_error,
        final_loss=final_loss,
        loss_curve=downsample_curve(tracker.losses),
        seed=net.init_seed if net.init_seed is not None else cfg.seed,
        diverged=diverged,
        wall_time=time.perf_counter() - start,
        adam_steps=adam_steps,
        lbfgs_steps=lbfgs_steps,
        stalled=stalled,
    )
    final = tracker.best_theta if tracker.best_theta is not None else theta
    result.network = net.with_params(final)
    return result
