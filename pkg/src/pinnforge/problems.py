"""The seven benchmark PDEs on one space and one time dimension.

Every problem provides its residual ``N[u] - f`` written against a
:class:`~pinnforge.autodiff.Jet`, the partial derivatives of that residual
with respect to each jet channel (needed for exact loss gradients), the
boundary and initial constraints, and a reference solution.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import roots_hermite

from .autodiff import Jet
from .exceptions import DiscontinuityPoint

BURGERS_NU = 0.01 / math.pi
BURGERS_QUAD_NODES = 200
JUMP_TOL = 1e-12


class ProblemId(str, enum.Enum):
    HEAT_0 = "heat_0"
    HEAT_1 = "heat_1"
    WAVE = "wave"
    BURGERS = "burgers"
    ADVECTION_0 = "advection_0"
    ADVECTION_1 = "advection_1"
    REACTION = "reaction"

    @classmethod
    def parse(cls, value: "ProblemId | str") -> "ProblemId":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            names = ", ".join(p.value for p in cls)
            raise ValueError(f"unknown problem {value!r}; expected one of {names}") from None


class ConstraintKind(str, enum.Enum):
    DIRICHLET = "dirichlet"  # u = g
    NEUMANN = "neumann"  # du/dx = g
    TEMPORAL_NEUMANN = "temporal_neumann"  # du/dt = g


_KIND_CHANNEL = {
    ConstraintKind.DIRICHLET: "u",
    ConstraintKind.NEUMANN: "x",
    ConstraintKind.TEMPORAL_NEUMANN: "t",
}

Target = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Constraint:
    """A pointwise condition ``D u = target`` on part of the domain boundary.

    ``locations`` is a subset of ``{"left", "right"}`` for boundary terms
    and ``("initial",)`` for initial terms.
    """

    kind: ConstraintKind
    locations: tuple[str, ...]
    target: Target

    @property
    def channel(self) -> str:
        return _KIND_CHANNEL[self.kind]

    @property
    def is_initial(self) -> bool:
        return self.locations == ("initial",)

    def mismatch(self, jet: Jet, X: np.ndarray) -> np.ndarray:
        return jet.channel(self.channel) - self.target(X[:, 0], X[:, 1])


BoundaryTerm = InitialTerm = Constraint

ResidualFn = Callable[[Jet, np.ndarray], tuple[np.ndarray, dict[str, np.ndarray]]]


@dataclass(frozen=True)
class PdeProblem:
    id: ProblemId
    x_range: tuple[float, float]
    t_range: tuple[float, float]
    residual_orders: frozenset
    residual_fn: ResidualFn = field(repr=False)
    bc_terms: tuple[Constraint, ...] = field(repr=False)
    ic_terms: tuple[Constraint, ...] = field(repr=False)
    exact: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False)
    width_grid: tuple[int, int, int] = (8, 256, 4)
    has_jump: bool = False

    @property
    def name(self) -> str:
        return "_".join(part.capitalize() for part in self.id.value.split("_"))

    @property
    def widths(self) -> list[int]:
        lo, hi, step = self.width_grid
        return list(range(lo, hi + 1, step))

    @property
    def boundary_sides(self) -> tuple[str, ...]:
        sides = {loc for term in self.bc_terms for loc in term.locations}
        return tuple(s for s in ("left", "right") if s in sides)

    def in_domain(self, x, t, strict: bool = False) -> np.ndarray:
        (x0, x1), (t0, t1) = self.x_range, self.t_range
        x, t = np.asarray(x), np.asarray(t)
        if strict:
            return (x > x0) & (x < x1) & (t > t0) & (t < t1)
        return (x >= x0) & (x <= x1) & (t >= t0) & (t <= t1)

    def near_jump(self, x, t, tol: float) -> np.ndarray:
        if not self.has_jump:
            return np.zeros(np.broadcast(x, t).shape, dtype=bool)
        return np.abs(np.asarray(x) - (1.0 + np.asarray(t))) <= tol


def residual(problem: PdeProblem, jet: Jet, x, t):
    """``N[u] - f`` at ``(x, t)`` for a jet of ``u`` evaluated there."""
    X = np.column_stack([np.atleast_1d(np.asarray(x, dtype=float)),
                         np.atleast_1d(np.asarray(t, dtype=float))])
    arr = Jet(*(None if v is None else np.atleast_1d(np.asarray(v, dtype=float))
                for v in (jet.u, jet.du_dx, jet.du_dt, jet.d2u_dx2, jet.d2u_dt2)))
    r, _ = problem.residual_fn(arr, X)
    return float(r[0]) if np.ndim(x) == 0 and np.ndim(t) == 0 else r


def exact_solution(problem: PdeProblem, x, t):
    """Reference value at ``(x, t)``; array inputs broadcast.

    Raises :class:`DiscontinuityPoint` for advection queries on the jump
    line ``x = 1 + t``.
    """
    if problem.has_jump and np.any(problem.near_jump(x, t, JUMP_TOL)):
        raise DiscontinuityPoint(f"{problem.id.value}: solution is discontinuous on x = 1 + t")
    out = problem.exact(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# residual operators

def _ones(r):
    return np.ones_like(r)


def _heat0_residual(j, X):
    x, t = X[:, 0], X[:, 1]
    s = np.sin(np.pi * x)
    r = j.du_dt - j.d2u_dx2 + np.exp(-t) * (s - np.pi**2 * s)
    return r, {"t": _ones(r), "xx": -_ones(r)}


def _heat1_residual(j, X):
    x, t = X[:, 0], X[:, 1]
    r = j.du_dt - j.d2u_dx2 - (1.0 + x * np.cos(t))
    return r, {"t": _ones(r), "xx": -_ones(r)}


def _wave_residual(j, X):
    x, t = X[:, 0], X[:, 1]
    # source x*sin(t) is the one consistent with the closed-form solution below
    r = j.d2u_dt2 - j.d2u_dx2 - x * np.sin(t)
    return r, {"tt": _ones(r), "xx": -_ones(r)}


def _burgers_residual(j, X):
    r = j.du_dt + j.u * j.du_dx - BURGERS_NU * j.d2u_dx2
    return r, {"t": _ones(r), "u": j.du_dx, "x": j.u, "xx": -BURGERS_NU * _ones(r)}


def _advection_residual(j, X):
    r = j.du_dt + j.du_dx
    return r, {"t": _ones(r), "x": _ones(r)}


def _reaction_residual(j, X):
    r = j.du_dt - j.u * (1.0 - j.u)
    return r, {"t": _ones(r), "u": 2.0 * j.u - 1.0}


# ---------------------------------------------------------------------------
# reference solutions

def _heat0_exact(x, t):
    return np.exp(-t) * np.sin(np.pi * x)


def _heat1_exact(x, t):
    return 1.0 + t + np.exp(-4.0 * np.pi**2 * t) * np.cos(2.0 * np.pi * x) + x * np.sin(t)


def _wave_exact(x, t):
    return np.sin(x + t) + x * (t - np.sin(t))


def _reaction_exact(x, t):
    # g e^t / (g e^t + 1 - g) with g = exp(-(x-1)^2), arranged so rounding keeps u <= 1
    return 1.0 / (1.0 + np.expm1((x - 1.0) ** 2) * np.exp(-t))


def _step(high, low):
    def solution(x, t):
        front = 1.0 + t
        mid = 0.5 * (high + low)
        return np.where(x < front, high, np.where(x > front, low, mid)) + 0.0 * (x + t)
    return solution


@lru_cache(maxsize=8)
def _hermite(n: int):
    return roots_hermite(n)


def burgers_cole_hopf(x, t, n_nodes: int = BURGERS_QUAD_NODES, nu: float = BURGERS_NU):
    """Viscous Burgers solution for ``u(x, 0) = -sin(pi x)`` via Cole-Hopf.

    With ``phi(y) = exp(-cos(pi y) / (2 pi nu))`` the solution is

        u = -E[sin(pi (x - s z)) phi(x - s z)] / E[phi(x - s z)],  s = sqrt(4 nu t)

    where the expectations are Gauss-Hermite sums over ``z``.  Exponents are
    shifted by their row maximum before exponentiation.
    """
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    shape = x.shape
    x, t = x.ravel(), t.ravel()
    out = -np.sin(np.pi * x)
    live = t > 0
    if np.any(live):
        z, w = _hermite(int(n_nodes))
        xl, tl = x[live, None], t[live, None]
        y = xl - np.sqrt(4.0 * nu * tl) * z
        e = -np.cos(np.pi * y) / (2.0 * np.pi * nu)
        e -= e.max(axis=1, keepdims=True)
        f = np.exp(e) * w
        out[live] = -(np.sin(np.pi * y) * f).sum(axis=1) / f.sum(axis=1)
    return out.reshape(shape)


def _burgers_exact(x, t):
    return burgers_cole_hopf(x, t)


def _const(value):
    return lambda x, t: np.full(np.broadcast(x, t).shape, float(value))


def _build() -> dict[ProblemId, PdeProblem]:
    dirichlet, neumann, velocity = (ConstraintKind.DIRICHLET, ConstraintKind.NEUMANN,
                                    ConstraintKind.TEMPORAL_NEUMANN)
    both, left, init = ("left", "right"), ("left",), ("initial",)
    problems = [
        PdeProblem(
            ProblemId.HEAT_0, (-1.0, 1.0), (0.0, 1.0), frozenset({"t", "xx"}), _heat0_residual,
            (Constraint(dirichlet, both, _const(0.0)),),
            (Constraint(dirichlet, init, lambda x, t: np.sin(np.pi * x)),),
            _heat0_exact, width_grid=(16, 512, 8),
        ),
        PdeProblem(
            ProblemId.HEAT_1, (0.0, 1.0), (0.0, 1.0), frozenset({"t", "xx"}), _heat1_residual,
            (Constraint(neumann, both, lambda x, t: np.sin(t)),),
            (Constraint(dirichlet, init, lambda x, t: 1.0 + np.cos(2.0 * np.pi * x)),),
            _heat1_exact,
        ),
        PdeProblem(
            ProblemId.WAVE, (0.0, 1.0), (0.0, 1.0), frozenset({"tt", "xx"}), _wave_residual,
            (Constraint(dirichlet, left, lambda x, t: np.sin(t)),
             Constraint(neumann, left, lambda x, t: np.cos(t) - np.sin(t) + t)),
            (Constraint(dirichlet, init, lambda x, t: np.sin(x)),
             Constraint(velocity, init, lambda x, t: np.cos(x))),
            _wave_exact,
        ),
        PdeProblem(
            ProblemId.BURGERS, (-1.0, 1.0), (0.0, 5.0 / math.pi), frozenset({"t", "xx"}),
            _burgers_residual,
            (Constraint(dirichlet, both, _const(0.0)),),
            (Constraint(dirichlet, init, lambda x, t: -np.sin(np.pi * x)),),
            _burgers_exact,
        ),
        PdeProblem(
            ProblemId.ADVECTION_0, (0.0, 2.0), (0.0, 1.0), frozenset({"t", "x"}), _advection_residual,
            (Constraint(dirichlet, both, lambda x, t: np.where(x < 1.0, 2.0, 0.0) + 0.0 * t),),
            (Constraint(dirichlet, init, _step(2.0, 0.0)),),
            _step(2.0, 0.0), has_jump=True,
        ),
        PdeProblem(
            ProblemId.ADVECTION_1, (0.0, 2.0), (0.0, 1.0), frozenset({"t", "x"}), _advection_residual,
            (Constraint(dirichlet, both, lambda x, t: np.where(x < 1.0, 1.0, -1.0) + 0.0 * t),),
            (Constraint(dirichlet, init, _step(1.0, -1.0)),),
            _step(1.0, -1.0), has_jump=True,
        ),
        PdeProblem(
            ProblemId.REACTION, (0.0, 2.0), (0.0, 1.0), frozenset({"t"}), _reaction_residual,
            (Constraint(dirichlet, left, _reaction_exact),),
            (Constraint(dirichlet, init, lambda x, t: np.exp(-(x - 1.0) ** 2)),),
            _reaction_exact,
        ),
    ]
    return {p.id: p for p in problems}


PROBLEMS = _build()


def get_problem(problem_id: "ProblemId | str") -> PdeProblem:
    return PROBLEMS[ProblemId.parse(problem_id)]
