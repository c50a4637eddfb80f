"""Shared test utilities: synthetic trial results and finite-difference oracles."""
import numpy as np
import sympy as sp

from pinnforge.autodiff import Jet, MlpArchitecture
from pinnforge.trainer import TrialResult


def fake_result(arch: MlpArchitecture, loss: float, error: float | None = None, seed: int = 0,
                best_error: float | None = None, diverged: bool = False) -> TrialResult:
    error = loss if error is None else error
    best_error = error if best_error is None else best_error
    if diverged:
        loss = error = best_error = float("inf")
    return TrialResult(arch=arch, best_loss=loss, error_at_best_loss=error, best_error=best_error,
                       final_loss=loss, loss_curve=[], seed=seed, diverged=diverged)


class SyntheticRunner:
    """Deterministic trial runner: ``loss = objective(arch)``; records every call."""

    def __init__(self, objective, error=None):
        self.objective = objective
        self.error = error
        self.calls = []

    def __call__(self, arch, seed):
        self.calls.append((arch, seed))
        loss = float(self.objective(arch))
        err = loss if self.error is None else float(self.error(arch, seed))
        return fake_result(arch, loss, err, seed=seed)


def central_diff(f, x: np.ndarray, h: float) -> np.ndarray:
    """Central differences of scalar ``f`` with respect to every entry of ``x``."""
    x = np.array(x, dtype=float)
    out = np.empty_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp.flat[i] += h
        xm.flat[i] -= h
        out.flat[i] = (f(xp) - f(xm)) / (2 * h)
    return out


def rel_err(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


X, T = sp.symbols("x t")

# closed-form solutions, written out independently of the package
SOLUTIONS = {
    "heat_0": sp.exp(-T) * sp.sin(sp.pi * X),
    "heat_1": 1 + T + sp.exp(-4 * sp.pi**2 * T) * sp.cos(2 * sp.pi * X) + X * sp.sin(T),
    "wave": sp.sin(X + T) + X * (T - sp.sin(T)),
    "reaction": sp.exp(-(X - 1) ** 2) * sp.exp(T) / (sp.exp(-(X - 1) ** 2) * sp.exp(T) + 1 - sp.exp(-(X - 1) ** 2)),
}


def analytic_jet(name):
    u = SOLUTIONS[name]
    exprs = [u, sp.diff(u, X), sp.diff(u, T), sp.diff(u, X, 2), sp.diff(u, T, 2)]
    fns = [sp.lambdify((X, T), e, "numpy") for e in exprs]

    def evaluate(x, t):
        return Jet(*(np.broadcast_to(np.asarray(f(x, t), dtype=float), np.shape(x)).copy() for f in fns))
    return evaluate


class ExactModel:
    """Stand-in model that reproduces a closed-form solution exactly."""

    def __init__(self, name, offset=0.0):
        self.jet_fn = analytic_jet(name)
        self.offset = offset

    def jet(self, X, orders):
        j = self.jet_fn(X[:, 0], X[:, 1])
        j.u = j.u + self.offset
        return j

    def predict(self, X):
        return self.jet(X, ()).u
