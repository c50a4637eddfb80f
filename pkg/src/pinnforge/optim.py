"""Full-batch optimizers over a flat parameter vector.

Both optimizers take a callable ``fg(theta) -> (loss, grad)``.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

LossAndGrad = Callable[[np.ndarray], tuple[float, np.ndarray]]


class Adam:
    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = None
        self.v = None
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        """Update ``theta`` in place and return it."""
        if self.m is None:
            self.m = np.zeros_like(theta)
            self.v = np.zeros_like(theta)
        self.t += 1
        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        theta -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return theta


def _cubic_min(a1, f1, g1, a2, f2, g2, lo, hi):
    """Minimizer of the cubic interpolating two (step, value, slope) triples, clipped to [lo, hi]."""
    if not all(math.isfinite(v) for v in (f1, g1, f2, g2)) or a1 == a2:
        return 0.5 * (lo + hi)
    d1 = g1 + g2 - 3.0 * (f1 - f2) / (a1 - a2)
    disc = d1 * d1 - g1 * g2
    if disc < 0:
        return 0.5 * (lo + hi)
    d2 = math.copysign(math.sqrt(disc), a2 - a1)
    denom = g2 - g1 + 2.0 * d2
    if denom == 0:
        return 0.5 * (lo + hi)
    a = a2 - (a2 - a1) * (g2 + d2 - d1) / denom
    return min(max(a, lo), hi)


@dataclass
class LineSearchResult:
    step: float
    loss: float
    grad: np.ndarray | None
    evals: int
    success: bool  # strong Wolfe conditions hold; otherwise only sufficient decrease (or nothing)


def strong_wolfe(
    fg: LossAndGrad,
    x: np.ndarray,
    f0: float,
    g0: np.ndarray,
    d: np.ndarray,
    step: float = 1.0,
    c1: float = 1e-4,
    c2: float = 0.9,
    max_evals: int = 25,
) -> LineSearchResult:
    """Bracketing + zoom line search for the strong Wolfe conditions.

    Any returned step with ``step > 0`` satisfies the sufficient-decrease
    condition ``f(x + step d) <= f0 + c1 step g0.d``.  If the evaluation
    budget runs out, the best such step seen is returned with
    ``success=False``; ``step == 0`` means no acceptable point was found.
    """
    slope0 = float(g0 @ d)
    if not slope0 < 0:
        return LineSearchResult(0.0, f0, g0, 0, False)

    def evaluate(a):
        f, g = fg(x + a * d)
        f = float(f)
        if not math.isfinite(f):
            return math.inf, g, math.inf
        return f, g, float(g @ d)

    def armijo(a, f):
        return f <= f0 + c1 * a * slope0

    curvature = -c2 * slope0
    evals = 0
    prev = (0.0, f0, g0, slope0)
    a = step
    lo = hi = None
    while evals < max_evals:
        f, g, s = evaluate(a)
        evals += 1
        if not armijo(a, f) or (evals > 1 and f >= prev[1]):
            lo, hi = prev, (a, f, g, s)
            break
        if abs(s) <= curvature:
            return LineSearchResult(a, f, g, evals, True)
        if s >= 0:
            lo, hi = (a, f, g, s), prev
            break
        nxt = _cubic_min(prev[0], prev[1], prev[3], a, f, s, a + 0.01 * (a - prev[0]), 10.0 * a)
        prev = (a, f, g, s)
        a = nxt
    else:
        return LineSearchResult(prev[0], prev[1], prev[2], evals, False)

    while evals < max_evals:
        width = abs(hi[0] - lo[0])
        if width <= 1e-14 * max(1.0, abs(lo[0])):
            break
        left, right = min(lo[0], hi[0]), max(lo[0], hi[0])
        a = _cubic_min(lo[0], lo[1], lo[3], hi[0], hi[1], hi[3], left, right)
        # keep trial points away from the bracket ends
        margin = 0.1 * width
        a = min(max(a, left + margin), right - margin)
        f, g, s = evaluate(a)
        evals += 1
        if not armijo(a, f) or f >= lo[1]:
            hi = (a, f, g, s)
            continue
        if abs(s) <= curvature:
            return LineSearchResult(a, f, g, evals, True)
        if s * (hi[0] - lo[0]) >= 0:
            hi = lo
        lo = (a, f, g, s)
    return LineSearchResult(lo[0], lo[1], lo[2], evals, False)


class LBFGS:
    """Limited-memory BFGS with a strong Wolfe line search.

    One call to :meth:`step` is one outer iteration.
    """

    def __init__(self, history_size: int = 50, c1: float = 1e-4, c2: float = 0.9, max_line_search: int = 25):
        self.history_size = history_size
        self.c1 = c1
        self.c2 = c2
        self.max_line_search = max_line_search
        self.s = deque(maxlen=history_size)
        self.y = deque(maxlen=history_size)
        self.n_evals = 0

    def reset(self):
        self.s.clear()
        self.y.clear()

    def direction(self, g: np.ndarray) -> np.ndarray:
        q = -g.copy()
        if not self.s:
            return q
        rho = [1.0 / float(y @ s) for s, y in zip(self.s, self.y)]
        alpha = []
        for s, y, r in zip(reversed(self.s), reversed(self.y), reversed(rho)):
            a = r * float(s @ q)
            alpha.append(a)
            q -= a * y
        s, y = self.s[-1], self.y[-1]
        q *= float(s @ y) / float(y @ y)
        for (s, y, r), a in zip(zip(self.s, self.y, rho), reversed(alpha)):
            b = r * float(y @ q)
            q += (a - b) * s
        return q

    def step(self, fg: LossAndGrad, theta: np.ndarray, f: float, g: np.ndarray):
        """Advance one iteration from ``(theta, f, g)``.

        Returns ``(theta, f, g, moved)``; ``moved`` is False when neither the
        quasi-Newton direction nor steepest descent yields a decrease.
        """
        for attempt in range(2):
            d = self.direction(g)
            if not self.s:
                step = min(1.0, 1.0 / max(float(np.abs(g).sum()), 1e-300))
            else:
                step = 1.0
            res = strong_wolfe(fg, theta, f, g, d, step, self.c1, self.c2, self.max_line_search)
            self.n_evals += res.evals
            if res.step > 0:
                new = theta + res.step * d
                s_vec = new - theta
                y_vec = res.grad - g
                if float(y_vec @ s_vec) > 1e-10:
                    self.s.append(s_vec)
                    self.y.append(y_vec)
                return new, res.loss, res.grad, True
            if not self.s:
                break
            # stale curvature pairs; restart from steepest descent
            self.reset()
        return theta, f, g, False
