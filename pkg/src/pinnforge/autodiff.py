"""MLP evaluation with second-order input jets and reverse-mode parameter gradients.

A forward pass carries, for each point, the network value together with the
input derivatives ``du/dx``, ``du/dt``, ``d2u/dx2`` and ``d2u/dt2`` through
every layer.  The reverse pass walks the same graph backwards, so the
gradient of any scalar built from those jet entries is exact.

Parameters live in one flat float64 vector; per-layer ``(W, b)`` pairs are
views into it.  Weight matrices are stored ``(fan_in, fan_out)`` so a layer
maps row-stacked points as ``a @ W + b``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .activations import Activation

INPUT_DIM = 2
OUTPUT_DIM = 1

# jet channel name -> Jet attribute
CHANNELS = {
    "u": "u",
    "x": "du_dx",
    "t": "du_dt",
    "xx": "d2u_dx2",
    "tt": "d2u_dt2",
}
ALL_ORDERS = frozenset({"x", "t", "xx", "tt"})
_AXIS = {"x": 0, "t": 1}


@dataclass(frozen=True)
class MlpArchitecture:
    """One point of the search space."""

    width: int
    depth: int
    activation: Activation = Activation.TANH
    changing_point: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "activation", Activation.parse(self.activation))
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "depth", int(self.depth))
        object.__setattr__(self, "changing_point", float(self.changing_point))
        if self.width < 1 or self.depth < 1:
            raise ValueError(f"width and depth must be positive, got {self.width}x{self.depth}")
        if not 0.0 <= self.changing_point <= 1.0:
            raise ValueError(f"changing_point must lie in [0, 1], got {self.changing_point}")

    def layer_shapes(self) -> list[tuple[int, int]]:
        dims = [INPUT_DIM] + [self.width] * self.depth + [OUTPUT_DIM]
        return list(zip(dims[:-1], dims[1:]))

    @property
    def n_params(self) -> int:
        return sum(i * o + o for i, o in self.layer_shapes())

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "depth": self.depth,
            "activation": self.activation.value,
            "changing_point": self.changing_point,
        }

    def __str__(self) -> str:
        return f"{self.width}x{self.depth}/{self.activation.value}/cp{self.changing_point:g}"


def unpack_params(theta: np.ndarray, arch: MlpArchitecture) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a flat parameter vector into per-layer ``(W, b)`` views."""
    layers = []
    pos = 0
    for fan_in, fan_out in arch.layer_shapes():
        w = theta[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out)
        pos += fan_in * fan_out
        b = theta[pos:pos + fan_out]
        pos += fan_out
        layers.append((w, b))
    if pos != theta.size:
        raise ValueError(f"parameter vector has {theta.size} entries, architecture needs {pos}")
    return layers


@dataclass
class MlpNetwork:
    architecture: MlpArchitecture
    params: np.ndarray
    init_seed: int | None = None

    def __post_init__(self):
        self.params = np.ascontiguousarray(self.params, dtype=np.float64)
        if self.params.ndim != 1 or self.params.size != self.architecture.n_params:
            raise ValueError("params must be a flat vector matching the architecture")

    @property
    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return unpack_params(self.params, self.architecture)

    def with_params(self, theta: np.ndarray) -> "MlpNetwork":
        return MlpNetwork(self.architecture, np.array(theta, dtype=np.float64), self.init_seed)

    def copy(self) -> "MlpNetwork":
        return self.with_params(self.params)


def init_network(arch: MlpArchitecture, seed: int) -> MlpNetwork:
    """Glorot-uniform weights and zero biases, drawn from ``seed``."""
    rng = np.random.default_rng(seed)
    theta = np.zeros(arch.n_params)
    for w, _ in unpack_params(theta, arch):
        limit = np.sqrt(6.0 / (w.shape[0] + w.shape[1]))
        w[...] = rng.uniform(-limit, limit, size=w.shape)
    return MlpNetwork(arch, theta, seed)


@dataclass
class Jet:
    """Network output with its input derivatives.

    Entries are floats for single-point evaluation or ``(n,)`` arrays for a
    batch.  Channels that were not requested are ``None``.
    """

    u: np.ndarray | float
    du_dx: np.ndarray | float | None = None
    du_dt: np.ndarray | float | None = None
    d2u_dx2: np.ndarray | float | None = None
    d2u_dt2: np.ndarray | float | None = None

    def channel(self, name: str):
        return getattr(self, CHANNELS[name])


# kept as a separate name for the single-point evaluator's return type
JetValue = Jet


def _normalize_orders(orders: Iterable[str]) -> frozenset:
    orders = frozenset(orders)
    unknown = orders - ALL_ORDERS
    if unknown:
        raise ValueError(f"unknown jet orders {sorted(unknown)}")
    # a second derivative cannot be propagated without the first
    if "xx" in orders:
        orders |= {"x"}
    if "tt" in orders:
        orders |= {"t"}
    return orders


class _Tape:
    """Forward activations kept for the reverse pass."""

    def __init__(self):
        self.layer_inputs: list[dict[str, np.ndarray]] = []
        self.act: list[tuple[tuple[np.ndarray, ...], dict[str, np.ndarray]]] = []


def _jet_forward(layers, activation: Activation, X: np.ndarray, orders: frozenset, tape: _Tape | None):
    n = X.shape[0]
    order = 2 if orders & {"xx", "tt"} else 1 if orders else 0
    if tape is not None:
        order += 1
    w0, b0 = layers[0]
    z = {"u": X @ w0 + b0}
    for d in ("x", "t"):
        if d in orders:
            z[d] = np.broadcast_to(w0[_AXIS[d]], (n, w0.shape[1]))
        if d + d in orders:
            z[d + d] = None  # input is linear in (x, t)
    if tape is not None:
        tape.layer_inputs.append({"u": X})

    for w, b in layers[1:]:
        s = activation.derivatives(z["u"], order)
        a = {"u": s[0]}
        for d in ("x", "t"):
            if d not in orders:
                continue
            zd = z[d]
            a[d] = s[1] * zd
            dd = d + d
            if dd in orders:
                a[dd] = s[2] * (zd * zd)
                if z[dd] is not None:
                    a[dd] += s[1] * z[dd]
        if tape is not None:
            tape.act.append((s, z))
            tape.layer_inputs.append(a)
        z = {"u": a["u"] @ w + b}
        for c in a:
            if c != "u":
                z[c] = a[c] @ w
    return z


def _jet_backward(layers, tape: _Tape, grads: dict[str, np.ndarray], orders: frozenset) -> list:
    """Reverse pass; ``grads`` holds d(loss)/d(output channel) as ``(n, 1)`` arrays."""
    out = [None] * len(layers)
    gz = {c: g for c, g in grads.items() if g is not None}
    for li in range(len(layers) - 1, -1, -1):
        w, _ = layers[li]
        a = tape.layer_inputs[li]
        if li == 0:
            gw = a["u"].T @ gz["u"]
            for d in ("x", "t"):
                if d in gz:
                    gw[_AXIS[d]] += gz[d].sum(axis=0)
            out[0] = (gw, gz["u"].sum(axis=0))
            break
        gw = a["u"].T @ gz["u"]
        for c, g in gz.items():
            if c != "u":
                gw += a[c].T @ g
        out[li] = (gw, gz["u"].sum(axis=0))
        ga = {c: g @ w.T for c, g in gz.items()}

        s, z = tape.act[li - 1]
        new = {"u": ga["u"] * s[1]}
        for d in ("x", "t"):
            if d not in ga:
                continue
            zd = z[d]
            dd = d + d
            new["u"] += ga[d] * s[2] * zd
            new[d] = ga[d] * s[1]
            if dd in ga:
                gdd = ga[dd]
                zdd = z[dd]
                zd2 = zd * zd
                if zdd is not None:
                    new["u"] += gdd * (s[3] * zd2 + s[2] * zdd)
                    new[dd] = gdd * s[1]
                else:
                    new["u"] += gdd * (s[3] * zd2)
                new[d] += 2.0 * gdd * s[2] * zd
        gz = new
    return out


def _to_jet(z: dict, orders: frozenset) -> Jet:
    vals = {CHANNELS[c]: z[c][:, 0] for c in ("u",) + tuple(sorted(orders))}
    return Jet(**vals)


def _as_points(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != INPUT_DIM:
        raise ValueError(f"points must have shape (n, {INPUT_DIM}), got {X.shape}")
    return X


def jet(net: MlpNetwork, X, orders: Iterable[str] = ALL_ORDERS) -> Jet:
    """Batched jet evaluation at the rows ``(x, t)`` of ``X``."""
    orders = _normalize_orders(orders)
    z = _jet_forward(net.layers, net.architecture.activation, _as_points(X), orders, None)
    return _to_jet(z, orders)


def predict(net: MlpNetwork, X) -> np.ndarray:
    """Network value only, shape ``(n,)``."""
    X = _as_points(X)
    layers = net.layers
    act = net.architecture.activation
    a = X
    for w, b in layers[:-1]:
        a = act(a @ w + b)
    w, b = layers[-1]
    return (a @ w + b)[:, 0]


def forward_jet(net: MlpNetwork, x: float, t: float) -> JetValue:
    """Value and first/second input derivatives at a single point."""
    j = jet(net, np.array([[x, t]], dtype=np.float64))
    return JetValue(*(float(getattr(j, name)[0]) for name in CHANNELS.values()))


# residual(jet, X) -> (r, {channel: dr/dchannel}); r and partials are (n,) arrays
ResidualFn = Callable[[Jet, np.ndarray], tuple[np.ndarray, dict[str, np.ndarray]]]


@dataclass(frozen=True)
class LossTerm:
    """A mean-squared penalty ``mean(r(jet(X), X)**2)`` over a batch of points."""

    name: str
    points: np.ndarray
    orders: frozenset
    residual: ResidualFn
    group: str = "residual"

    def __post_init__(self):
        object.__setattr__(self, "points", _as_points(self.points))
        object.__setattr__(self, "orders", _normalize_orders(self.orders))
        if len(self.points) == 0:
            raise ValueError(f"loss term {self.name!r} has no points")


@dataclass
class ParamGradient:
    """Gradient congruent with ``MlpNetwork.params`` (flat) and its layers."""

    flat: np.ndarray
    architecture: MlpArchitecture = field(repr=False)

    @property
    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return unpack_params(self.flat, self.architecture)


def term_values(net: MlpNetwork, terms: Sequence[LossTerm]) -> list[float]:
    """Per-term mean squared residuals, without gradients."""
    layers = net.layers
    act = net.architecture.activation
    out = []
    for term in terms:
        z = _jet_forward(layers, act, term.points, term.orders, None)
        r, _ = term.residual(_to_jet(z, term.orders), term.points)
        out.append(float(np.mean(r * r)))
    return out


def loss_gradient(net: MlpNetwork, terms: Sequence[LossTerm]) -> tuple[float, ParamGradient, list[float]]:
    """Sum of per-term mean squared residuals and its exact parameter gradient.

    Returns ``(loss, gradient, per_term_losses)``.
    """
    arch = net.architecture
    layers = net.layers
    grad = np.zeros(arch.n_params)
    glayers = unpack_params(grad, arch)
    parts = []
    for term in terms:
        tape = _Tape()
        z = _jet_forward(layers, arch.activation, term.points, term.orders, tape)
        r, partials = term.residual(_to_jet(z, term.orders), term.points)
        n = r.shape[0]
        parts.append(float(np.dot(r, r) / n))
        scale = (2.0 / n) * r
        adj = {c: None for c in ("u",) + tuple(term.orders)}
        for c, p in partials.items():
            g = (scale * p)[:, None]
            adj[c] = g if adj[c] is None else adj[c] + g
        for c in adj:
            if adj[c] is None:
                adj[c] = np.zeros((n, 1))
        for (gw, gb), (dw, db) in zip(glayers, _jet_backward(layers, tape, adj, term.orders)):
            gw += dw
            gb += db
    return float(sum(parts)), ParamGradient(grad, arch), parts
