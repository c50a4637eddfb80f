"""Elementwise activation functions with closed-form derivatives.

Each activation supplies its value and its first three derivatives.  The
third derivative is only needed by the reverse pass through the
second-order jet.
"""
from __future__ import annotations

import enum

import numpy as np
from scipy.special import expit


class Activation(str, enum.Enum):
    TANH = "tanh"
    SIGMOID = "sigmoid"
    RELU = "relu"
    SWISH = "swish"

    @classmethod
    def parse(cls, value: "Activation | str") -> "Activation":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            names = ", ".join(a.value for a in cls)
            raise ValueError(f"unknown activation {value!r}; expected one of {names}") from None

    def derivatives(self, z: np.ndarray, order: int = 2) -> tuple[np.ndarray, ...]:
        """Return ``(s, s', ..., s^(order))`` evaluated at ``z``.

        ``order`` may be 0 to 3.  ReLU uses the convention ``relu'(0) = 0``
        and all of its higher derivatives vanish identically.
        """
        if not 0 <= order <= 3:
            raise ValueError("order must lie in [0, 3]")
        return _DERIVS[self](np.asarray(z, dtype=np.float64), order)

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return self.derivatives(z, 0)[0]


def _tanh(z, order):
    s = np.tanh(z)
    out = [s]
    if order >= 1:
        d1 = 1.0 - s * s
        out.append(d1)
    if order >= 2:
        d2 = -2.0 * s * d1
        out.append(d2)
    if order >= 3:
        out.append(-2.0 * (d1 * d1 + s * d2))
    return tuple(out)


def _sigmoid_parts(z, order):
    s = expit(z)
    out = [s]
    if order >= 1:
        d1 = s * (1.0 - s)
        out.append(d1)
    if order >= 2:
        d2 = d1 * (1.0 - 2.0 * s)
        out.append(d2)
    if order >= 3:
        out.append(d2 * (1.0 - 2.0 * s) - 2.0 * d1 * d1)
    return out


def _sigmoid(z, order):
    return tuple(_sigmoid_parts(z, order))


def _relu(z, order):
    out = [np.maximum(z, 0.0)]
    if order >= 1:
        out.append((z > 0.0).astype(np.float64))
    zeros = np.zeros_like(z)
    out.extend(zeros for _ in range(max(order - 1, 0)))
    return tuple(out)


def _swish(z, order):
    # k-th derivative of z * sigmoid(z) is k * sigmoid^(k-1) + z * sigmoid^(k)
    sig = _sigmoid_parts(z, order)
    out = [z * sig[0]]
    for k in range(1, order + 1):
        out.append(k * sig[k - 1] + z * sig[k])
    return tuple(out)


_DERIVS = {
    Activation.TANH: _tanh,
    Activation.SIGMOID: _sigmoid,
    Activation.RELU: _relu,
    Activation.SWISH: _swish,
}
