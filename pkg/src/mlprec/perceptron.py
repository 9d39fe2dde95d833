"""Feed-forward network values, activations, forward propagation and costs.

Weight matrix ``weights[l]`` maps layer ``l`` to layer ``l + 1`` and has shape
``(s_{l+1}, s_l)``.  Networks carry no bias units unless built with
``bias=True``, in which case every weight matrix gains a leading bias column
that the regularizer skips.  The output layer is always sigmoid so the
cross-entropy cost stays defined.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .matrix import ShapeError, as_vector, matmul, matvec, transpose

LOG_CLAMP = 1e-12


class Activation(str, enum.Enum):
    SIGMOID = "sigmoid"
    TANH = "tanh"
    RELU = "relu"


def _floats(a) -> np.ndarray:
    a = np.asarray(a)
    return a.astype(np.result_type(a.dtype, np.float64), copy=False)


def sigmoid(z):
    z = _floats(z)
    e = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return float(out) if out.ndim == 0 else out


def activate(kind: Activation | str, z):
    kind = Activation(kind)
    if kind is Activation.SIGMOID:
        return sigmoid(z)
    z = _floats(z)
    out = np.tanh(z) if kind is Activation.TANH else np.maximum(z, 0.0)
    return float(out) if out.ndim == 0 else out


def activate_derivative(kind: Activation | str, a, z):
    """Derivative of the activation at ``z`` given ``a = activate(kind, z)``.

    The ReLU derivative at exactly zero is taken to be 0.
    """
    kind = Activation(kind)
    a = _floats(a)
    if kind is Activation.SIGMOID:
        out = a * (1.0 - a)
    elif kind is Activation.TANH:
        out = 1.0 - a * a
    else:
        out = (np.asarray(z) > 0).astype(a.dtype)
    return float(out) if out.ndim == 0 else out


def check_topology(layer_sizes: Sequence[int]) -> tuple[int, ...]:
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ValueError(f"topology needs at least two layers of size >= 1, got {list(layer_sizes)}")
    return sizes


@dataclass(frozen=True)
class Network:
    weights: tuple[np.ndarray, ...]
    hidden_activation: Activation = Activation.SIGMOID
    bias: bool = False

    def __post_init__(self):
        ws = []
        for w in self.weights:
            w = np.array(_floats(w))
            if w.ndim != 2:
                raise ShapeError(f"weight matrices must be 2-D, got shape {w.shape}")
            if not np.all(np.isfinite(w)):
                raise ValueError("network weights must be finite")
            w.setflags(write=False)
            ws.append(w)
        if not ws:
            raise ShapeError("a network needs at least one weight matrix")
        extra = 1 if self.bias else 0
        for prev, nxt in zip(ws, ws[1:]):
            if nxt.shape[1] != prev.shape[0] + extra:
                raise ShapeError(f"weight shapes {prev.shape} and {nxt.shape} do not chain")
        if ws[0].shape[1] - extra < 1:
            raise ShapeError("input layer must have at least one unit")
        object.__setattr__(self, "weights", tuple(ws))
        object.__setattr__(self, "hidden_activation", Activation(self.hidden_activation))

    @property
    def topology(self) -> tuple[int, ...]:
        extra = 1 if self.bias else 0
        return (self.weights[0].shape[1] - extra,) + tuple(w.shape[0] for w in self.weights)

    @property
    def n_layers(self) -> int:
        return len(self.weights) + 1

    def with_weights(self, weights) -> "Network":
        return Network(tuple(weights), self.hidden_activation, self.bias)

    def activation_for(self, layer: int) -> Activation:
        """Activation used to produce layer ``layer`` (1-based weight index)."""
        return Activation.SIGMOID if layer == len(self.weights) else self.hidden_activation


def zero_network(layer_sizes, hidden_activation=Activation.SIGMOID, bias=False) -> Network:
    sizes = check_topology(layer_sizes)
    extra = 1 if bias else 0
    return Network(tuple(np.zeros((b, a + extra)) for a, b in zip(sizes, sizes[1:])), hidden_activation, bias)


@dataclass(frozen=True)
class ForwardTrace:
    activations: list  # a^(1) = x, ..., a^(L)
    pre_activations: list  # z^(2), ..., z^(L)

    @property
    def output(self):
        return self.activations[-1]


def _with_bias_column(A: np.ndarray) -> np.ndarray:
    return np.hstack([np.ones((A.shape[0], 1), dtype=A.dtype), A])


def forward(net: Network, x) -> ForwardTrace:
    """Propagate one input vector; every layer is g(theta a)."""
    a = as_vector(x)
    if a.shape[0] != net.topology[0]:
        raise ShapeError(f"input has {a.shape[0]} features, network expects {net.topology[0]}")
    acts, zs = [a], []
    for layer, w in enumerate(net.weights, start=1):
        inp = np.concatenate([np.ones(1, dtype=a.dtype), a]) if net.bias else a
        z = matvec(w, inp)
        a = activate(net.activation_for(layer), z)
        zs.append(z)
        acts.append(a)
    return ForwardTrace(acts, zs)


def forward_batch(net: Network, X) -> ForwardTrace:
    """Row-wise forward propagation; trace entries are (m, s_l) matrices.

    Entries are bit-identical to calling :func:`forward` on each row.
    """
    A = _floats(X)
    if A.ndim != 2 or A.shape[1] != net.topology[0]:
        raise ShapeError(f"batch of shape {A.shape} does not match input size {net.topology[0]}")
    acts, zs = [A], []
    for layer, w in enumerate(net.weights, start=1):
        inp = _with_bias_column(A) if net.bias else A
        Z = matmul(inp, transpose(w))
        A = activate(net.activation_for(layer), Z)
        zs.append(Z)
        acts.append(A)
    return ForwardTrace(acts, zs)


def predict(net: Network, X) -> np.ndarray:
    """Network outputs h(x) for each row of ``X``, shape (m, K)."""
    return forward_batch(net, X).output


# -- costs -------------------------------------------------------------------


def example_cost(h: float, y: int) -> float:
    """Cross-entropy of one prediction; ``h`` is clamped away from 0 and 1."""
    h = min(max(float(h), LOG_CLAMP), 1.0 - LOG_CLAMP)
    return -y * math.log(h) - (1 - y) * math.log(1.0 - h)


def stack_examples(examples, n_outputs: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Turn a list of ``(x, y)`` pairs into an input matrix and a label matrix."""
    if len(examples) == 0:
        raise ValueError("example list is empty")
    X = np.array([as_vector(x) for x, _ in examples], dtype=np.float64)
    Y = np.array([np.atleast_1d(np.asarray(y, dtype=np.float64)) for _, y in examples])
    if n_outputs is not None and Y.shape[1] != n_outputs:
        raise ShapeError(f"labels have {Y.shape[1]} entries, network has {n_outputs} outputs")
    return X, Y


def cross_entropy(H: np.ndarray, Y: np.ndarray):
    """Mean over rows of the summed per-output cross-entropy, in the dtype of ``H``."""
    if H.shape != Y.shape:
        raise ShapeError(f"outputs {H.shape} and labels {Y.shape} differ in shape")
    Hc = np.clip(H, LOG_CLAMP, 1.0 - LOG_CLAMP)
    terms = Y * np.log(Hc) + (1.0 - Y) * np.log(1.0 - Hc)
    return -np.sum(terms) / H.shape[0]


def weight_penalty(net: Network):
    """Sum of squared weights, bias columns excluded."""
    skip = 1 if net.bias else 0
    return sum(np.sum(w[:, skip:] * w[:, skip:]) for w in net.weights)


def cost_arrays(net: Network, X: np.ndarray, Y: np.ndarray, lam: float = 0.0):
    """Cross-entropy cost plus the weight penalty for stacked examples.

    Evaluated in the weights' precision; the result is a Python float unless
    the network holds extended-precision weights.
    """
    m = X.shape[0]
    if m == 0:
        raise ValueError("example list is empty")
    c = cross_entropy(predict(net, X), Y)
    if lam:
        c = c + lam / (2.0 * m) * weight_penalty(net)
    return float(c) if c.dtype == np.float64 else c


def total_cost(net: Network, examples) -> float:
    X, Y = stack_examples(examples, net.topology[-1])
    return cost_arrays(net, X, Y)


def total_cost_regularized(net: Network, examples, lam: float) -> float:
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    X, Y = stack_examples(examples, net.topology[-1])
    return cost_arrays(net, X, Y, lam)
