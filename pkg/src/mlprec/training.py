"""Backpropagation, gradient checking, initialization and gradient descent."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from . import seeding
from .matrix import ShapeError, frobenius_norm, matmul, transpose
from .perceptron import (
    Activation,
    Network,
    activate_derivative,
    check_topology,
    cost_arrays,
    forward_batch,
    stack_examples,
)

log = logging.getLogger(__name__)

MODES = ("batch", "stochastic", "minibatch")


class DivergenceError(RuntimeError):
    def __init__(self, epoch: int, cost: float, unit: str = "epoch"):
        super().__init__(f"cost became non-finite ({cost}) at {unit} {epoch}")
        self.epoch = epoch
        self.cost = cost


class GradientCheckError(RuntimeError):
    def __init__(self, epsilon: float, tolerance: float):
        super().__init__(f"gradient check failed: epsilon={epsilon:.3e} exceeds tolerance {tolerance:.1e}")
        self.epsilon = epsilon
        self.tolerance = tolerance


@dataclass(frozen=True)
class GradientSet:
    """Per-layer partial derivatives, each shaped like its weight matrix."""

    per_layer: tuple[np.ndarray, ...]

    def flatten(self) -> np.ndarray:
        """Layer-major, row-major concatenation of all entries."""
        return np.concatenate([np.ravel(d) for d in self.per_layer])

    def shapes(self) -> tuple[tuple[int, ...], ...]:
        return tuple(d.shape for d in self.per_layer)


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.5
    lam: float = 0.0
    mode: str = "batch"
    b: int = 10
    epochs: int = 100
    seed: int = 0
    init_bound: float = 0.12
    gradcheck: str = "off"
    paper_literal_backprop: bool = False
    gradcheck_gamma: float = 1e-7
    gradcheck_tolerance: float = 1e-7

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be a positive finite number, got {self.alpha}")
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError(f"lambda must be non-negative, got {self.lam}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.b < 1:
            raise ValueError(f"mini-batch size must be >= 1, got {self.b}")
        if self.mode == "minibatch" and self.b < 2:
            raise ValueError("mini-batch mode needs b >= 2")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if not self.init_bound > 0:
            raise ValueError(f"init_bound must be positive, got {self.init_bound}")
        if self.gradcheck not in ("off", "once"):
            raise ValueError(f"gradcheck must be 'off' or 'once', got {self.gradcheck!r}")
        if not (self.gradcheck_gamma > 0 and self.gradcheck_tolerance > 0):
            raise ValueError("gradient-check step and tolerance must be positive")

    def replace(self, **changes) -> "TrainConfig":
        return replace(self, **changes)


# -- initialization ----------------------------------------------------------


def random_init(layer_sizes, bound: float, seed: int, hidden_activation=Activation.SIGMOID, bias: bool = False) -> Network:
    """Weights drawn independently and uniformly from the open interval (-bound, bound).

    Zeros, the endpoint, and repeated values within a layer are redrawn, so
    no two weights in a layer start equal.
    """
    if not bound > 0:
        raise ValueError(f"bound must be positive, got {bound}")
    sizes = check_topology(layer_sizes)
    rng = seeding.make_rng(seed, seeding.INIT)
    extra = 1 if bias else 0
    weights = []
    for a, b in zip(sizes, sizes[1:]):
        w = rng.uniform(-bound, bound, size=(b, a + extra))
        while True:
            flat = w.ravel()
            _, first = np.unique(flat, return_index=True)
            bad = np.ones(flat.size, dtype=bool)
            bad[first] = False
            bad |= (flat == 0.0) | (flat == -bound)
            if not bad.any():
                break
            flat[bad] = rng.uniform(-bound, bound, size=int(bad.sum()))
        weights.append(w)
    return Network(tuple(weights), hidden_activation, bias)


# -- gradients ---------------------------------------------------------------


def _gradients(
    net: Network, X: np.ndarray, Y: np.ndarray, lam: float, paper_literal: bool = False, _flip_delta: int | None = None
) -> list[np.ndarray]:
    # _flip_delta negates the delta feeding weight matrix k; mutation tests only
    m = X.shape[0]
    trace = forward_batch(net, X)
    acts, zs = trace.activations, trace.pre_activations
    skip = 1 if net.bias else 0
    delta = acts[-1] - Y
    grads: list[np.ndarray] = [None] * len(net.weights)  # type: ignore[list-item]
    for l in range(len(net.weights) - 1, -1, -1):
        w = net.weights[l]
        if l == _flip_delta:
            delta = -delta
        inp = np.hstack([np.ones((m, 1)), acts[l]]) if net.bias else acts[l]
        acc = matmul(transpose(delta), inp)
        reg = w.copy()
        reg[:, :skip] = 0.0
        grads[l] = acc / m + (lam / m) * reg
        if l > 0:
            back = matmul(delta, np.ascontiguousarray(w[:, skip:]))
            if paper_literal:
                a = acts[l]
                deriv = a * (1.0 - a)
            else:
                deriv = activate_derivative(net.hidden_activation, acts[l], zs[l - 1])
            delta = back * deriv
    return grads


def backprop(net: Network, batch, lam: float, paper_literal: bool = False) -> GradientSet:
    """Exact partial derivatives of the regularized cross-entropy over ``batch``.

    With ``paper_literal`` the hidden-layer derivative is always a(1 - a),
    whatever the configured activation.
    """
    X, Y = stack_examples(batch, net.topology[-1])
    if X.shape[1] != net.topology[0]:
        raise ShapeError(f"examples have {X.shape[1]} features, network expects {net.topology[0]}")
    return GradientSet(tuple(_gradients(net, X, Y, lam, paper_literal)))


def central_difference(
    f: Callable[[list[np.ndarray]], float], params: Sequence[np.ndarray], gamma: float, dtype=np.longdouble
) -> list[np.ndarray]:
    """Two-sided difference quotient of ``f`` for every entry of ``params``.

    One entry is perturbed at a time; ``params`` are never modified.  Probes
    are built in ``dtype``: with the default extended precision, a cost that
    honours its input precision resolves differences well below the float64
    rounding floor of roughly ``ulp(C) / gamma``.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    base = [np.array(p, dtype=dtype) for p in params]
    out = []
    for k, p in enumerate(base):
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            probe = [q.copy() for q in base]
            probe[k][idx] = p[idx] + gamma
            up = f(probe)
            probe[k][idx] = p[idx] - gamma
            down = f(probe)
            g[idx] = (up - down) / (2.0 * gamma)
        out.append(g.astype(np.float64))
    return out


def numerical_gradient(net: Network, examples, lam: float, gamma: float = 1e-7) -> GradientSet:
    X, Y = stack_examples(examples, net.topology[-1])
    grads = central_difference(lambda ws: cost_arrays(net.with_weights(ws), X, Y, lam), net.weights, gamma)
    return GradientSet(tuple(grads))


def gradient_check(analytic: GradientSet, numeric: GradientSet) -> float:
    """Normalized distance ||G' - G|| / (||G'|| + ||G||) between two gradient sets."""
    if analytic.shapes() != numeric.shapes():
        raise ShapeError(f"gradient shapes differ: {analytic.shapes()} vs {numeric.shapes()}")
    g = analytic.flatten()
    gn = numeric.flatten()
    denom = frobenius_norm(gn[None, :]) + frobenius_norm(g[None, :])
    if denom == 0.0:
        return 0.0
    return frobenius_norm((gn - g)[None, :]) / denom


# -- descent -----------------------------------------------------------------


def _batches(m: int, cfg: TrainConfig, rng: np.random.Generator) -> list[np.ndarray]:
    if cfg.mode == "batch":
        return [np.arange(m)]
    order = rng.permutation(m)
    size = 1 if cfg.mode == "stochastic" else cfg.b
    return [order[k:k + size] for k in range(0, m, size)]


def descend(net: Network, examples, cfg: TrainConfig) -> tuple[Network, list[float]]:
    """Run ``cfg.epochs`` epochs of gradient descent from ``net``.

    Returns the final network and the regularized training cost after each
    epoch.  Sub-batch steps scale the weight penalty by the batch's share of
    the data, so every mode descends the same full-data objective.
    """
    X, Y = stack_examples(examples, net.topology[-1])
    m = X.shape[0]
    if cfg.mode == "minibatch" and not (2 <= cfg.b <= m):
        raise ValueError(f"mini-batch size {cfg.b} must lie between 2 and the example count {m}")
    rng = seeding.make_rng(cfg.seed, seeding.SHUFFLE)
    weights = [np.array(w) for w in net.weights]
    history: list[float] = []
    checked = cfg.gradcheck == "off"
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(cfg.epochs):
            _epoch(net, X, Y, m, cfg, rng, weights, epoch, not checked)
            checked = True
            cost = cost_arrays(net.with_weights(weights), X, Y, cfg.lam)
            if not math.isfinite(cost):
                raise DivergenceError(epoch, cost)
            history.append(cost)
    return net.with_weights(weights), history


def _epoch(net, X, Y, m, cfg, rng, weights, epoch, check_first) -> None:
    for idx in _batches(m, cfg, rng):
        current = net.with_weights(weights)
        Xb, Yb = X[idx], Y[idx]
        lam_b = cfg.lam * len(idx) / m
        grads = _gradients(current, Xb, Yb, lam_b, cfg.paper_literal_backprop)
        if check_first:
            numeric = central_difference(
                lambda ws: cost_arrays(current.with_weights(ws), Xb, Yb, lam_b), current.weights, cfg.gradcheck_gamma
            )
            eps = gradient_check(GradientSet(tuple(grads)), GradientSet(tuple(numeric)))
            log.debug("gradient check epsilon %.3e", eps)
            if not eps <= cfg.gradcheck_tolerance:
                raise GradientCheckError(eps, cfg.gradcheck_tolerance)
            check_first = False
        for w, d in zip(weights, grads):
            w -= cfg.alpha * d
        if not all(np.all(np.isfinite(w)) for w in weights):
            raise DivergenceError(epoch, math.nan)
