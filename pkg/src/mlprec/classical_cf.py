"""Matrix-factorization collaborative filtering baseline.

Item features ``X`` (n_m x n) and user parameters ``Theta`` (n_u x n) are
learned together by gradient descent on

    1/2 * sum_{r(i,j)=1} (theta_j . x_i - y_ij)^2 + lam/2 * (|Theta|^2 + |X|^2)

Both matrices step simultaneously from gradients taken at the pre-update
values.  The regularizer's gradient is ``lam * x`` (the exact derivative),
not ``lam/2 * x``.  Predictions pass ``theta . x`` through a sigmoid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import seeding
from .dataset import RatingsDataset
from .matrix import ShapeError, as_vector, dot, matmul, transpose
from .perceptron import sigmoid
from .training import DivergenceError


@dataclass(frozen=True)
class CfConfig:
    alpha: float = 0.01
    lam: float = 0.0
    n: int = 2
    iters: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be non-negative, got {self.lam}")
        if self.n < 1:
            raise ValueError(f"latent dimension must be >= 1, got {self.n}")
        if self.iters < 0:
            raise ValueError(f"iters must be >= 0, got {self.iters}")


@dataclass(frozen=True)
class CfModel:
    X: np.ndarray
    Theta: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64)
        T = np.array(self.Theta, dtype=np.float64)
        if X.ndim != 2 or T.ndim != 2 or X.shape[1] != T.shape[1]:
            raise ShapeError(f"item features {X.shape} and user parameters {T.shape} disagree on n")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(T))):
            raise ValueError("model entries must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Theta", T)

    @property
    def n(self) -> int:
        return self.X.shape[1]

    def predicted_ratings(self) -> np.ndarray:
        """theta_j . x_i for every (item, user) pair, shape (n_m, n_u)."""
        return matmul(self.X, transpose(self.Theta))


def _check(model: CfModel, d: RatingsDataset) -> None:
    if model.X.shape[0] != d.n_m or model.Theta.shape[0] != d.n_u:
        raise ShapeError(
            f"model covers {model.X.shape[0]} items x {model.Theta.shape[0]} users, data has {d.n_m} x {d.n_u}"
        )


def _cost(X, Theta, Y, R, lam) -> float:
    E = (matmul(X, transpose(Theta)) - Y) * R
    return float(0.5 * np.sum(E * E) + 0.5 * lam * (np.sum(Theta * Theta) + np.sum(X * X)))


def _grads(X, Theta, Y, R, lam):
    E = (matmul(X, transpose(Theta)) - Y) * R
    return matmul(E, Theta) + lam * X, matmul(transpose(E), X) + lam * Theta


def cf_cost(model: CfModel, d: RatingsDataset, lam: float) -> float:
    _check(model, d)
    return _cost(model.X, model.Theta, d.rating_matrix(), d.indicator(), lam)


def cf_gradients(model: CfModel, d: RatingsDataset, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Partial derivatives of :func:`cf_cost` with respect to X and Theta."""
    _check(model, d)
    return _grads(model.X, model.Theta, d.rating_matrix(), d.indicator(), lam)


def cf_init(n_items: int, n_users: int, n: int, seed: int) -> CfModel:
    rng = seeding.make_rng(seed, seeding.INIT)
    return CfModel(rng.uniform(-0.5, 0.5, (n_items, n)), rng.uniform(-0.5, 0.5, (n_users, n)))


def cf_train(d: RatingsDataset, cfg: CfConfig) -> CfModel:
    if not d.ratings:
        raise ValueError("cannot train on an empty ratings set")
    model = cf_init(d.n_m, d.n_u, cfg.n, cfg.seed)
    Y, R = d.rating_matrix(), d.indicator()
    X, Theta = model.X, model.Theta
    with np.errstate(over="ignore", invalid="ignore"):
        for it in range(cfg.iters):
            dX, dTheta = _grads(X, Theta, Y, R, cfg.lam)
            X = X - cfg.alpha * dX
            Theta = Theta - cfg.alpha * dTheta
            cost = _cost(X, Theta, Y, R, cfg.lam)
            if not math.isfinite(cost):
                raise DivergenceError(it, cost, unit="iteration")
    return CfModel(X, Theta)


def cf_predict(theta, x) -> float:
    """Sigmoid of theta . x: the estimated chance the user likes the item."""
    theta = as_vector(theta)
    x = as_vector(x)
    if theta.shape != x.shape:
        raise ShapeError(f"parameter vector length {theta.shape[0]} != feature vector length {x.shape[0]}")
    return sigmoid(dot(theta, x))
