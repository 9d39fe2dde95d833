"""Hyperparameter search over learning rate, regularization and mini-batch size.

Trials are scored by the unregularized cross-entropy on a holdout set.  Each
trial's seed is derived from the search seed and the trial index, and the
seed drives both weight initialization and shuffling, so any trial can be
rerun on its own from its recorded config.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from . import seeding
from .perceptron import Activation, check_topology, stack_examples, cost_arrays
from .training import DivergenceError, TrainConfig, descend, random_init


@dataclass(frozen=True)
class SearchSpace:
    alpha_values: tuple[float, ...]
    lambda_values: tuple[float, ...]
    b_values: tuple[int, ...] = (10,)
    fixed: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        for name in ("alpha_values", "lambda_values", "b_values"):
            values = tuple(getattr(self, name))
            if not values:
                raise ValueError(f"{name} must not be empty")
            object.__setattr__(self, name, values)
        for cell in self.cells():
            self.config_for(cell, seed=0)  # validates every combination

    def cells(self) -> list[tuple[float, float, int]]:
        """Grid cells in lexicographic order: alpha, then lambda, then b."""
        return list(itertools.product(self.alpha_values, self.lambda_values, self.b_values))

    def config_for(self, cell, seed: int) -> TrainConfig:
        alpha, lam, b = cell
        return self.fixed.replace(alpha=float(alpha), lam=float(lam), b=int(b), seed=seed)


@dataclass(frozen=True)
class TrialResult:
    index: int
    config: TrainConfig
    validation_cost: float
    train_cost: float
    diverged: bool = False
    rank: int | None = None


def holdout_split(examples: Sequence, fraction: float, seed: int) -> tuple[list, list]:
    """Shuffle with ``seed`` and cut into a training part of ``round(fraction * n)``."""
    n = len(examples)
    if n < 2:
        raise ValueError("need at least two examples to split")
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    k = round(fraction * n)
    if k < 1 or k > n - 1:
        raise ValueError(f"fraction {fraction} of {n} examples leaves one side empty")
    order = seeding.make_rng(seed, seeding.SPLIT).permutation(n)
    return [examples[i] for i in order[:k]], [examples[i] for i in order[k:]]


def run_trial(index, config: TrainConfig, train, validation, topology, hidden_activation=Activation.SIGMOID, bias=False) -> TrialResult:
    """Train from scratch with ``config`` and score on both sides of the split."""
    net = random_init(topology, config.init_bound, config.seed, hidden_activation, bias)
    try:
        net, _ = descend(net, train, config)
    except DivergenceError:
        return TrialResult(index, config, math.inf, math.inf, diverged=True)
    Xt, Yt = stack_examples(train, net.topology[-1])
    Xv, Yv = stack_examples(validation, net.topology[-1])
    return TrialResult(index, config, cost_arrays(net, Xv, Yv), cost_arrays(net, Xt, Yt))


def _star(args):
    return run_trial(*args)


def _run(tasks: list, jobs: int) -> list[TrialResult]:
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_star, tasks))
    return [_star(t) for t in tasks]


def _rank(results: list[TrialResult]) -> list[TrialResult]:
    ok = sorted((r for r in results if not r.diverged), key=lambda r: (r.validation_cost, r.index))
    bad = sorted((r for r in results if r.diverged), key=lambda r: r.index)
    ranked = [TrialResult(r.index, r.config, r.validation_cost, r.train_cost, False, k + 1) for k, r in enumerate(ok)]
    return ranked + bad


def _check_split(train, validation, space: SearchSpace):
    if not train:
        raise ValueError("training split is empty")
    if not validation:
        raise ValueError("validation split is empty")
    if space.fixed.mode == "minibatch" and max(space.b_values) > len(train):
        raise ValueError(f"mini-batch size {max(space.b_values)} exceeds the {len(train)} training examples")


def grid_search(
    space: SearchSpace, train, validation, topology, seed: int = 0,
    hidden_activation=Activation.SIGMOID, bias: bool = False, jobs: int = 1,
) -> list[TrialResult]:
    """Evaluate every grid cell; returns trials best-first, diverged ones last."""
    _check_split(train, validation, space)
    topology = check_topology(topology)
    tasks = [
        (k, space.config_for(cell, seeding.derive_seed(seed, seeding.TRIAL, k)), train, validation, topology, hidden_activation, bias)
        for k, cell in enumerate(space.cells())
    ]
    return _rank(_run(tasks, jobs))


def random_search(
    space: SearchSpace, n_trials: int, seed: int, train, validation, topology,
    hidden_activation=Activation.SIGMOID, bias: bool = False, jobs: int = 1,
) -> list[TrialResult]:
    """Evaluate ``n_trials`` cells drawn uniformly, with replacement, from the grid."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    _check_split(train, validation, space)
    topology = check_topology(topology)
    cells = space.cells()
    picks = seeding.make_rng(seed, seeding.SAMPLE).integers(0, len(cells), size=n_trials)
    tasks = [
        (k, space.config_for(cells[int(c)], seeding.derive_seed(seed, seeding.TRIAL, k)), train, validation, topology, hidden_activation, bias)
        for k, c in enumerate(picks)
    ]
    return _rank(_run(tasks, jobs))


def format_trials(results: Sequence[TrialResult]) -> str:
    lines = ["trial,alpha,lambda,b,train_cost,validation_cost,diverged"]
    for r in results:
        c = r.config
        lines.append(
            f"{r.index},{c.alpha!r},{c.lam!r},{c.b},{r.train_cost!r},{r.validation_cost!r},{'yes' if r.diverged else 'no'}"
        )
    return "\n".join(lines) + "\n"
