"""Holdout comparison of the per-user perceptron against simpler baselines.

For each user the rated items are split into training and validation parts.
Three models are scored on the validation items:

* ``mlp``: the configured network topology;
* ``linear``: topology ``[n, 1]``, i.e. a logistic classifier on the item features;
* ``cf``: matrix factorization fitted on every user's training ratings, deciding
  "like" when the predicted rating reaches the rating threshold.

Accuracy is the fraction of validation items whose decision matches the
binarized rating.  Network costs are unregularized cross-entropy; the CF cost
is the mean squared rating error.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import seeding
from .classical_cf import CfConfig, cf_train
from .dataset import FeatureMatrix, RatingsDataset, binarize, transform
from .perceptron import total_cost
from .recommender import PipelineConfig, accuracy, train_user
from .training import TrainConfig
from .tuning import holdout_split


@dataclass(frozen=True)
class UserEval:
    user_id: str
    n_train: int
    n_validation: int
    mlp_accuracy: float
    mlp_cost: float
    linear_accuracy: float
    linear_cost: float
    cf_accuracy: float
    cf_cost: float


def _validation_examples(model, features, labels, j, items):
    return [(transform(features.X[i], model.stats), labels.labels[(i, j)]) for i in items]


def evaluate(
    dataset: RatingsDataset,
    features: FeatureMatrix,
    pipeline: PipelineConfig,
    cfg: TrainConfig,
    cf_cfg: CfConfig,
    fraction: float = 0.8,
    seed: int = 0,
    users=None,
) -> list[UserEval]:
    labels = binarize(dataset, pipeline.rating_threshold)
    users = range(dataset.n_u) if users is None else [dataset.user_index(u) for u in users]
    splits = {}
    for j in users:
        rated = dataset.items_rated_by(j)
        train, val = holdout_split(rated, fraction, seeding.derive_seed(seed, seeding.SPLIT, j))
        splits[j] = (sorted(train), sorted(val))

    train_keys = [(i, j) for j, (tr, _) in splits.items() for i in tr]
    cf = cf_train(dataset.subset(train_keys), replace(cf_cfg, seed=seeding.derive_seed(seed, seeding.INIT)))
    predicted = cf.predicted_ratings()

    linear = replace(pipeline, topology=(pipeline.topology[0], 1))
    out = []
    for j, (tr, val) in splits.items():
        user_cfg = cfg.replace(seed=seeding.derive_seed(seed, seeding.USER, j))
        row = {}
        for name, pipe in (("mlp", pipeline), ("linear", linear)):
            model = train_user(j, dataset, features, pipe, user_cfg, items=tr)
            ex = _validation_examples(model, features, labels, j, val)
            row[f"{name}_accuracy"] = accuracy(model.net, ex, pipe.decision_threshold)
            row[f"{name}_cost"] = total_cost(model.net, ex)
        truth = np.array([labels.labels[(i, j)] for i in val])
        pred = np.array([predicted[i, j] for i in val])
        actual = np.array([dataset.ratings[(i, j)] for i in val])
        row["cf_accuracy"] = float(np.mean((pred >= pipeline.rating_threshold) == (truth == 1)))
        row["cf_cost"] = float(np.mean((pred - actual) ** 2))
        out.append(UserEval(dataset.user_ids[j], len(tr), len(val), **row))
    return out


def summarize(rows: list[UserEval]) -> dict[str, float]:
    """Validation-size-weighted accuracy and mean cost for each model."""
    weights = np.array([r.n_validation for r in rows], dtype=float)
    summary = {}
    for name in ("mlp", "linear", "cf"):
        acc = np.array([getattr(r, f"{name}_accuracy") for r in rows])
        cost = np.array([getattr(r, f"{name}_cost") for r in rows])
        summary[f"{name}_accuracy"] = float(np.sum(acc * weights) / np.sum(weights))
        summary[f"{name}_cost"] = float(np.mean(cost))
    return summary


def format_eval(rows: list[UserEval]) -> str:
    cols = ("mlp_accuracy", "mlp_cost", "linear_accuracy", "linear_cost", "cf_accuracy", "cf_cost")
    lines = ["user_id,n_train,n_validation," + ",".join(cols)]
    for r in rows:
        lines.append(f"{r.user_id},{r.n_train},{r.n_validation}," + ",".join(repr(getattr(r, c)) for c in cols))
    s = summarize(rows)
    total_train = sum(r.n_train for r in rows)
    total_val = sum(r.n_validation for r in rows)
    lines.append(f"ALL,{total_train},{total_val}," + ",".join(repr(s[c]) for c in cols))
    return "\n".join(lines) + "\n"
