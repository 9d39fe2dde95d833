"""Per-user recommendation pipeline and model persistence.

Every user gets an independent network with one sigmoid output, trained on
the items that user rated.  Ratings become labels through
``rating_threshold``; a candidate is recommended when its score is at least
``decision_threshold``.  The two thresholds live on different scales and are
kept separate.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .classical_cf import CfModel
from .dataset import METHODS, BinaryLabels, FeatureMatrix, RatingsDataset, ScalingStats, binarize, fit_stats, transform
from .matrix import ShapeError
from .perceptron import Activation, Network, check_topology, forward, predict
from .training import TrainConfig, descend, random_init

log = logging.getLogger(__name__)

FORMAT = "mlprec-model"
VERSION = 1


class ColdUserError(ValueError):
    """The user has no ratings to learn from."""


class ModelFormatError(ValueError):
    pass


class VersionMismatchError(ModelFormatError):
    pass


class CorruptModelError(ModelFormatError):
    pass


class ModelShapeError(ModelFormatError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    """Everything besides the optimizer settings that shapes a user model."""

    topology: tuple[int, ...]
    hidden_activation: Activation = Activation.SIGMOID
    bias: bool = False
    preprocessing: str = "normalize"
    rating_threshold: float = 3.0
    decision_threshold: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "topology", check_topology(self.topology))
        object.__setattr__(self, "hidden_activation", Activation(self.hidden_activation))
        if self.topology[-1] != 1:
            raise ValueError("recommendation networks have exactly one output unit")
        if not 0.0 < self.decision_threshold < 1.0:
            raise ValueError(f"decision threshold must lie in (0, 1), got {self.decision_threshold}")
        if self.preprocessing not in METHODS:
            raise ValueError(f"unknown preprocessing {self.preprocessing!r}; choose from {METHODS}")


@dataclass(frozen=True)
class UserModel:
    user_id: str
    net: Network
    stats: ScalingStats
    threshold: float
    rating_threshold: float
    training_meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.stats.n_columns != self.net.topology[0]:
            raise ModelShapeError(
                f"statistics cover {self.stats.n_columns} features, network input has {self.net.topology[0]}"
            )
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"decision threshold must lie in (0, 1), got {self.threshold}")


@dataclass(frozen=True)
class Recommendation:
    item_id: str
    score: float
    recommended: bool


# -- training ----------------------------------------------------------------


def build_user_examples(user: int, labels: BinaryLabels, X: FeatureMatrix, items: Sequence[int] | None = None) -> list:
    """One ``(features, label)`` pair per item the user rated, in item order.

    ``items`` restricts the examples to a subset of the user's rated items.
    """
    rated = sorted(i for (i, j) in labels.labels if j == user)
    if not rated:
        raise ColdUserError(f"user index {user} has no ratings")
    if items is not None:
        keep = set(items)
        rated = [i for i in rated if i in keep]
    return [(X.X[i], labels.labels[(i, user)]) for i in rated]


def _user_position(dataset: RatingsDataset, user) -> int:
    if isinstance(user, (int, np.integer)):
        if not 0 <= user < dataset.n_u:
            raise KeyError(f"user index {user} out of range")
        return int(user)
    return dataset.user_index(user)


def train_user(
    user,
    dataset: RatingsDataset,
    features: FeatureMatrix,
    pipeline: PipelineConfig,
    cfg: TrainConfig,
    items: Sequence[int] | None = None,
) -> UserModel:
    """Fit one user's network.

    ``features`` holds raw rows aligned to ``dataset.item_ids``.  Scaling
    statistics are fitted on the user's training rows only and stored with
    the model so new items are transformed identically at serving time.
    """
    j = _user_position(dataset, user)
    if features.item_ids != dataset.item_ids:
        raise ShapeError("feature rows are not aligned to the dataset's items")
    if features.n != pipeline.topology[0]:
        raise ShapeError(f"topology expects {pipeline.topology[0]} inputs, features have {features.n}")
    labels = binarize(dataset, pipeline.rating_threshold)
    raw = build_user_examples(j, labels, features, items)
    if not raw:
        raise ColdUserError(f"user {dataset.user_ids[j]!r} has no training items")
    stats = fit_stats(np.array([x for x, _ in raw]), pipeline.preprocessing)
    examples = [(transform(x, stats), y) for x, y in raw]
    classes = {y for _, y in examples}
    if len(classes) < 2:
        log.warning("user %s has a single label class %s", dataset.user_ids[j], classes)
    net = random_init(pipeline.topology, cfg.init_bound, cfg.seed, pipeline.hidden_activation, pipeline.bias)
    net, history = descend(net, examples, cfg)
    meta = {
        "seed": cfg.seed,
        "config": asdict(cfg),
        "final_cost": history[-1] if history else None,
        "n_examples": len(examples),
        "single_class": len(classes) < 2,
    }
    return UserModel(dataset.user_ids[j], net, stats, pipeline.decision_threshold, pipeline.rating_threshold, meta)


# -- serving -----------------------------------------------------------------


def score(model: UserModel, features, preprocessed: bool = False) -> float:
    """h(x) for one item; raw features are transformed with the model's statistics."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.net.topology[0]:
        raise ShapeError(f"expected {model.net.topology[0]} features, got shape {x.shape}")
    if not preprocessed:
        x = transform(x, model.stats)
    return float(forward(model.net, x).output[0])


def recommend(model: UserModel, candidates: Iterable[tuple[str, Sequence[float]]], threshold: float | None = None) -> list[Recommendation]:
    """Score candidates and sort by descending score, ties by item id.

    ``threshold`` overrides the model's decision threshold.
    """
    t = model.threshold if threshold is None else threshold
    recs = []
    for item_id, feats in candidates:
        s = score(model, feats)
        recs.append(Recommendation(str(item_id), s, s >= t))
    recs.sort(key=lambda r: (-r.score, r.item_id))
    return recs


def format_recommendations(recs: Sequence[Recommendation]) -> str:
    lines = ["item_id,score,recommended"]
    lines += [f"{r.item_id},{r.score!r},{'yes' if r.recommended else 'no'}" for r in recs]
    return "\n".join(lines) + "\n"


def accuracy(net: Network, examples, decision_threshold: float = 0.5) -> float:
    X = np.array([x for x, _ in examples])
    y = np.array([label for _, label in examples])
    return float(np.mean((predict(net, X)[:, 0] >= decision_threshold) == (y == 1)))


# -- persistence -------------------------------------------------------------


def _hex_list(a) -> list:
    return [float(v).hex() for v in np.ravel(a)]


def _from_hex(values, what: str) -> np.ndarray:
    try:
        return np.array([float.fromhex(v) for v in values], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise CorruptModelError(f"{what}: invalid hexadecimal float") from exc


def _stats_doc(stats: ScalingStats) -> dict:
    doc = {k: _hex_list(v) for k, v in stats.to_dict().items() if k not in ("method", "constant")}
    doc["method"] = stats.method
    doc["constant"] = list(stats.constant)
    return doc


def _stats_from_doc(doc: dict) -> ScalingStats:
    d = {k: _from_hex(v, f"stats.{k}") for k, v in doc.items() if k not in ("method", "constant")}
    d["method"] = doc["method"]
    d["constant"] = doc["constant"]
    try:
        return ScalingStats.from_dict(d)
    except ValueError as exc:
        raise ModelShapeError(str(exc)) from exc


def model_to_dict(model: UserModel) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "kind": "perceptron",
        "user_id": model.user_id,
        "topology": list(model.net.topology),
        "activation": model.net.hidden_activation.value,
        "bias": model.net.bias,
        "threshold": float(model.threshold).hex(),
        "rating_threshold": float(model.rating_threshold).hex(),
        "stats": _stats_doc(model.stats),
        "weights": [{"shape": list(w.shape), "values": _hex_list(w)} for w in model.net.weights],
        "training": model.training_meta,
    }


def cf_model_to_dict(model: CfModel, item_ids: Sequence[str], user_ids: Sequence[str]) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "kind": "classical",
        "item_ids": list(item_ids),
        "user_ids": list(user_ids),
        "n": model.n,
        "X": {"shape": list(model.X.shape), "values": _hex_list(model.X)},
        "Theta": {"shape": list(model.Theta.shape), "values": _hex_list(model.Theta)},
    }


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def save_model(model: UserModel, sink) -> None:
    """Write ``model`` to a path or text stream; weights are stored as hex floats."""
    _write(dumps(model_to_dict(model)), sink)


def save_cf_model(model: CfModel, item_ids, user_ids, sink) -> None:
    _write(dumps(cf_model_to_dict(model, item_ids, user_ids)), sink)


def _write(text: str, sink) -> None:
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sink.write(text)


def _read_doc(source) -> dict:
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptModelError(f"model file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise CorruptModelError("not a model file")
    if doc.get("version") != VERSION:
        raise VersionMismatchError(f"model file version {doc.get('version')!r}, expected {VERSION}")
    return doc


def _matrix(entry, what: str) -> np.ndarray:
    try:
        shape = tuple(int(s) for s in entry["shape"])
        values = _from_hex(entry["values"], what)
    except (KeyError, TypeError) as exc:
        raise CorruptModelError(f"{what}: missing shape or values") from exc
    if len(shape) != 2 or shape[0] * shape[1] != values.size:
        raise ModelShapeError(f"{what}: {values.size} values do not fill shape {shape}")
    return values.reshape(shape)


def load_model(source) -> UserModel:
    doc = _read_doc(source)
    if doc.get("kind") != "perceptron":
        raise CorruptModelError(f"expected a perceptron model, found kind {doc.get('kind')!r}")
    try:
        topology = check_topology(doc["topology"])
        bias = bool(doc["bias"])
        weights = [_matrix(w, f"weights[{k}]") for k, w in enumerate(doc["weights"])]
        activation = Activation(doc["activation"])
        stats = _stats_from_doc(doc["stats"])
        threshold = float.fromhex(doc["threshold"])
        rating_threshold = float.fromhex(doc["rating_threshold"])
        user_id = str(doc["user_id"])
        meta = doc.get("training", {})
    except KeyError as exc:
        raise CorruptModelError(f"model file lacks field {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise CorruptModelError(str(exc)) from exc
    extra = 1 if bias else 0
    expected = [(b, a + extra) for a, b in zip(topology, topology[1:])]
    if [w.shape for w in weights] != expected:
        raise ModelShapeError(f"weight shapes {[w.shape for w in weights]} do not match topology {list(topology)}")
    net = Network(tuple(weights), activation, bias)
    if stats.n_columns != topology[0]:
        raise ModelShapeError(f"statistics cover {stats.n_columns} features, topology input is {topology[0]}")
    return UserModel(user_id, net, stats, threshold, rating_threshold, meta)


def load_cf_model(source) -> tuple[CfModel, list[str], list[str]]:
    doc = _read_doc(source)
    if doc.get("kind") != "classical":
        raise CorruptModelError(f"expected a classical model, found kind {doc.get('kind')!r}")
    try:
        X = _matrix(doc["X"], "X")
        Theta = _matrix(doc["Theta"], "Theta")
        item_ids, user_ids = list(doc["item_ids"]), list(doc["user_ids"])
    except KeyError as exc:
        raise CorruptModelError(f"model file lacks field {exc}") from exc
    if X.shape[0] != len(item_ids) or Theta.shape[0] != len(user_ids) or X.shape[1] != Theta.shape[1]:
        raise ModelShapeError("classical model matrices disagree with their id tables")
    return CfModel(X, Theta), item_ids, user_ids
