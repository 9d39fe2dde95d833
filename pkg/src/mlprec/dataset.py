"""Ratings and item-feature ingestion, label binarization and feature preprocessing.

File formats (UTF-8 text, comma separated, ``#`` comment lines and blank lines
ignored, optional header line):

* ratings: ``user_id,item_id,rating``; the first record is a header when its
  rating field is not a number.
* features: ``item_id,f1,...,fn`` with constant width; the first record is a
  header when any of its feature fields is not a number.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import IO, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .seeding import make_rng


class DataFormatError(ValueError):
    """Malformed or inconsistent input data."""


class DuplicateRatingError(DataFormatError):
    pass


@dataclass(frozen=True)
class RatingsDataset:
    """Sparse ratings keyed by ``(item index, user index)``."""

    user_ids: tuple[str, ...]
    item_ids: tuple[str, ...]
    ratings: Mapping[tuple[int, int], float]

    def __post_init__(self):
        object.__setattr__(self, "ratings", MappingProxyType(dict(self.ratings)))
        for i, j in self.ratings:
            if not (0 <= i < self.n_m and 0 <= j < self.n_u):
                raise DataFormatError(f"rating key {(i, j)} outside {self.n_m} items x {self.n_u} users")

    def __reduce__(self):
        # the read-only mapping view cannot be pickled; rebuild it on load
        return (RatingsDataset, (self.user_ids, self.item_ids, dict(self.ratings)))

    @property
    def n_u(self) -> int:
        return len(self.user_ids)

    @property
    def n_m(self) -> int:
        return len(self.item_ids)

    def user_index(self, user_id: str) -> int:
        try:
            return self.user_ids.index(str(user_id))
        except ValueError:
            raise KeyError(f"unknown user {user_id!r}") from None

    def item_index(self, item_id: str) -> int:
        try:
            return self.item_ids.index(str(item_id))
        except ValueError:
            raise KeyError(f"unknown item {item_id!r}") from None

    def rated(self, i: int, j: int) -> int:
        return 1 if (i, j) in self.ratings else 0

    def items_rated_by(self, j: int) -> list[int]:
        return sorted(i for (i, u) in self.ratings if u == j)

    def indicator(self) -> np.ndarray:
        """The n_m x n_u matrix R with R[i, j] = 1 iff user j rated item i."""
        r = np.zeros((self.n_m, self.n_u))
        for i, j in self.ratings:
            r[i, j] = 1.0
        return r

    def rating_matrix(self) -> np.ndarray:
        """The n_m x n_u matrix Y, zero where no rating exists."""
        y = np.zeros((self.n_m, self.n_u))
        for (i, j), v in self.ratings.items():
            y[i, j] = v
        return y

    def subset(self, keys: Iterable[tuple[int, int]]) -> "RatingsDataset":
        """Same index tables restricted to the given rating keys."""
        return RatingsDataset(self.user_ids, self.item_ids, {k: self.ratings[k] for k in keys})


@dataclass(frozen=True)
class BinaryLabels:
    labels: Mapping[tuple[int, int], int]
    threshold_used: float


@dataclass(frozen=True)
class ScalingStats:
    """Per-column statistics and the affine map ``(x - shift) / divisor`` they define."""

    method: str
    mean: tuple[float, ...]
    minimum: tuple[float, ...]
    maximum: tuple[float, ...]
    std: tuple[float, ...]
    shift: tuple[float, ...]
    divisor: tuple[float, ...]
    constant: tuple[bool, ...]

    @property
    def n_columns(self) -> int:
        return len(self.divisor)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "mean": list(self.mean),
            "minimum": list(self.minimum),
            "maximum": list(self.maximum),
            "std": list(self.std),
            "shift": list(self.shift),
            "divisor": list(self.divisor),
            "constant": list(self.constant),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScalingStats":
        cols = ("mean", "minimum", "maximum", "std", "shift", "divisor")
        n = len(d["divisor"])
        if any(len(d[c]) != n for c in cols) or len(d["constant"]) != n:
            raise DataFormatError("scaling statistics have inconsistent column counts")
        return cls(d["method"], *(tuple(float(v) for v in d[c]) for c in cols), tuple(bool(v) for v in d["constant"]))


@dataclass(frozen=True)
class FeatureMatrix:
    """Item feature rows; row ``i`` is the feature vector of ``item_ids[i]``."""

    item_ids: tuple[str, ...]
    X: np.ndarray
    stats: ScalingStats | None = None
    feature_names: tuple[str, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        x = np.array(self.X, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] != len(self.item_ids) or x.shape[1] < 1:
            raise DataFormatError(f"feature matrix shape {x.shape} does not match {len(self.item_ids)} items")
        x.setflags(write=False)
        object.__setattr__(self, "X", x)

    @property
    def n(self) -> int:
        return self.X.shape[1]

    def row(self, item_id: str) -> np.ndarray:
        return self.X[self.item_ids.index(str(item_id))]

    def align(self, ratings: RatingsDataset) -> "FeatureMatrix":
        """Reorder rows to ``ratings.item_ids``; every rated item must be present."""
        pos = {item: k for k, item in enumerate(self.item_ids)}
        missing = [item for item in ratings.item_ids if item not in pos]
        if missing:
            raise DataFormatError(f"items missing from features: {', '.join(missing)}")
        rows = [pos[item] for item in ratings.item_ids]
        return replace(self, item_ids=ratings.item_ids, X=self.X[rows])


# -- ingestion ---------------------------------------------------------------


def _open_text(source) -> tuple[IO[str], bool]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, encoding="utf-8", newline=""), True
    data = source if isinstance(source, (bytes, bytearray)) else source.read()
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    return io.StringIO(data), False


def _records(source) -> Iterator[tuple[int, list[str]]]:
    fh, owned = _open_text(source)
    try:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            row = next(csv.reader([stripped]))
            yield lineno, [c.strip() for c in row]
    finally:
        if owned:
            fh.close()


def _number(text: str) -> float | None:
    try:
        v = float(text)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def load_ratings(source) -> RatingsDataset:
    """Parse a ratings file (path, bytes, or file object) into a dataset.

    Users and items get dense indices in order of first appearance.
    """
    users: dict[str, int] = {}
    items: dict[str, int] = {}
    ratings: dict[tuple[int, int], float] = {}
    first = True
    for lineno, row in _records(source):
        if len(row) != 3:
            raise DataFormatError(f"line {lineno}: expected user_id,item_id,rating, got {len(row)} fields")
        user, item, raw = row
        value = _number(raw)
        if value is None:
            if first:
                first = False
                continue
            raise DataFormatError(f"line {lineno}: rating {raw!r} is not a finite number")
        first = False
        if not user or not item:
            raise DataFormatError(f"line {lineno}: empty user or item id")
        j = users.setdefault(user, len(users))
        i = items.setdefault(item, len(items))
        if (i, j) in ratings:
            raise DuplicateRatingError(f"line {lineno}: duplicate rating of item {item!r} by user {user!r}")
        ratings[(i, j)] = value
    if not ratings:
        raise DataFormatError("ratings input contains no records")
    return RatingsDataset(tuple(users), tuple(items), ratings)


def load_features(source, ratings: RatingsDataset | None = None) -> FeatureMatrix:
    """Parse a features file; when ``ratings`` is given, rows are aligned to its items."""
    ids: list[str] = []
    rows: list[list[float]] = []
    names = None
    width = None
    seen: set[str] = set()
    for lineno, row in _records(source):
        if len(row) < 2:
            raise DataFormatError(f"line {lineno}: expected item_id and at least one feature")
        values = [_number(c) for c in row[1:]]
        if any(v is None for v in values):
            if width is None and names is None:
                names = tuple(row[1:])
                width = len(names)
                continue
            raise DataFormatError(f"line {lineno}: non-numeric feature value")
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise DataFormatError(f"line {lineno}: expected {width} features, got {len(values)}")
        item = row[0]
        if item in seen:
            raise DataFormatError(f"line {lineno}: item {item!r} listed twice")
        seen.add(item)
        ids.append(item)
        rows.append(values)
    if not rows:
        raise DataFormatError("features input contains no records")
    fm = FeatureMatrix(tuple(ids), np.array(rows, dtype=np.float64), None, names)
    return fm.align(ratings) if ratings is not None else fm


# -- labels ------------------------------------------------------------------


def binarize(d: RatingsDataset, threshold: float) -> BinaryLabels:
    """Label 1 where the rating is at least ``threshold``, else 0."""
    return BinaryLabels({k: int(v >= threshold) for k, v in d.ratings.items()}, float(threshold))


def default_rating_threshold(scale_min: float, scale_max: float) -> float:
    return (scale_min + scale_max) / 2.0


# -- preprocessing -----------------------------------------------------------

METHODS = ("scale", "normalize", "standardize")


def fit_stats(X: np.ndarray, method: str) -> ScalingStats:
    X = np.asarray(X, dtype=np.float64)
    if method not in METHODS:
        raise ValueError(f"unknown preprocessing method {method!r}; choose from {METHODS}")
    lo = X.min(axis=0)
    hi = X.max(axis=0)
    constant = lo == hi
    mean = np.where(constant, lo, X.mean(axis=0))
    std = np.where(constant, 0.0, X.std(axis=0))
    if method == "scale":
        maxabs = np.abs(X).max(axis=0)
        shift = np.zeros_like(mean)
        divisor = np.where(maxabs > 0, maxabs, 1.0)
    elif method == "normalize":
        shift = mean
        divisor = np.where(constant, 1.0, hi - lo)
    else:
        shift = mean
        divisor = np.where(std > 0, std, 1.0)

    def tup(a):
        return tuple(float(v) for v in a)

    return ScalingStats(method, tup(mean), tup(lo), tup(hi), tup(std), tup(shift), tup(divisor), tuple(bool(c) for c in constant))


def transform(X, stats: ScalingStats) -> np.ndarray:
    """Apply recorded statistics to raw rows (2-D) or a single raw vector (1-D)."""
    X = np.asarray(X, dtype=np.float64)
    width = X.shape[-1] if X.ndim else 0
    if X.ndim not in (1, 2) or width != stats.n_columns:
        raise DataFormatError(f"statistics cover {stats.n_columns} columns, data has shape {X.shape}")
    return (X - np.array(stats.shift)) / np.array(stats.divisor)


def apply_stats(X: FeatureMatrix, stats: ScalingStats) -> FeatureMatrix:
    return replace(X, X=transform(X.X, stats), stats=stats)


def _preprocess(X: FeatureMatrix, method: str) -> FeatureMatrix:
    return apply_stats(X, fit_stats(X.X, method))


def feature_scale(X: FeatureMatrix) -> FeatureMatrix:
    """Divide each column by its largest absolute value."""
    return _preprocess(X, "scale")


def mean_normalize(X: FeatureMatrix) -> FeatureMatrix:
    """Subtract the column mean and divide by the column range."""
    return _preprocess(X, "normalize")


def mean_standardize(X: FeatureMatrix) -> FeatureMatrix:
    """Subtract the column mean and divide by the population standard deviation."""
    return _preprocess(X, "standardize")


PREPROCESSORS = {"scale": feature_scale, "normalize": mean_normalize, "standardize": mean_standardize}


def shuffle_examples(examples: Sequence, seed: int) -> list:
    order = make_rng(seed).permutation(len(examples))
    return [examples[k] for k in order]
