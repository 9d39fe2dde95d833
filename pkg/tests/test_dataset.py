import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from mlprec.dataset import (
    DataFormatError,
    DuplicateRatingError,
    FeatureMatrix,
    apply_stats,
    binarize,
    default_rating_threshold,
    feature_scale,
    fit_stats,
    load_features,
    load_ratings,
    mean_normalize,
    mean_standardize,
    shuffle_examples,
    transform,
)


def fm(columns):
    X = np.array(columns, dtype=float).T
    return FeatureMatrix(tuple(f"i{k}" for k in range(X.shape[0])), X)


# -- ratings ---------------------------------------------------------------


def test_load_ratings_counts():
    d = load_ratings(b"alice,m1,4\nbob,m1,2\nalice,m2,5\n")
    assert (d.n_u, d.n_m, len(d.ratings)) == (2, 2, 3)
    assert d.user_ids == ("alice", "bob") and d.item_ids == ("m1", "m2")
    assert d.ratings[(1, 0)] == 5.0


def test_load_ratings_header_comments_and_stream():
    text = "# a comment\nuser_id,item_id,rating\n\nu,i,3.5\n"
    d = load_ratings(io.StringIO(text))
    assert d.ratings == {(0, 0): 3.5}


def test_load_ratings_bad_rating_reports_line():
    with pytest.raises(DataFormatError, match="line 3"):
        load_ratings(b"u,i,1\nu,j,2\nu,k,lots\n")


def test_load_ratings_duplicate():
    with pytest.raises(DuplicateRatingError):
        load_ratings(b"u,i,1\nu,i,2\n")


@pytest.mark.parametrize("text", [b"", b"# nothing\n", b"user,item,rating\n"])
def test_load_ratings_empty(text):
    with pytest.raises(DataFormatError):
        load_ratings(text)


def test_load_ratings_wrong_width():
    with pytest.raises(DataFormatError, match="line 1"):
        load_ratings(b"u,i\n")


def test_dataset_indicator_and_matrix():
    d = load_ratings(b"a,x,4\nb,y,2\na,y,1\n")
    R = d.indicator()
    assert R.shape == (2, 2)
    assert R.tolist() == [[1, 0], [1, 1]]
    assert d.rating_matrix()[1, 0] == 1.0
    assert d.rated(0, 1) == 0 and d.rated(1, 1) == 1
    assert d.items_rated_by(0) == [0, 1]
    with pytest.raises(KeyError):
        d.user_index("nobody")


def test_toy_corpus_size(data_dir):
    d = load_ratings(data_dir / "toy" / "ratings.csv")
    f = load_features(data_dir / "toy" / "features.csv", d)
    assert d.n_u >= 8 and d.n_m >= 20 and f.n >= 3
    assert f.item_ids == d.item_ids


# -- features --------------------------------------------------------------


def test_load_features_shape():
    text = b"item,a,b,c\nm1,1,2,3\nm2,4,5,6\nm3,7,8,9\nm4,0,0,0\n"
    f = load_features(text)
    assert f.X.shape == (4, 3) and f.n == 3
    assert f.feature_names == ("a", "b", "c")
    assert np.array_equal(f.row("m2"), [4, 5, 6])


def test_load_features_ragged():
    with pytest.raises(DataFormatError, match="line 2"):
        load_features(b"m1,1,2\nm2,1\n")


def test_load_features_non_numeric():
    with pytest.raises(DataFormatError):
        load_features(b"m1,1,2\nm2,1,x\n")


def test_load_features_missing_item_named():
    d = load_ratings(b"u,m1,3\nu,m9,4\n")
    with pytest.raises(DataFormatError, match="m9"):
        load_features(b"m1,1,2\nm2,3,4\n", d)


def test_load_features_duplicate_item():
    with pytest.raises(DataFormatError, match="twice"):
        load_features(b"m1,1\nm1,2\n")


def test_load_features_aligns_to_ratings():
    d = load_ratings(b"u,m2,3\nu,m1,4\n")
    f = load_features(b"m1,1\nm2,2\nm3,3\n", d)
    assert f.item_ids == ("m2", "m1")
    assert f.X[:, 0].tolist() == [2.0, 1.0]


# -- labels ----------------------------------------------------------------


def test_binarize_examples():
    d = load_ratings(b"u,a,4.0\nu,b,3.5\nu,c,2.0\n")
    labels = binarize(d, 3.5)
    assert [labels.labels[(i, 0)] for i in range(3)] == [1, 1, 0]
    assert labels.threshold_used == 3.5


@given(st.lists(st.floats(0, 10), min_size=1, max_size=20), st.floats(0, 10))
def test_binarize_key_set_and_range(values, t):
    text = "".join(f"u,i{k},{v!r}\n" for k, v in enumerate(values))
    d = load_ratings(text.encode())
    labels = binarize(d, t)
    assert set(labels.labels) == set(d.ratings)
    assert all(labels.labels[k] == int(d.ratings[k] >= t) for k in d.ratings)


def test_default_threshold_is_midpoint():
    assert default_rating_threshold(1, 5) == 3.0


# -- preprocessing ---------------------------------------------------------


def test_feature_scale_examples():
    out = feature_scale(fm([[2, -4, 1], [0.5, -1, 0.25], [0, 0, 0]]))
    assert out.X[:, 0].tolist() == [0.5, -1.0, 0.25]
    assert out.X[:, 1].tolist() == [0.5, -1.0, 0.25]
    assert out.X[:, 2].tolist() == [0, 0, 0]
    assert out.stats.divisor == (4.0, 1.0, 1.0)


def test_mean_normalize_examples():
    assert mean_normalize(fm([[1, 2, 3]])).X[:, 0].tolist() == [-0.5, 0.0, 0.5]
    assert mean_normalize(fm([[5, 5]])).X[:, 0].tolist() == [0.0, 0.0]
    assert mean_normalize(fm([[0, 10]])).X[:, 0].tolist() == [-0.5, 0.5]


def test_mean_standardize_examples():
    assert mean_standardize(fm([[1, 3]])).X[:, 0].tolist() == [-1.0, 1.0]
    assert mean_standardize(fm([[7, 7, 7]])).X[:, 0].tolist() == [0.0, 0.0, 0.0]


def test_stats_recorded():
    out = mean_normalize(fm([[1, 2, 3]]))
    s = out.stats
    assert (s.mean, s.minimum, s.maximum) == ((2.0,), (1.0,), (3.0,))
    assert s.std[0] == pytest.approx(np.sqrt(2 / 3))
    assert fm([[1, 2]]).stats is None


def test_apply_stats_formula_and_errors():
    stats = fit_stats(np.array([[1.0], [3.0]]), "normalize")  # mean 2, range 2
    assert transform(np.array([4.0]), stats)[0] == 1.0
    with pytest.raises(DataFormatError):
        apply_stats(fm([[1, 2], [3, 4]]), stats)


matrices = arrays(
    np.float64, st.tuples(st.integers(2, 12), st.integers(1, 4)),
    elements=st.floats(-1e3, 1e3, allow_nan=False).map(lambda v: round(v, 3)),
)


@settings(max_examples=60)
@given(matrices, st.sampled_from(["scale", "normalize", "standardize"]))
def test_replay_is_bit_exact(X, method):
    f = FeatureMatrix(tuple(f"i{k}" for k in range(X.shape[0])), X)
    pre = {"scale": feature_scale, "normalize": mean_normalize, "standardize": mean_standardize}[method](f)
    again = apply_stats(f, pre.stats)
    assert np.array_equal(again.X, pre.X)


@settings(max_examples=60)
@given(matrices)
def test_normalize_properties(X):
    out = mean_normalize(FeatureMatrix(tuple(f"i{k}" for k in range(X.shape[0])), X)).X
    assert np.all(np.abs(out.mean(axis=0)) <= 1e-12)
    assert np.all(np.abs(out) <= 1.0)


@settings(max_examples=60)
@given(matrices)
def test_standardize_properties(X):
    out = mean_standardize(FeatureMatrix(tuple(f"i{k}" for k in range(X.shape[0])), X)).X
    assert np.all(np.abs(out.mean(axis=0)) <= 1e-12)
    varying = X.min(axis=0) != X.max(axis=0)
    assert np.all(np.abs(out[:, varying].std(axis=0) - 1.0) <= 1e-12)
    assert np.all(out[:, ~varying] == 0.0)


@given(matrices)
def test_feature_scale_bounded(X):
    out = feature_scale(FeatureMatrix(tuple(f"i{k}" for k in range(X.shape[0])), X)).X
    assert np.all(np.abs(out) <= 1.0)


def test_unknown_method():
    with pytest.raises(ValueError):
        fit_stats(np.ones((2, 2)), "whiten")


# -- shuffling -------------------------------------------------------------


def test_shuffle_singleton():
    assert shuffle_examples(["only"], 3) == ["only"]


def test_shuffle_deterministic_and_permutation():
    items = list(range(5))
    assert shuffle_examples(items, 11) == shuffle_examples(items, 11)
    for seed in (1, 2):
        assert sorted(shuffle_examples(items, seed)) == items


@given(st.lists(st.integers(), max_size=30), st.integers(0, 2**63 - 1))
def test_shuffle_preserves_multiset(items, seed):
    assert sorted(shuffle_examples(items, seed)) == sorted(items)
