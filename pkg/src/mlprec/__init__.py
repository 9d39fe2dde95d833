"""Per-user multilayer perceptron recommender with a matrix-factorization baseline."""

__version__ = "0.1.0"
