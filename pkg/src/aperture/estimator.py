"""Estimator-style wrappers so the core algorithms compose with the wider
scikit-learn ecosystem (get_params/set_params, clone, pipelines).

The heavy lifting lives in the functional modules; these classes validate
inputs, hold hyperparameters, and expose fit/predict/transform surfaces.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, ClusterMixin, TransformerMixin

from . import nn, segmentation
from .validation import as_binary_vector, as_float_matrix


def _derive_seeds(seed: int) -> tuple[int, int]:
    """Independent init and shuffle seeds from one user-facing seed."""
    init_s, shuffle_s = np.random.SeedSequence(seed).generate_state(2)
    return int(init_s), int(shuffle_s)


class WindowStateClassifier(BaseEstimator, ClassifierMixin):
    """Feed-forward binary classifier with proximal adaptive-gradient training.

    Parameters
    ----------
    hidden_layer_sizes : tuple of int
        Neurons per hidden layer (1 to 7 layers).
    activation : {"relu", "tanh"}
        Hidden-layer activation; the output is always a single sigmoid.
    learning_rate, l1, batch_size, n_iter, accumulator_init
        Training hyperparameters; L1 is applied through the proximal
        soft-threshold, so converged weights can be exactly zero.
    threshold : float
        Probability cut for predict(); p >= threshold means open.
    seed : int
        Drives weight initialization and minibatch shuffling.
    """

    def __init__(
        self,
        hidden_layer_sizes=(64, 94, 81, 10, 25),
        activation="relu",
        learning_rate=0.1,
        l1=0.0001,
        batch_size=4096,
        n_iter=10000,
        accumulator_init=0.1,
        threshold=0.5,
        seed=0,
        log_every=100,
        sample_with_replacement=False,
    ):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.activation = activation
        self.learning_rate = learning_rate
        self.l1 = l1
        self.batch_size = batch_size
        self.n_iter = n_iter
        self.accumulator_init = accumulator_init
        self.threshold = threshold
        self.seed = seed
        self.log_every = log_every
        self.sample_with_replacement = sample_with_replacement

    def _train_config(self, shuffle_seed: int) -> nn.TrainConfig:
        return nn.TrainConfig(
            learning_rate=self.learning_rate,
            l1=self.l1,
            batch_size=self.batch_size,
            iterations=self.n_iter,
            accumulator_init=self.accumulator_init,
            shuffle_seed=shuffle_seed,
            log_every=self.log_every,
            sample_with_replacement=self.sample_with_replacement,
        )

    def fit(self, X, y):
        X = as_float_matrix(X, "X")
        y = as_binary_vector(y, "y")
        init_seed, shuffle_seed = _derive_seeds(self.seed)
        config = nn.NetworkConfig(
            input_width=X.shape[1],
            hidden_layer_sizes=tuple(self.hidden_layer_sizes),
            hidden_activation=self.activation,
            init_seed=init_seed,
        )
        net = nn.init_network(config)
        self.network_, self.optimizer_state_, self.history_ = nn.train(
            net, X, y, self._train_config(shuffle_seed)
        )
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        p = nn.forward(self.network_, as_float_matrix(X, "X", self.n_features_in_))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        states, _ = nn.predict(self.network_, X, threshold=self.threshold)
        return states.astype(int)


class OfficeClusterer(BaseEstimator, ClusterMixin):
    """Bottom-up Ward clustering over profile rows (NaN marks absent values).

    Exactly one of ``n_clusters`` and ``distance_cutoff`` must be set. Rows
    are z-scored per column before the masked-distance agglomeration.
    """

    def __init__(self, n_clusters=None, distance_cutoff=None):
        self.n_clusters = n_clusters
        self.distance_cutoff = distance_cutoff

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError(f"X must be 2-dimensional, got shape {X.shape}")
        if (self.n_clusters is None) == (self.distance_cutoff is None):
            raise ValueError("set exactly one of n_clusters or distance_cutoff")
        n = X.shape[0]
        Z = segmentation.standardize(X)
        merges = segmentation.ward_linkage(segmentation.masked_sq_distances(Z))
        if self.n_clusters is not None:
            n_merges = n - self.n_clusters
        else:
            n_merges = sum(1 for m in merges if m[2] <= self.distance_cutoff)
        parts = segmentation._partition_from_merges(n, merges, n_merges)
        labels = np.empty(n, dtype=int)
        order = sorted(parts, key=min)
        for cid, part in enumerate(order):
            for idx in part:
                labels[idx] = cid
        self.labels_ = labels
        self.merge_heights_ = np.array([m[2] for m in merges])
        return self

    def fit_predict(self, X, y=None):
        return self.fit(X).labels_


class ProfileEmbedding2D(BaseEstimator, TransformerMixin):
    """Exact t-SNE into 2-D with perplexity calibrated by bisection."""

    def __init__(self, perplexity=4.0, n_iter=1000, step_size=100.0, seed=0):
        self.perplexity = perplexity
        self.n_iter = n_iter
        self.step_size = step_size
        self.seed = seed

    def fit_transform(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        params = segmentation.TsneParams(
            perplexity=self.perplexity,
            n_iter=self.n_iter,
            step_size=self.step_size,
            seed=self.seed,
        )
        self.embedding_ = segmentation.tsne_project(X, params)
        return self.embedding_

    def fit(self, X, y=None):
        self.fit_transform(X)
        return self

    def transform(self, X):
        return self.embedding_
