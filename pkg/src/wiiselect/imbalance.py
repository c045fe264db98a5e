"""Nearest-neighbor ranks and the classic / class-weighted Information Imbalance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist
from scipy.stats import rankdata

from .data import NormalizedView, TupleCandidate
from .tree import TargetRanks, TargetTree, class_weights, target_ranks


@dataclass(frozen=True)
class InputRanks:
    """Nearest neighbor of every support record in an input feature space.

    ``nn_index`` holds positions into ``support``, not global record indices.
    """

    nn_index: np.ndarray
    support: np.ndarray

    @property
    def n_records(self):
        return len(self.nn_index)


@dataclass(frozen=True)
class ImbalanceScore:
    value: float
    n_used: int
    normalization: float


def pairwise_sq_distances(X) -> np.ndarray:
    """Squared Euclidean distances between all rows (direct differences, no Gram trick)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return cdist(X, X, "sqeuclidean")


def nearest_neighbors(X, method="brute") -> np.ndarray:
    """Index of each row's nearest other row.

    ``method="kdtree"`` uses a spatial index; for tie-free data it returns
    exactly what the brute-force scan returns.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if n < 2:
        raise ValueError("need at least two records to define a nearest neighbor")
    if method == "brute":
        D = pairwise_sq_distances(X)
        np.fill_diagonal(D, np.inf)
        return np.argmin(D, axis=1)
    if method == "kdtree":
        _, idx = cKDTree(X).query(X, k=2)
        own = np.arange(n)
        # with exact duplicates self may not come first
        first = idx[:, 0] != own
        return np.where(first, idx[:, 0], idx[:, 1])
    raise ValueError(f"unknown neighbor method {method!r}")


def input_nearest_neighbors(view: NormalizedView, candidate: TupleCandidate,
                            method="brute") -> InputRanks:
    support = np.asarray(candidate.support)
    if support.size < 2:
        raise ValueError("support smaller than 2")
    X = view.jittered[np.ix_(support, list(candidate.features))]
    return InputRanks(nearest_neighbors(X, method), support)


def distance_ranks(X) -> np.ndarray:
    """Tie-averaged distance ranks of every pair (rank 0 = nearest), NaN diagonal."""
    D = np.sqrt(pairwise_sq_distances(X))
    np.fill_diagonal(D, np.inf)
    R = rankdata(D, axis=1, method="average") - 1.0
    np.fill_diagonal(R, np.nan)
    return R


def conditional_ranks(X_b, nn_index) -> np.ndarray:
    """Tie-averaged rank in space B of each record's given neighbor.

    Equivalent to ``distance_ranks(X_b)[i, nn_index[i]]`` without building the
    full rank matrix.
    """
    D = pairwise_sq_distances(X_b)
    n = D.shape[0]
    rows = np.arange(n)
    np.fill_diagonal(D, np.inf)
    dn = D[rows, nn_index][:, None]
    below = (D < dn).sum(axis=1)
    equal = (D == dn).sum(axis=1)
    return below + (equal - 1) / 2.0


def classic_imbalance(ranks_a: InputRanks, ranks_b) -> ImbalanceScore:
    """Scaled mean B-rank of A's nearest neighbors: ``(2/N) * mean_i r_B(i, nn_A(i))``.

    ``ranks_b`` is either the full N x N rank matrix of space B or the vector
    of already conditioned ranks.
    """
    nn = ranks_a.nn_index
    n = len(nn)
    ranks_b = np.asarray(ranks_b, dtype=float)
    if ranks_b.ndim == 2:
        if ranks_b.shape != (n, n):
            raise ValueError("rank matrix of B does not cover the same records as A")
        r = ranks_b[np.arange(n), nn]
    else:
        if ranks_b.shape != (n,):
            raise ValueError("conditioned ranks of B do not cover the same records as A")
        r = ranks_b
    a = 2.0 / n
    return ImbalanceScore(float(a * r.mean()), n, a)


def weighted_imbalance(ranks_a: InputRanks, target: TargetRanks, weights=None) -> ImbalanceScore:
    """Class-weighted Information Imbalance toward a degenerate target.

    ``a * sum_i w_i r_T(i, nn(i)) / sum_i w_i`` with ``a = 2 / (N - 2)``: every
    row of tie-averaged ranks has mean ``(N - 2) / 2``, so a random neighbor
    assignment scores 1 in expectation whatever the weights.
    """
    nn = ranks_a.nn_index
    n = len(nn)
    if target.n_records != n:
        raise ValueError("target ranks and input ranks cover different record sets")
    if n < 3:
        raise ValueError("weighted imbalance needs at least 3 records")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n,) or (w <= 0).any():
        raise ValueError("weights must be positive, one per record")
    labels = target.labels
    r = target.leaf_rank[labels, labels[nn]]
    a = 2.0 / (n - 2)
    return ImbalanceScore(float(a * np.dot(w, r) / w.sum()), n, a)


def score_candidate(view: NormalizedView, candidate: TupleCandidate, labels, tree: TargetTree,
                    weighted=True, method="brute") -> ImbalanceScore:
    """Evaluate a candidate's imbalance toward the tree over its own support.

    Leaf sizes, weights and tie-averaged target ranks are recomputed within
    the support.
    """
    support_labels = np.asarray(labels, dtype=int)[candidate.support]
    ranks = input_nearest_neighbors(view, candidate, method)
    target = target_ranks(support_labels, tree)
    weights = class_weights(support_labels, tree) if weighted else None
    return weighted_imbalance(ranks, target, weights)
