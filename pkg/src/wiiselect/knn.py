"""Prior-corrected k-NN severity prediction and its evaluation."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence

import numpy as np
from scipy.stats import pearsonr, spearmanr

from .data import NormalizedView, TupleCandidate, complete_cases
from .imbalance import (InputRanks, classic_imbalance, conditional_ranks, nearest_neighbors,
                        pairwise_sq_distances)
from .tree import TargetTree, leaf_sizes

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class KnnConfig:
    k: int = 10
    leave_one_out: bool = True
    prior_correction: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


def decide(counts, pool_sizes, prior_correction=True) -> int:
    """Leaf with the largest neighbor-count to prior ratio.

    ``counts[l]`` neighbors of leaf ``l`` were found; ``pool_sizes[l]`` is the
    leaf's size in the pool they were drawn from. Ties go to the larger count,
    then to the smaller leaf index.
    """
    counts = np.asarray(counts, dtype=float)
    pool_sizes = np.asarray(pool_sizes, dtype=float)
    if not prior_correction:
        score = counts
    else:
        assert not np.any((pool_sizes == 0) & (counts > 0)), "neighbor from an empty leaf"
        k = counts.sum()
        prior = pool_sizes / pool_sizes.sum()
        with np.errstate(divide="ignore", invalid="ignore"):
            score = np.where(pool_sizes > 0, (counts / k) / prior, -np.inf)
    # lexsort: last key is primary
    order = np.lexsort((np.arange(len(counts)), -counts, -score))
    return int(order[0])


def _knn_indices(X, k, leave_one_out=True):
    """k nearest rows of each row, nearest first; self excluded under LOO."""
    D = pairwise_sq_distances(X)
    if leave_one_out:
        np.fill_diagonal(D, np.inf)
    order = np.argsort(D, axis=1, kind="stable")
    return order[:, :k]


@dataclass
class PredictionReport:
    """Per-record predictions over one record set.

    ``records`` are global record indices; ``distance`` is the tree distance
    between true and predicted leaf.
    """

    records: np.ndarray
    true: np.ndarray
    predicted: np.ndarray
    distance: np.ndarray
    max_level: int
    majority_leaf: int

    def levels(self, minority=False) -> np.ndarray:
        d = self.distance
        if minority:
            d = d[self.true != self.majority_leaf]
        if d.size == 0:
            return np.full(self.max_level + 1, np.nan)
        return np.array([(d <= L).mean() for L in range(self.max_level + 1)])

    def to_dict(self, record_ids=None, leaves=None):
        ids = [record_ids[r] if record_ids is not None else int(r) for r in self.records]
        return {
            "n_records": int(len(self.records)),
            "majority_leaf": int(self.majority_leaf),
            "levels": [float(x) for x in self.levels()],
            "minority_levels": [float(x) for x in self.levels(minority=True)],
            "records": [
                {"id": i, "true": int(t), "predicted": int(p), "distance": int(d)}
                for i, t, p, d in zip(ids, self.true, self.predicted, self.distance)
            ],
        }


def _report(records, true, predicted, tree, majority_leaf=None):
    true = np.asarray(true, dtype=int)
    predicted = np.asarray(predicted, dtype=int)
    if majority_leaf is None:
        majority_leaf = int(np.argmax(leaf_sizes(true, tree.n_leaves)))
    return PredictionReport(
        records=np.asarray(records),
        true=true,
        predicted=predicted,
        distance=tree.distance[true, predicted].astype(int),
        max_level=tree.max_distance,
        majority_leaf=majority_leaf,
    )


def predict_from_neighbors(neighbor_labels, pool_labels_per_record, n_leaves, prior_correction=True):
    """Apply the decision rule row by row (helper shared by k-NN and baselines)."""
    preds = np.empty(len(neighbor_labels), dtype=int)
    for i, nb in enumerate(neighbor_labels):
        counts = np.bincount(nb, minlength=n_leaves)
        preds[i] = decide(counts, pool_labels_per_record[i], prior_correction)
    return preds


def prior_corrected_knn(view: NormalizedView, candidate: TupleCandidate, labels, tree: TargetTree,
                        config: KnnConfig = KnnConfig(), majority_leaf: Optional[int] = None) -> PredictionReport:
    """Leave-one-out k-NN over a candidate's support with prior correction.

    For record i, the pool is the support minus i. Neighbor frequencies per
    leaf are divided by the leaf's share of the pool and the largest ratio
    wins.
    """
    support = np.asarray(candidate.support)
    labels = tree.check_labels(labels)
    y = labels[support]
    n = len(support)
    pool_n = n - 1 if config.leave_one_out else n
    k = config.k
    if k > pool_n:
        warnings.warn(f"k={k} exceeds the {pool_n} available neighbors; truncating",
                      RuntimeWarning, stacklevel=2)
        k = pool_n
    if k < 1:
        raise ValueError("support too small for k-NN")
    X = view.jittered[np.ix_(support, list(candidate.features))]
    nbrs = _knn_indices(X, k, config.leave_one_out)
    sizes = leaf_sizes(y, tree.n_leaves)
    pools = np.tile(sizes, (n, 1))
    if config.leave_one_out:
        pools[np.arange(n), y] -= 1
    preds = predict_from_neighbors(y[nbrs], pools, tree.n_leaves, config.prior_correction)
    if majority_leaf is None:
        majority_leaf = int(np.argmax(leaf_sizes(labels, tree.n_leaves)))
    return _report(support, y, preds, tree, majority_leaf)


def level_accuracies(report: PredictionReport, tree: TargetTree = None) -> dict:
    """Fraction of records whose predicted leaf lies within each tree distance.

    Returns ``{"overall": [...], "minority": [...]}`` indexed by level; the
    minority slice leaves out records of the majority leaf.
    """
    if tree is not None and tree.max_distance != report.max_level:
        report = _report(report.records, report.true, report.predicted, tree, report.majority_leaf)
    return {"overall": report.levels(), "minority": report.levels(minority=True)}


def summarize_levels(reports: Sequence[PredictionReport]) -> dict:
    """Mean and std of level accuracies across several reports."""
    overall = np.array([r.levels() for r in reports])
    minority = np.array([r.levels(minority=True) for r in reports])
    return {
        "overall_mean": overall.mean(axis=0),
        "overall_std": overall.std(axis=0),
        "minority_mean": np.nanmean(minority, axis=0),
        "minority_std": np.nanstd(minority, axis=0),
        "n": len(reports),
    }


def random_neighbor_baseline(labels, tree: TargetTree, seed: int, n_reps: int, k: int = 10,
                             prior_correction=True) -> list:
    """Reports where each record's neighbors are drawn at random from the others.

    Returns one PredictionReport per repetition; see ``summarize_levels``.
    """
    labels = tree.check_labels(labels)
    n = len(labels)
    if n < 2:
        raise ValueError("need at least two records")
    k = min(k, n - 1)
    rng = np.random.default_rng(seed)
    sizes = leaf_sizes(labels, tree.n_leaves)
    pools = np.tile(sizes, (n, 1))
    pools[np.arange(n), labels] -= 1
    majority = int(np.argmax(sizes))
    reports = []
    for _ in range(n_reps):
        # k distinct others per record: rank random keys, self forced last
        keys = rng.random((n, n))
        np.fill_diagonal(keys, np.inf)
        nbrs = np.argsort(keys, axis=1)[:, :k]
        preds = predict_from_neighbors(labels[nbrs], pools, tree.n_leaves, prior_correction)
        reports.append(_report(np.arange(n), labels, preds, tree, majority))
    return reports


@dataclass(frozen=True)
class PairRow:
    a: int
    b: int
    delta_ab: float
    delta_ba: float
    pearson: float
    spearman: float
    n_shared: int

    @property
    def asymmetry(self):
        return abs(self.delta_ab - self.delta_ba)

    def asymmetric(self, threshold=0.1):
        return self.asymmetry > threshold


def pairwise_feature_analysis(view: NormalizedView, features: Sequence[int], min_overlap: int = 100,
                              asymmetry_threshold: float = 0.1):
    """Directional imbalances and correlations for every feature pair.

    Each pair is evaluated on the records where both features are present.
    Neighbors in the source feature come from the jittered values; ranks in
    the destination feature use the normalized values with tie averaging.

    Returns ``(rows, skipped)``: rows sorted by the smaller directional
    imbalance, and ``(a, b, reason)`` for pairs that could not be evaluated.
    """
    rows, skipped = [], []
    for a, b in combinations(sorted(features), 2):
        shared = complete_cases(view.present, (a, b))
        if shared.size < max(min_overlap, 3):
            skipped.append((a, b, f"only {shared.size} shared records (< {min_overlap})"))
            continue
        xa, xb = view.normalized[shared, a], view.normalized[shared, b]
        ja, jb = view.jittered[shared, a], view.jittered[shared, b]
        if np.ptp(xa) == 0 or np.ptp(xb) == 0:
            skipped.append((a, b, "constant over shared records"))
            continue
        nn_a = nearest_neighbors(ja)
        nn_b = nearest_neighbors(jb)
        d_ab = classic_imbalance(InputRanks(nn_a, shared), conditional_ranks(xb, nn_a)).value
        d_ba = classic_imbalance(InputRanks(nn_b, shared), conditional_ranks(xa, nn_b)).value
        rows.append(PairRow(a, b, d_ab, d_ba, float(pearsonr(xa, xb)[0]),
                            float(spearmanr(xa, xb)[0]), int(shared.size)))
    rows.sort(key=lambda r: (min(r.delta_ab, r.delta_ba), r.a, r.b))
    return rows, skipped
