"""scikit-learn compatible wrappers around the selection and k-NN routines."""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_is_fitted, validate_data

from .data import FeatureTable, normalize_and_jitter
from .knn import decide
from .search import BeamConfig, beam_search
from .tree import flat_tree


def _encode_target(y, tree):
    """Map y to leaf indices; without a tree every class becomes its own leaf."""
    if tree is None:
        classes, codes = np.unique(y, return_inverse=True)
        return classes, codes, flat_tree(len(classes))
    y = np.asarray(y)
    if not np.issubdtype(y.dtype, np.integer):
        raise ValueError("with an explicit tree, y must hold integer leaf indices")
    return np.arange(tree.n_leaves), tree.check_labels(y), tree


class WeightedImbalanceSelector(SelectorMixin, BaseEstimator):
    """Filter selector minimizing the class-weighted Information Imbalance.

    Missing values (NaN) are allowed; each candidate tuple is scored on the
    records complete in it.

    Parameters
    ----------
    tree : TargetTree or None, default=None
        Target metric over the classes. ``None`` treats classes as leaves at
        equal mutual distance and accepts arbitrary class labels.
    n_features_to_select : "auto" or int, default="auto"
        ``"auto"`` keeps the tuple size with the lowest score.
    beam_width, max_tuple_size, min_support, max_jsd, top_k :
        Search settings, see :class:`wiiselect.search.BeamConfig`.
    jitter_scale : float, default=1e-6
        Upper bound of the offsets that break duplicated values.
    random_state : int, default=0
        Seed of the tie-breaking jitter.
    n_jobs : int, default=1
        Threads used to score candidates; results do not depend on it.

    Attributes
    ----------
    curve_ : SizeCurve
    optimal_size_ : int
    selected_features_ : tuple of int
    delta_w_ : float
        Score of the selected tuple.
    support_records_ : ndarray
        Records complete in the selected tuple.
    """

    def __init__(self, tree=None, n_features_to_select="auto", beam_width=55, max_tuple_size=20,
                 min_support=100, max_jsd=0.06, top_k=10, jitter_scale=1e-6, random_state=0,
                 n_jobs=1):
        self.tree = tree
        self.n_features_to_select = n_features_to_select
        self.beam_width = beam_width
        self.max_tuple_size = max_tuple_size
        self.min_support = min_support
        self.max_jsd = max_jsd
        self.top_k = top_k
        self.jitter_scale = jitter_scale
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, y):
        X = validate_data(self, X, dtype=float, ensure_all_finite="allow-nan")
        check_classification_targets(y)
        self.classes_, leaves, tree = _encode_target(y, self.tree)
        self.view_ = normalize_and_jitter(FeatureTable.from_array(X), int(self.random_state),
                                          self.jitter_scale)
        config = BeamConfig(beam_width=self.beam_width, max_tuple_size=self.max_tuple_size,
                            min_support=self.min_support, max_jsd=self.max_jsd,
                            top_k_report=self.top_k, n_jobs=self.n_jobs)
        self.curve_ = beam_search(self.view_, tree, leaves, config)
        self.optimal_size_ = self.curve_.optimal_n
        size = self.optimal_size_ if self.n_features_to_select == "auto" else int(self.n_features_to_select)
        if size not in self.curve_.levels:
            raise ValueError(f"no feasible tuple of size {size}")
        best = self.curve_.best(size)
        self.selected_features_ = best.features
        self.delta_w_ = best.delta_w
        self.support_records_ = best.support
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "selected_features_")
        mask = np.zeros(self.n_features_in_, dtype=bool)
        mask[list(self.selected_features_)] = True
        return mask

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.input_tags.allow_nan = True
        return tags


class PriorCorrectedKNNClassifier(ClassifierMixin, BaseEstimator):
    """k-NN classifier dividing neighbor class frequencies by class priors.

    Predicts the class whose local neighbor frequency most exceeds its share
    of the training set. Ties go to the larger neighbor count, then to the
    class listed first in ``classes_``.
    """

    def __init__(self, n_neighbors=10, prior_correction=True):
        self.n_neighbors = n_neighbors
        self.prior_correction = prior_correction

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=float)
        check_classification_targets(y)
        self.classes_, self._codes = np.unique(y, return_inverse=True)
        self._X = X
        self.class_count_ = np.bincount(self._codes, minlength=len(self.classes_))
        return self

    def _predict_codes(self, D, pools):
        k = min(self.n_neighbors, D.shape[1] - (1 if pools.ndim == 2 else 0))
        nbrs = np.argsort(D, axis=1, kind="stable")[:, :k]
        out = np.empty(D.shape[0], dtype=int)
        for i, nb in enumerate(self._codes[nbrs]):
            counts = np.bincount(nb, minlength=len(self.classes_))
            pool = pools[i] if pools.ndim == 2 else pools
            out[i] = decide(counts, pool, self.prior_correction)
        return out

    def predict(self, X):
        check_is_fitted(self, "_X")
        X = validate_data(self, X, dtype=float, reset=False)
        D = cdist(X, self._X, "sqeuclidean")
        return self.classes_[self._predict_codes(D, self.class_count_)]

    def loo_predict(self):
        """Leave-one-out predictions for the training records."""
        check_is_fitted(self, "_X")
        D = cdist(self._X, self._X, "sqeuclidean")
        np.fill_diagonal(D, np.inf)
        n = len(self._codes)
        pools = np.tile(self.class_count_, (n, 1))
        pools[np.arange(n), self._codes] -= 1
        return self.classes_[self._predict_codes(D, pools)]
