"""Beam search over feature tuples, size curves, patient-specific tuples and usage."""

from __future__ import annotations

import hashlib
import logging
import math
import warnings
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np

from .data import CandidateRejected, FeatureTable, NormalizedView, SubsetSpec, TupleCandidate, make_candidate
from .imbalance import input_nearest_neighbors, weighted_imbalance
from .tree import TargetTree, class_weights, target_ranks

logger = logging.getLogger(__name__)


class InfeasibleError(RuntimeError):
    """No feature tuple satisfies the support and stratification constraints."""


@dataclass(frozen=True)
class BeamConfig:
    beam_width: int = 55
    max_tuple_size: int = 20
    min_support: int = 100
    max_jsd: float = 0.06
    top_k_report: int = 10
    n_jobs: int = 1
    method: str = "brute"

    def __post_init__(self):
        if self.beam_width < 1 or self.max_tuple_size < 1 or self.top_k_report < 1:
            raise ValueError("beam_width, max_tuple_size and top_k_report must be >= 1")

    def subset_spec(self, labels, n_leaves):
        return SubsetSpec.from_labels(labels, n_leaves, self.min_support, self.max_jsd)


class CandidateEvaluator:
    """Scores feature tuples, memoized on (features, excluded records).

    Rejected tuples are remembered as ``None``.
    """

    def __init__(self, view, tree, labels, spec, method="brute"):
        self.view = view
        self.tree = tree
        self.labels = np.asarray(labels, dtype=int)
        self.spec = spec
        self.method = method
        self._cache = {}
        self._targets = {}

    def _target(self, support):
        # many tuples share one support (e.g. complete columns); ranks depend only on it
        key = hashlib.sha1(support.tobytes()).hexdigest()
        hit = self._targets.get(key)
        if hit is None:
            y = self.labels[support]
            hit = (target_ranks(y, self.tree), class_weights(y, self.tree))
            self._targets[key] = hit
        return hit

    def __call__(self, features, exclude=None):
        key = (tuple(sorted(features)), exclude)
        if key in self._cache:
            return self._cache[key]
        try:
            cand = make_candidate(self.view, key[0], self.spec, self.labels, exclude=exclude)
        except CandidateRejected:
            result = None
        else:
            target, weights = self._target(cand.support)
            ranks = input_nearest_neighbors(self.view, cand, self.method)
            cand.delta_w = weighted_imbalance(ranks, target, weights).value
            result = cand
        self._cache[key] = result
        return result

    def evaluate_many(self, tuples, exclude=None, n_jobs=1):
        """Evaluate tuples, returning accepted candidates ranked by (score, features)."""
        tuples = list(tuples)
        if n_jobs > 1 and len(tuples) > 1:
            with ThreadPoolExecutor(max_workers=n_jobs) as pool:
                results = list(pool.map(lambda t: self(t, exclude), tuples))
        else:
            results = [self(t, exclude) for t in tuples]
        return rank_candidates(c for c in results if c is not None)


def rank_candidates(cands: Iterable[TupleCandidate]) -> list:
    # lexicographic tie-break on sorted feature indices keeps the order deterministic
    return sorted(cands, key=lambda c: (c.delta_w, c.features))


@dataclass
class SizeCurve:
    """Best candidates per tuple size (top ``top_k_report`` distinct tuples each)."""

    levels: dict = field(default_factory=dict)

    @property
    def sizes(self):
        return sorted(self.levels)

    @property
    def best_scores(self):
        return [self.levels[n][0].delta_w for n in self.sizes]

    def best(self, size=None):
        size = self.optimal_n if size is None else size
        return self.levels[size][0]

    @property
    def optimal_n(self):
        return detect_optimal_size(self, warn=False)

    def to_dict(self, names=None):
        def label(f):
            return names[f] if names is not None else int(f)

        return {
            "optimal_size": self.optimal_n,
            "sizes": [
                {
                    "size": n,
                    "best_delta_w": self.levels[n][0].delta_w,
                    "top": [
                        {
                            "features": [label(f) for f in c.features],
                            "delta_w": c.delta_w,
                            "support": int(len(c.support)),
                            "jsd": c.jsd,
                        }
                        for c in self.levels[n]
                    ],
                }
                for n in self.sizes
            ],
        }


def _beam_levels(evaluator: CandidateEvaluator, pool: Sequence[int], config: BeamConfig,
                 exclude=None) -> Iterator[tuple]:
    """Yield ``(size, ranked accepted candidates)`` level by level."""
    pool = sorted(set(pool))
    frontier = [(f,) for f in pool]
    for size in range(1, config.max_tuple_size + 1):
        if not frontier:
            return
        ranked = evaluator.evaluate_many(frontier, exclude=exclude, n_jobs=config.n_jobs)
        if not ranked:
            return
        yield size, ranked
        children = set()
        for parent in ranked[: config.beam_width]:
            members = set(parent.features)
            for f in pool:
                if f not in members:
                    children.add(tuple(sorted(members | {f})))
        frontier = sorted(children)


def beam_search(view: NormalizedView, tree: TargetTree, labels, config: BeamConfig = BeamConfig(),
                features: Optional[Sequence[int]] = None) -> SizeCurve:
    """Minimize the weighted imbalance over tuples of growing size.

    Size 1 scores every admissible singleton; size n+1 extends each of the
    ``beam_width`` best n-tuples by every admissible feature. Tuples violating
    the support or JSD constraint are skipped. Every size up to
    ``max_tuple_size`` is evaluated, also past the optimum.
    """
    labels = tree.check_labels(labels)
    pool = view.admissible() if features is None else [f for f in features if f in set(view.admissible())]
    evaluator = CandidateEvaluator(view, tree, labels, config.subset_spec(labels, tree.n_leaves),
                                   config.method)
    curve = SizeCurve()
    for size, ranked in _beam_levels(evaluator, pool, config):
        curve.levels[size] = ranked[: config.top_k_report]
        logger.debug("size %d: best %.4f over %d tuples", size, ranked[0].delta_w, len(ranked))
    if not curve.levels:
        raise InfeasibleError("no admissible single feature meets the support/JSD constraints")
    return curve


def detect_optimal_size(curve, warn=True) -> int:
    """Tuple size with the lowest best score; ties go to the smaller size.

    Accepts a SizeCurve or a sequence of best scores for sizes 1, 2, ...
    """
    if isinstance(curve, SizeCurve):
        sizes, scores = curve.sizes, curve.best_scores
    else:
        scores = list(curve)
        sizes = list(range(1, len(scores) + 1))
    if not scores:
        raise ValueError("empty curve")
    best = int(np.argmin(scores))
    if warn and len(scores) > 1 and all(b < a for a, b in zip(scores, scores[1:])):
        warnings.warn("imbalance still decreasing at the largest tuple size; "
                      "the curve did not turn", RuntimeWarning, stacklevel=2)
    return sizes[best]


def patient_specific_search(view: NormalizedView, tree: TargetTree, labels, record: int,
                            config: BeamConfig = BeamConfig(), epsilon_flat: float = 1e-3,
                            evaluator: Optional[CandidateEvaluator] = None) -> TupleCandidate:
    """Best tuple built only from features present in ``record``.

    The record is held out of every support it helps choose. The search grows
    tuples until the best score stops improving by more than ``epsilon_flat``.
    """
    labels = tree.check_labels(labels)
    admissible = view.admissible()
    pool = [f for f in admissible if view.present[record, f]]
    if not pool:
        raise InfeasibleError(f"record {record} has no present admissible feature")
    if evaluator is None:
        evaluator = CandidateEvaluator(view, tree, labels, config.subset_spec(labels, tree.n_leaves),
                                       config.method)
    best = None
    for _, ranked in _beam_levels(evaluator, pool, config, exclude=int(record)):
        top = ranked[0]
        if best is not None and top.delta_w > best.delta_w - epsilon_flat:
            break
        best = top
    if best is None:
        raise InfeasibleError(f"no tuple for record {record} meets the support/JSD constraints")
    return best


def patient_specific_tuples(view, tree, labels, config: BeamConfig = BeamConfig(),
                            records=None, epsilon_flat=1e-3) -> dict:
    """Patient-specific search for many records; infeasible records are left out."""
    labels = tree.check_labels(labels)
    evaluator = CandidateEvaluator(view, tree, labels, config.subset_spec(labels, tree.n_leaves),
                                   config.method)
    records = range(view.n_records) if records is None else records
    out = {}
    for r in records:
        try:
            out[int(r)] = patient_specific_search(view, tree, labels, r, config, epsilon_flat,
                                                  evaluator=evaluator)
        except InfeasibleError as exc:
            logger.info("%s", exc)
    return out


@dataclass
class UsageStats:
    names: list
    n_selected: np.ndarray
    n_available: np.ndarray

    @property
    def usage(self):
        return self.n_selected / self.n_available

    def rows(self):
        """One row per feature, sorted by usage (desc) then name."""
        rows = [
            {"feature": nm, "usage": float(s / a), "n_selected": int(s), "n_available": int(a)}
            for nm, s, a in zip(self.names, self.n_selected, self.n_available)
        ]
        return sorted(rows, key=lambda r: (-r["usage"], r["feature"]))


def usage_statistic(tuples: Mapping[int, Iterable[int]], table: FeatureTable,
                    features: Optional[Sequence[int]] = None) -> UsageStats:
    """Times each feature appears in per-record tuples over its availability count.

    Features never available are omitted.
    """
    feats = table.input_indices() if features is None else list(features)
    selected = Counter()
    for tup in tuples.values():
        members = tup.features if isinstance(tup, TupleCandidate) else tup
        selected.update(set(int(f) for f in members))
    available = table.present[:, feats].sum(axis=0)
    keep = [i for i, a in enumerate(available) if a > 0]
    return UsageStats(
        names=[table.metas[feats[i]].name for i in keep],
        n_selected=np.array([selected[feats[i]] for i in keep], dtype=int),
        n_available=np.asarray(available)[keep].astype(int),
    )


@dataclass
class SweepResult:
    seeds: list
    curves: list

    def scores(self, size):
        return [c.levels[size][0].delta_w if size in c.levels else math.nan for c in self.curves]

    @property
    def sizes(self):
        return sorted(set().union(*(c.levels for c in self.curves)))

    def score_std(self):
        return {n: float(np.nanstd(self.scores(n))) for n in self.sizes}

    def best_tuples(self, size):
        return [c.levels[size][0].features for c in self.curves if size in c.levels]

    def membership(self, size):
        """Fraction of seeds whose best ``size``-tuple contains each feature."""
        tuples = self.best_tuples(size)
        counts = Counter(f for t in tuples for f in t)
        return {f: counts[f] / len(self.curves) for f in sorted(counts)}

    def modal_tuple(self, size):
        """Most frequent best tuple and the fraction of seeds that found it."""
        tup, n = Counter(self.best_tuples(size)).most_common(1)[0]
        return tup, n / len(self.curves)


def seed_stability_sweep(view_factory: Callable[[int], NormalizedView], tree: TargetTree, labels,
                         config: BeamConfig = BeamConfig(), seeds: Sequence[int] = range(10)) -> SweepResult:
    """Repeat the beam search on views jittered with different seeds."""
    seeds = list(seeds)
    if len(seeds) < 2:
        raise ValueError("a stability sweep needs at least two seeds")
    curves = [beam_search(view_factory(s), tree, labels, config) for s in seeds]
    return SweepResult(seeds, curves)


def random_tuple_baseline(view: NormalizedView, tree: TargetTree, labels, size: int, n_draws: int,
                          seed: int, config: BeamConfig = BeamConfig()) -> list:
    """Score uniformly drawn admissible tuples; return the ``top_k_report`` best."""
    labels = tree.check_labels(labels)
    pool = view.admissible()
    if size > len(pool):
        raise ValueError(f"size {size} exceeds the {len(pool)} admissible features")
    rng = np.random.default_rng(seed)
    if math.comb(len(pool), size) <= n_draws:
        draws = list(combinations(pool, size))
    else:
        seen = set()
        for _ in range(50 * n_draws):
            seen.add(tuple(sorted(rng.choice(pool, size=size, replace=False).tolist())))
            if len(seen) == n_draws:
                break
        draws = sorted(seen)
    evaluator = CandidateEvaluator(view, tree, labels, config.subset_spec(labels, tree.n_leaves),
                                   config.method)
    ranked = evaluator.evaluate_many(draws, n_jobs=config.n_jobs)
    if len(ranked) < n_draws:
        warnings.warn(f"only {len(ranked)} of {n_draws} requested random tuples satisfy the "
                      "constraints", RuntimeWarning, stacklevel=2)
    return ranked[: config.top_k_report]
