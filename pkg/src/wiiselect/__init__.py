"""Feature-subset selection on incomplete tabular data by class-weighted Information Imbalance."""

__version__ = "0.1.0"

from .data import (CandidateRejected, FeatureMeta, FeatureTable, NormalizedView, SubsetSpec,
                   TableError, TupleCandidate, jensen_shannon, load_table, make_candidate,
                   normalize_and_jitter)
from .estimators import PriorCorrectedKNNClassifier, WeightedImbalanceSelector
from .imbalance import (ImbalanceScore, InputRanks, classic_imbalance, distance_ranks,
                        input_nearest_neighbors, score_candidate, weighted_imbalance)
from .knn import (KnnConfig, PredictionReport, level_accuracies, pairwise_feature_analysis,
                  prior_corrected_knn, random_neighbor_baseline, summarize_levels)
from .search import (BeamConfig, InfeasibleError, SizeCurve, UsageStats, beam_search,
                     detect_optimal_size, patient_specific_search, patient_specific_tuples,
                     random_tuple_baseline,
                     seed_stability_sweep, usage_statistic)
from .tree import (TargetRanks, TargetTree, balanced_tree, class_weights, flat_tree, labels_from_rules,
                   load_tree, severity_tree, target_ranks, tree_distance)

__all__ = [
    "balanced_tree",
    "beam_search",
    "BeamConfig",
    "CandidateRejected",
    "class_weights",
    "classic_imbalance",
    "detect_optimal_size",
    "distance_ranks",
    "FeatureMeta",
    "FeatureTable",
    "flat_tree",
    "ImbalanceScore",
    "InfeasibleError",
    "input_nearest_neighbors",
    "InputRanks",
    "jensen_shannon",
    "KnnConfig",
    "labels_from_rules",
    "level_accuracies",
    "load_table",
    "load_tree",
    "make_candidate",
    "normalize_and_jitter",
    "NormalizedView",
    "pairwise_feature_analysis",
    "patient_specific_search",
    "patient_specific_tuples",
    "PredictionReport",
    "prior_corrected_knn",
    "PriorCorrectedKNNClassifier",
    "random_neighbor_baseline",
    "random_tuple_baseline",
    "score_candidate",
    "seed_stability_sweep",
    "severity_tree",
    "SizeCurve",
    "SubsetSpec",
    "summarize_levels",
    "TableError",
    "target_ranks",
    "TargetRanks",
    "TargetTree",
    "tree_distance",
    "TupleCandidate",
    "usage_statistic",
    "UsageStats",
    "weighted_imbalance",
    "WeightedImbalanceSelector",
]
