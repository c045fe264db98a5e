import warnings

import numpy as np
import pytest

from conftest import single_plant, threshold_plant, view_of
from oracles import exhaustive_best
from wiiselect.data import FeatureTable, normalize_and_jitter
from wiiselect.search import (
    BeamConfig,
    InfeasibleError,
    SizeCurve,
    beam_search,
    detect_optimal_size,
    patient_specific_search,
    patient_specific_tuples,
    random_tuple_baseline,
    seed_stability_sweep,
    usage_statistic,
)
from wiiselect.tree import balanced_tree


def _mcar_table(seed, n=60, d=6, rate=0.1):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    X[rng.uniform(size=X.shape) < rate] = np.nan
    labels = rng.integers(0, 4, size=n)
    return X, labels


def test_planted_single_feature_found(tree4):
    X, y, col = single_plant(0)
    curve = beam_search(view_of(X), tree4, y, BeamConfig(beam_width=5, max_tuple_size=2))
    assert curve.best(1).features == (col,)


@pytest.mark.parametrize("seed", range(4))
def test_beam_matches_exhaustive_search(seed, tree4):
    X, labels = _mcar_table(seed)
    view = normalize_and_jitter(FeatureTable.from_array(X), seed)
    config = BeamConfig(beam_width=15, max_tuple_size=3, min_support=20, max_jsd=1.0)
    curve = beam_search(view, tree4, labels, config)
    present = view.present.tolist()
    Xj = view.jittered.tolist()
    for size in (1, 2, 3):
        score, tup = exhaustive_best(Xj, present, labels.tolist(), tree4.distance.tolist(),
                                     range(X.shape[1]), size, 20)
        assert curve.best(size).features == tup
        assert curve.best(size).delta_w == pytest.approx(score)


@pytest.mark.parametrize("dim", [2, 3])
def test_multi_feature_plant_optimum(dim):
    X, y = threshold_plant(1, dim)
    tree = balanced_tree(dim)
    curve = beam_search(view_of(X), tree, y, BeamConfig(beam_width=10, max_tuple_size=dim + 2))
    assert curve.optimal_n <= dim + 1
    assert set(range(dim)) <= set(curve.best(dim).features)


def test_wider_beam_never_worse_up_to_pairs(tree4):
    X, labels = _mcar_table(7, n=120, d=10)
    view = normalize_and_jitter(FeatureTable.from_array(X), 7)
    scores = []
    for width in (1, 3, 10):
        cfg = BeamConfig(beam_width=width, max_tuple_size=2, min_support=20, max_jsd=1.0)
        scores.append(beam_search(view, tree4, labels, cfg).best(2).delta_w)
    assert scores[0] >= scores[1] >= scores[2]


def test_constraints_exclude_sparse_features(tree4):
    X, labels = _mcar_table(3, n=150, d=5, rate=0.0)
    X[:100, 2] = np.nan  # feature 2 complete in only 50 records
    view = normalize_and_jitter(FeatureTable.from_array(X), 0)
    curve = beam_search(view, tree4, labels, BeamConfig(beam_width=10, max_tuple_size=3,
                                                        min_support=100, max_jsd=1.0))
    for cands in curve.levels.values():
        for c in cands:
            assert 2 not in c.features
            assert len(c.support) >= 100


def test_infeasible_raises(tree4):
    X, labels = _mcar_table(0, n=50)
    view = normalize_and_jitter(FeatureTable.from_array(X), 0)
    with pytest.raises(InfeasibleError):
        beam_search(view, tree4, labels, BeamConfig(min_support=100))


def test_parallel_evaluation_is_identical(tree4):
    X, y, _ = single_plant(2, n=200, n_noise=8)
    view = view_of(X)
    a = beam_search(view, tree4, y, BeamConfig(beam_width=4, max_tuple_size=3))
    b = beam_search(view, tree4, y, BeamConfig(beam_width=4, max_tuple_size=3, n_jobs=4))
    assert a.to_dict() == b.to_dict()


def test_curve_to_dict_names(tree4):
    X, y, col = single_plant(0, n=200, n_noise=3)
    curve = beam_search(view_of(X), tree4, y, BeamConfig(beam_width=2, max_tuple_size=2, top_k_report=3))
    names = [f"f{j}" for j in range(X.shape[1])]
    d = curve.to_dict(names)
    assert d["sizes"][0]["top"][0]["features"] == [f"f{col}"]
    assert len(d["sizes"][0]["top"]) == 3
    assert d["optimal_size"] == curve.optimal_n


def test_detect_optimal_size():
    assert detect_optimal_size([0.9, 0.7, 0.7, 0.8], warn=False) == 2
    with pytest.warns(RuntimeWarning, match="decreasing"):
        assert detect_optimal_size([0.9, 0.8, 0.7]) == 3
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        detect_optimal_size([0.9, 0.8, 0.85])
    with pytest.raises(ValueError):
        detect_optimal_size([])
    assert isinstance(SizeCurve().levels, dict)


def test_duplicate_feature_is_interchangeable(tree4):
    X, y, col = single_plant(4, n=300, n_noise=4)
    X = np.column_stack([X, X[:, col]])
    curve = beam_search(view_of(X), tree4, y, BeamConfig(beam_width=5, max_tuple_size=1))
    top = curve.levels[1]
    assert {top[0].features, top[1].features} == {(col,), (X.shape[1] - 1,)}
    assert top[0].delta_w == top[1].delta_w


def test_patient_specific_uses_only_present_features_and_excludes_record(tree4):
    X, y, col = single_plant(5, n=300, n_noise=5)
    X[0, col] = np.nan
    view = view_of(X)
    cfg = BeamConfig(beam_width=3, max_tuple_size=3)
    cand = patient_specific_search(view, tree4, y, 0, cfg)
    assert col not in cand.features
    assert 0 not in set(cand.support.tolist())
    other = patient_specific_search(view, tree4, y, 1, cfg)
    assert col in other.features
    assert 1 not in set(other.support.tolist())


def test_patient_specific_tuples_and_usage(tree4):
    X, y, col = single_plant(6, n=200, n_noise=4)
    X[:20, col] = np.nan
    table = FeatureTable.from_array(X)
    view = normalize_and_jitter(table, 0)
    tuples = patient_specific_tuples(view, tree4, y, BeamConfig(beam_width=2, max_tuple_size=2),
                                     records=range(30))
    assert sorted(tuples) == list(range(30))
    stats = usage_statistic(tuples, table)
    row = {r["feature"]: r for r in stats.rows()}[f"x{col}"]
    assert row["n_available"] == 180
    assert row["n_selected"] == 10  # only records 20..29 could use it, and all do


def test_usage_statistic_hand_example():
    X = np.array([[1, 2, np.nan], [1, np.nan, np.nan], [1, 2, np.nan]], dtype=float)
    table = FeatureTable.from_array(X, names=["a", "b", "c"])
    stats = usage_statistic({0: (0, 1), 1: (0,), 2: (1,)}, table)
    assert stats.names == ["a", "b"]  # c never available
    assert stats.usage.tolist() == [2 / 3, 1.0]
    assert [r["feature"] for r in stats.rows()] == ["b", "a"]


def test_seed_sweep_on_continuous_data_is_stable(tree4):
    X, y, col = single_plant(8, n=200, n_noise=3)
    table = FeatureTable.from_array(X)
    sweep = seed_stability_sweep(lambda s: normalize_and_jitter(table, s), tree4, y,
                                 BeamConfig(beam_width=3, max_tuple_size=2), seeds=[0, 1, 2])
    assert sweep.score_std()[1] == 0.0
    assert sweep.modal_tuple(1) == ((col,), 1.0)
    assert sweep.membership(1) == {col: 1.0}
    with pytest.raises(ValueError):
        seed_stability_sweep(lambda s: normalize_and_jitter(table, s), tree4, y, seeds=[0])


def test_seed_sweep_on_discrete_data_varies_but_is_bounded(tree4):
    rng = np.random.default_rng(0)
    X = rng.integers(0, 3, size=(300, 4)).astype(float)
    y = (X[:, 0] + rng.integers(0, 2, size=300)).astype(int) % 4
    table = FeatureTable.from_array(X)
    sweep = seed_stability_sweep(lambda s: normalize_and_jitter(table, s), tree4, y,
                                 BeamConfig(beam_width=3, max_tuple_size=1), seeds=range(5))
    assert 0 < sweep.score_std()[1] < 0.1


def test_random_tuple_baseline(tree4):
    X, y, col = single_plant(0, n=200, n_noise=5)
    view = view_of(X)
    cfg = BeamConfig(top_k_report=3)
    # C(6, 2) = 15 tuples in total: all are enumerated
    with pytest.warns(RuntimeWarning, match="only 15 of 100"):
        ranked = random_tuple_baseline(view, tree4, y, 2, 100, seed=0, config=cfg)
    assert len(ranked) == 3
    beam = beam_search(view, tree4, y, BeamConfig(beam_width=6, max_tuple_size=2))
    assert ranked[0].delta_w == pytest.approx(beam.best(2).delta_w)
    def picks(seed):
        return [(c.features, c.delta_w) for c in random_tuple_baseline(view, tree4, y, 2, 5, seed, cfg)]

    assert picks(1) == picks(1)
    with pytest.raises(ValueError):
        random_tuple_baseline(view, tree4, y, 7, 5, seed=0)
