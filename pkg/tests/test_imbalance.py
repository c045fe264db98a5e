import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import view_of
from oracles import brute_delta_w, brute_nn, brute_tied_ranks
from wiiselect.data import SubsetSpec, make_candidate
from wiiselect.imbalance import (
    InputRanks,
    classic_imbalance,
    conditional_ranks,
    distance_ranks,
    nearest_neighbors,
    score_candidate,
    weighted_imbalance,
)
from wiiselect.tree import balanced_tree, class_weights, flat_tree, severity_tree, target_ranks


def _ranks(nn):
    nn = np.asarray(nn)
    return InputRanks(nn, np.arange(len(nn)))


def test_nearest_neighbors_matches_brute_force():
    X = np.random.default_rng(0).normal(size=(80, 3))
    expected = brute_nn([tuple(r) for r in X])
    assert nearest_neighbors(X).tolist() == expected
    assert nearest_neighbors(X, method="kdtree").tolist() == expected


def test_nearest_neighbors_rejects_tiny_input():
    with pytest.raises(ValueError):
        nearest_neighbors(np.zeros((1, 2)))
    with pytest.raises(ValueError):
        nearest_neighbors(np.zeros((3, 2)), method="ball")


def test_distance_ranks_tie_average():
    X = np.array([0.0, 1.0, -1.0, 3.0])
    R = distance_ranks(X)
    D = np.abs(X[:, None] - X[None, :])
    for i in range(4):
        for j, r in brute_tied_ranks(D[i].tolist(), i).items():
            assert R[i, j] == r
    assert R[0, 1] == R[0, 2] == 0.5


def test_conditional_ranks_matches_full_matrix():
    rng = np.random.default_rng(1)
    Xb = rng.integers(0, 4, size=(60, 2)).astype(float)  # many ties
    nn = rng.integers(0, 60, size=60)
    nn[nn == np.arange(60)] = (nn[nn == np.arange(60)] + 1) % 60
    full = distance_ranks(Xb)[np.arange(60), nn]
    np.testing.assert_allclose(conditional_ranks(Xb, nn), full)


def test_classic_identity_small():
    # a continuous space predicts itself exactly
    X = np.random.default_rng(2).normal(size=(300, 2))
    nn = nearest_neighbors(X)
    score = classic_imbalance(_ranks(nn), distance_ranks(X))
    assert score.value < 0.01


def test_classic_shape_checks():
    with pytest.raises(ValueError):
        classic_imbalance(_ranks([1, 0, 0]), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        classic_imbalance(_ranks([1, 0, 0]), np.zeros(2))


def test_weighted_equals_unweighted_for_balanced_leaves():
    labels = np.repeat(np.arange(4), 15)
    rng = np.random.default_rng(0)
    nn = (np.arange(60) + rng.integers(1, 60, size=60)) % 60
    target = target_ranks(labels, balanced_tree(2))
    a = weighted_imbalance(_ranks(nn), target, class_weights(labels, balanced_tree(2))).value
    b = weighted_imbalance(_ranks(nn), target).value
    assert a == pytest.approx(b)


def test_weighting_credits_minority_structure():
    # minority leaves form tight separate clusters; the majority is spread out.
    # Unweighted, the majority's large same-leaf rank hides the minority success.
    rng = np.random.default_rng(5)
    labels = np.array([0] * 270 + [1] * 10 + [2] * 10 + [3] * 10)
    X = np.empty((300, 1))
    X[:270, 0] = rng.uniform(0, 10, size=270)
    X[270:, 0] = 20 + 5 * labels[270:] + rng.normal(0, 0.01, size=30)
    view = view_of(X)
    cand = make_candidate(view, (0,), SubsetSpec.from_labels(labels, 4, min_support=10, max_jsd=1.0), labels)
    tree = balanced_tree(2)
    weighted = score_candidate(view, cand, labels, tree).value
    plain = score_candidate(view, cand, labels, tree, weighted=False).value
    assert weighted < plain - 0.3


def test_weighted_guards():
    target = target_ranks([0, 1], flat_tree(2))
    with pytest.raises(ValueError):
        weighted_imbalance(_ranks([1, 0]), target)
    target = target_ranks([0, 1, 1], flat_tree(2))
    with pytest.raises(ValueError):
        weighted_imbalance(_ranks([1, 0, 0]), target, [1, 0, 1])
    with pytest.raises(ValueError):
        weighted_imbalance(_ranks([1, 0]), target)


def test_perfect_predictor_scores_zero():
    labels = np.repeat(np.arange(8), 20)
    X = labels[:, None] * 10.0 + np.random.default_rng(0).uniform(size=(160, 1))
    view = view_of(X)
    spec = SubsetSpec.from_labels(labels, 8, min_support=10)
    cand = make_candidate(view, (0,), spec, labels)
    assert score_candidate(view, cand, labels, severity_tree()).value == pytest.approx(
        2 / 158 * 9.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(5, 30), st.integers(1, 3))
def test_score_matches_brute_force(seed, n, d):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    labels = rng.integers(0, 8, size=n)
    view = view_of(X, seed)
    spec = SubsetSpec.from_labels(labels, 8, min_support=3, max_jsd=1.0)
    cand = make_candidate(view, tuple(range(d)), spec, labels)
    tree = severity_tree()
    pts = [tuple(r) for r in view.jittered[:, :d]]
    expected = brute_delta_w(pts, labels.tolist(), tree.distance.tolist())
    assert score_candidate(view, cand, labels, tree).value == pytest.approx(expected)
    assert score_candidate(view, cand, labels, tree, method="kdtree").value == pytest.approx(expected)


def test_score_invariant_to_record_permutation():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(120, 2))
    labels = rng.integers(0, 4, size=120)
    perm = rng.permutation(120)
    tree = balanced_tree(2)

    def score(X, labels):
        view = view_of(X)
        spec = SubsetSpec.from_labels(labels, 4, min_support=10, max_jsd=1.0)
        return score_candidate(view, make_candidate(view, (0, 1), spec, labels), labels, tree).value

    assert score(X, labels) == pytest.approx(score(X[perm], labels[perm]))


def test_weighting_penalizes_minority_errors():
    # majority records come in twin pairs 1e-3 apart (always a same-leaf neighbor);
    # each minority record sits 1e-2 from a majority pair (always a miss)
    centers = np.arange(135.0)
    X = np.concatenate([centers, centers + 1e-3, centers[:30] + 1e-2])[:, None]
    labels = np.array([0] * 270 + [1] * 30)
    view = view_of(X)
    spec = SubsetSpec.from_labels(labels, 2, min_support=10, max_jsd=1.0)
    cand = make_candidate(view, (0,), spec, labels)
    weighted = score_candidate(view, cand, labels, flat_tree(2)).value
    plain = score_candidate(view, cand, labels, flat_tree(2), weighted=False).value
    a = 2 / 298
    majority_rank, minority_rank = (269 - 1) / 2, 29 + (270 - 1) / 2
    assert plain == pytest.approx(a * (270 * majority_rank + 30 * minority_rank) / 300)
    assert weighted == pytest.approx(a * (majority_rank + minority_rank) / 2)
    assert weighted > plain + 0.05


def test_scale_invariance():
    rng = np.random.default_rng(12)
    X = rng.normal(size=(150, 3))
    labels = rng.integers(0, 4, size=150)
    Y = X * np.array([1e-3, 7.0, 1e4])
    spec = SubsetSpec.from_labels(labels, 4, min_support=10, max_jsd=1.0)
    scores = []
    for data in (X, Y):
        view = view_of(data)
        cand = make_candidate(view, (0, 1, 2), spec, labels)
        scores.append(score_candidate(view, cand, labels, balanced_tree(2)).value)
        if data is X:
            nn_x = nearest_neighbors(view.jittered)
        else:
            np.testing.assert_array_equal(nearest_neighbors(view.jittered), nn_x)
    assert scores[0] == scores[1]
