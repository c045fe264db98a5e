"""Severity-tree target metric: leaves, one-way distances, weights, tie-averaged ranks."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Optional

import numpy as np

PRESET = "severity_tree.json"


@dataclass(frozen=True)
class TargetTree:
    """Leaf classes and the inter-leaf distance of a degenerate target space.

    Only the order of distance values matters to rank statistics; the integers
    are kept so reports stay readable.
    """

    leaves: tuple
    distance: np.ndarray
    rules: Optional[dict] = None

    def __post_init__(self):
        d = np.asarray(self.distance)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] != len(self.leaves):
            raise ValueError("distance must be a square matrix with one row per leaf")
        if not np.array_equal(d, d.T):
            raise ValueError("tree distance must be symmetric")
        off = ~np.eye(len(d), dtype=bool)
        if np.any(np.diag(d) != 0) or np.any(d[off] <= 0):
            raise ValueError("tree distance must be zero exactly on the diagonal")
        d = d.copy()
        d.setflags(write=False)
        object.__setattr__(self, "distance", d)
        object.__setattr__(self, "leaves", tuple(self.leaves))

    @property
    def n_leaves(self):
        return len(self.leaves)

    @property
    def max_distance(self):
        return int(np.max(self.distance)) if self.n_leaves > 1 else 0

    def check_labels(self, labels):
        labels = np.asarray(labels)
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_leaves):
            raise ValueError(f"leaf labels must lie in [0, {self.n_leaves})")
        return labels.astype(int)

    def to_dict(self):
        out = {"leaves": list(self.leaves), "distance": self.distance.tolist()}
        if self.rules is not None:
            out["rules"] = self.rules
        return out


def load_tree(path) -> TargetTree:
    """Read a tree preset: JSON with ``leaves``, ``distance`` and optional ``rules``."""
    with open(path, encoding="utf-8") as fh:
        spec = json.load(fh)
    return TargetTree(tuple(spec["leaves"]), np.asarray(spec["distance"]), spec.get("rules"))


def severity_tree() -> TargetTree:
    """The shipped eight-leaf severity tree (event side x two complication groups)."""
    ref = resources.files("wiiselect.presets").joinpath(PRESET)
    with ref.open("r", encoding="utf-8") as fh:
        spec = json.load(fh)
    return TargetTree(tuple(spec["leaves"]), np.asarray(spec["distance"]), spec.get("rules"))


def balanced_tree(depth: int) -> TargetTree:
    """Binary tree with ``2**depth`` leaves; distance = levels up to the common ancestor."""
    n = 2 ** depth
    idx = np.arange(n)
    d = np.zeros((n, n), dtype=int)
    for a in idx:
        for b in idx:
            if a != b:
                d[a, b] = int(a ^ b).bit_length()
    return TargetTree(tuple(f"leaf{i}" for i in idx), d)


def tree_distance(a: int, b: int, tree: TargetTree) -> int:
    if not (0 <= a < tree.n_leaves and 0 <= b < tree.n_leaves):
        raise IndexError(f"leaf index out of range for a {tree.n_leaves}-leaf tree")
    return int(tree.distance[a, b])


def leaf_sizes(labels, n_leaves) -> np.ndarray:
    return np.bincount(np.asarray(labels, dtype=int), minlength=n_leaves)


def class_weights(labels, tree: TargetTree) -> np.ndarray:
    """Per-record weight ``1 / size of the record's leaf``; each leaf sums to 1."""
    labels = tree.check_labels(labels)
    sizes = leaf_sizes(labels, tree.n_leaves)
    return 1.0 / sizes[labels]


@dataclass(frozen=True)
class TargetRanks:
    """Tie-averaged target ranks, stored per leaf pair.

    ``leaf_rank[l, m]`` is the rank, as seen from any record of leaf ``l``, of
    any other record of leaf ``m``. Rows of leaves without members are NaN.
    """

    labels: np.ndarray
    leaf_rank: np.ndarray

    @property
    def n_records(self):
        return len(self.labels)

    def rank(self, i, j):
        return self.leaf_rank[self.labels[i], self.labels[j]]

    def matrix(self) -> np.ndarray:
        """Dense N x N rank matrix with NaN on the diagonal."""
        m = self.leaf_rank[np.ix_(self.labels, self.labels)].astype(float)
        np.fill_diagonal(m, np.nan)
        return m


def target_ranks(labels, tree: TargetTree) -> TargetRanks:
    """Rank every record pair by tree distance, averaging ranks within ties.

    From record i, the other N-1 records fall into buckets of equal tree
    distance; buckets are ordered by distance and every record in a bucket
    gets the mean of the ranks the bucket spans (rank 0 = nearest).
    """
    labels = tree.check_labels(labels)
    L = tree.n_leaves
    sizes = leaf_sizes(labels, L)
    table = np.full((L, L), np.nan)
    for l in np.flatnonzero(sizes):
        others = sizes.copy()
        others[l] -= 1
        row = tree.distance[l]
        start = 0
        for dist in np.unique(row):
            members = np.flatnonzero(row == dist)
            count = int(others[members].sum())
            if count:
                table[l, members[others[members] > 0]] = start + (count - 1) / 2.0
            start += count
    table.setflags(write=False)
    labels = labels.copy()
    labels.setflags(write=False)
    return TargetRanks(labels, table)


def labels_from_rules(table, tree: TargetTree, rules: Optional[dict] = None) -> np.ndarray:
    """Assign leaves from binary outcome columns.

    ``rules = {"event": [cols], "groups": [[cols], ...]}``. A record is on the
    event side if any event column is nonzero; complication group ``g`` sets
    bit ``g`` of the within-side index. Leaf = side * 2**G + bits, so the tree
    needs ``2**(G+1)`` leaves.
    """
    rules = rules if rules is not None else tree.rules
    if not rules:
        raise ValueError("tree has no labelling rules")
    groups = rules.get("groups", [])
    if tree.n_leaves != 2 ** (len(groups) + 1):
        raise ValueError(f"{len(groups)} complication groups need {2 ** (len(groups) + 1)} leaves")

    def any_positive(cols):
        idx = [table.index(c) for c in cols]
        if not table.present[:, idx].all():
            missing = [c for c, j in zip(cols, idx) if not table.present[:, j].all()]
            raise ValueError(f"outcome columns with missing values: {missing}")
        return (table.values[:, idx] != 0).any(axis=1)

    side = any_positive(rules["event"]).astype(int)
    bits = np.zeros(table.n_records, dtype=int)
    for g, cols in enumerate(groups):
        bits |= any_positive(cols).astype(int) << g
    return side * 2 ** len(groups) + bits


def flat_tree(n_leaves: int) -> TargetTree:
    """All leaves at distance 1 from each other (plain classification target)."""
    d = 1 - np.eye(n_leaves, dtype=int)
    return TargetTree(tuple(f"class{i}" for i in range(n_leaves)), d)
