import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from wiiselect.data import FeatureTable, normalize_and_jitter  # noqa: E402
from wiiselect.tree import balanced_tree  # noqa: E402


def threshold_plant(seed, dim, n=500, n_noise=10):
    """Leaf = binary code of which side of 0.5 each of ``dim`` uniform features falls.

    Returns (X, labels); planted features are the first ``dim`` columns.
    """
    rng = np.random.default_rng(seed)
    U = rng.uniform(size=(n, dim))
    y = np.zeros(n, dtype=int)
    for j in range(dim):
        y = y * 2 + (U[:, j] > 0.5)
    X = np.column_stack([U, rng.uniform(size=(n, n_noise))])
    return X, y


def single_plant(seed, n=500, n_noise=20, n_leaves=4):
    """One informative feature (leaf = its quartile) placed at a random column."""
    rng = np.random.default_rng(seed)
    u = rng.uniform(size=n)
    y = np.minimum((u * n_leaves).astype(int), n_leaves - 1)
    X = rng.uniform(size=(n, n_noise + 1))
    col = int(rng.integers(n_noise + 1))
    X[:, col] = u
    return X, y, col


def view_of(X, seed=0, jitter_scale=1e-6):
    return normalize_and_jitter(FeatureTable.from_array(X), seed, jitter_scale)


@pytest.fixture
def tree4():
    return balanced_tree(2)


@pytest.fixture
def tree8():
    return balanced_tree(3)
