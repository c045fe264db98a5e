"""Slow reference implementations written straight from the definitions.

Nothing here imports the package's numerical code, so tests comparing
against these functions check the fast paths independently.
"""

import math
from collections import Counter
from itertools import combinations


def brute_nn(points):
    """Nearest other point by exhaustive scan (list of tuples)."""
    out = []
    for i, p in enumerate(points):
        best, best_d = None, math.inf
        for j, q in enumerate(points):
            if i == j:
                continue
            d = sum((a - b) ** 2 for a, b in zip(p, q))
            if d < best_d:
                best, best_d = j, d
        out.append(best)
    return out


def brute_tied_ranks(dist_row, i):
    """Rank (0 = nearest) of every j != i by dist_row[j], ties averaged.

    rank = #{k: d_k < d_j} + (#{k: d_k == d_j} - 1) / 2 over k != i.
    """
    others = [j for j in range(len(dist_row)) if j != i]
    counts = Counter(dist_row[j] for j in others)
    below, seen = {}, 0
    for value in sorted(counts):
        below[value] = seen
        seen += counts[value]
    return {j: below[dist_row[j]] + (counts[dist_row[j]] - 1) / 2 for j in others}


def brute_target_rank_matrix(labels, dist):
    n = len(labels)
    R = [[None] * n for _ in range(n)]
    for i in range(n):
        row = [dist[labels[i]][labels[j]] for j in range(n)]
        for j, r in brute_tied_ranks(row, i).items():
            R[i][j] = r
    return R


def brute_delta_w(points, labels, dist):
    """Class-weighted imbalance of ``points`` toward the tree, from scratch."""
    n = len(points)
    nn = brute_nn(points)
    R = brute_target_rank_matrix(labels, dist)
    size = {}
    for l in labels:
        size[l] = size.get(l, 0) + 1
    num = sum(R[i][nn[i]] / size[labels[i]] for i in range(n))
    den = sum(1 / size[labels[i]] for i in range(n))
    return 2 / (n - 2) * num / den


def exhaustive_best(X, present, labels, dist, features, size, min_support):
    """Best (score, tuple) over all tuples of ``size`` with enough complete rows.

    ``X``/``present`` are lists of rows. Ties resolve to the lexicographically
    smallest tuple.
    """
    best = None
    for tup in combinations(sorted(features), size):
        rows = [i for i in range(len(X)) if all(present[i][f] for f in tup)]
        if len(rows) < max(min_support, 3):
            continue
        pts = [tuple(X[i][f] for f in tup) for i in rows]
        score = brute_delta_w(pts, [labels[i] for i in rows], dist)
        if best is None or (score, tup) < best:
            best = (score, tup)
    return best


def jsd_base2(p, q):
    def kl_to_mid(a, b):
        return sum(x * math.log2(2 * x / (x + y)) for x, y in zip(a, b) if x > 0)

    return 0.5 * kl_to_mid(p, q) + 0.5 * kl_to_mid(q, p)
