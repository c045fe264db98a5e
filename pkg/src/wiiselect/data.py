"""Tabular ingestion, normalization, degeneracy jitter and complete-case subsets."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

KINDS = ("numeric", "binary", "ordinal", "nominal")
ROLES = ("input", "output")
MISSING_TOKENS = frozenset({"", "na", "nan"})


class TableError(ValueError):
    """Raised when a data or metadata file cannot be turned into a FeatureTable."""


class CandidateRejected(Exception):
    """A feature tuple failed the support or stratification constraint."""

    def __init__(self, reason, features, support_size, jsd=None, spec=None):
        self.reason = reason
        self.features = tuple(features)
        self.support_size = support_size
        self.jsd = jsd
        self.spec = spec
        super().__init__(self._message())

    def _message(self):
        if self.reason == "support":
            limit = self.spec.min_support if self.spec is not None else "?"
            return (f"tuple {self.features} is complete in {self.support_size} records, "
                    f"below min_support={limit}")
        limit = self.spec.max_jsd if self.spec is not None else "?"
        return (f"tuple {self.features} has class-distribution JSD {self.jsd:.4f} "
                f"> max_jsd={limit} over {self.support_size} records")


@dataclass(frozen=True)
class FeatureMeta:
    name: str
    kind: str = "numeric"
    role: str = "input"
    # original column name when this feature is a one-hot indicator
    source: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise TableError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.role not in ROLES:
            raise TableError(f"feature {self.name!r}: unknown role {self.role!r}")


def _frozen(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FeatureTable:
    """N records by D features with an explicit missingness mask.

    ``values[i, j]`` is NaN wherever ``present[i, j]`` is False and must not be
    read there.
    """

    metas: tuple
    values: np.ndarray
    present: np.ndarray
    record_ids: tuple

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        present = np.asarray(self.present, dtype=bool)
        if values.ndim != 2 or values.shape != present.shape:
            raise TableError("values and present must be matching 2-D arrays")
        if values.shape[1] != len(self.metas):
            raise TableError("one FeatureMeta per column is required")
        if len(self.record_ids) != values.shape[0]:
            raise TableError("one record id per row is required")
        names = [m.name for m in self.metas]
        if len(set(names)) != len(names):
            raise TableError("feature names must be unique")
        if len(set(self.record_ids)) != len(self.record_ids):
            raise TableError("record ids must be unique")
        values = np.where(present, values, np.nan)
        object.__setattr__(self, "metas", tuple(self.metas))
        object.__setattr__(self, "record_ids", tuple(str(r) for r in self.record_ids))
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "present", _frozen(present))

    @classmethod
    def from_array(cls, X, names=None, kinds=None, roles=None, record_ids=None):
        """Build a table from a float array where NaN marks a missing value."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise TableError("X must be 2-D")
        n, d = X.shape
        names = list(names) if names is not None else [f"x{j}" for j in range(d)]
        kinds = list(kinds) if kinds is not None else ["numeric"] * d
        roles = list(roles) if roles is not None else ["input"] * d
        metas = tuple(FeatureMeta(nm, k, r) for nm, k, r in zip(names, kinds, roles))
        ids = record_ids if record_ids is not None else [str(i) for i in range(n)]
        return cls(metas, X, ~np.isnan(X), tuple(ids))

    @property
    def n_records(self):
        return self.values.shape[0]

    @property
    def n_features(self):
        return self.values.shape[1]

    @property
    def names(self):
        return [m.name for m in self.metas]

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown feature {name!r}") from None

    def input_indices(self):
        return [j for j, m in enumerate(self.metas) if m.role == "input"]

    def output_indices(self):
        return [j for j, m in enumerate(self.metas) if m.role == "output"]

    def column(self, name):
        """Values of one feature (NaN where missing)."""
        return self.values[:, self.index(name)]


def _is_missing(token, missing_tokens):
    return token.strip().lower() in missing_tokens


def _parse_float(token, column, record_id):
    try:
        return float(token)
    except ValueError:
        raise TableError(
            f"non-numeric token {token!r} in column {column!r} (record {record_id!r})"
        ) from None


def _all_numeric(tokens):
    try:
        for t in tokens:
            float(t)
    except ValueError:
        return False
    return True


def _encode_levels(tokens):
    """Sorted level list and code mapping; numeric tokens sort numerically."""
    levels = sorted(set(tokens))
    if _all_numeric(levels):
        levels = sorted(levels, key=float)
    return levels, {lvl: i for i, lvl in enumerate(levels)}


def load_table(data_path, meta_path, missing_tokens: Iterable[str] = MISSING_TOKENS) -> FeatureTable:
    """Read a data CSV and its ``name,kind,role`` metadata CSV.

    The first data column holds record ids; remaining columns are features.
    Cells matching ``missing_tokens`` (case-insensitive, stripped) are missing.
    Input-role nominal features with more than two levels are expanded into
    one binary indicator per level, named ``<feature>=<level>``.

    Raises
    ------
    TableError
        Unknown or undeclared features, non-numeric tokens in numeric/ordinal
        columns, binary columns with more than two levels, or duplicate ids.
    """
    missing_tokens = frozenset(t.strip().lower() for t in missing_tokens)
    data = pd.read_csv(data_path, dtype=str, keep_default_na=False, na_filter=False)
    meta = pd.read_csv(meta_path, dtype=str, keep_default_na=False, na_filter=False)
    meta.columns = [c.strip().lower() for c in meta.columns]
    for col in ("name", "kind", "role"):
        if col not in meta.columns:
            raise TableError(f"metadata file {meta_path} lacks column {col!r}")
    if data.shape[1] < 2:
        raise TableError("data file needs an id column and at least one feature")

    id_col = data.columns[0]
    record_ids = [s.strip() for s in data[id_col]]
    seen = set()
    for rid in record_ids:
        if rid in seen:
            raise TableError(f"duplicate record id {rid!r}")
        seen.add(rid)

    declared = {}
    for name, kind, role in zip(meta["name"], meta["kind"], meta["role"]):
        name = name.strip()
        if name in declared:
            raise TableError(f"feature {name!r} declared twice in metadata")
        declared[name] = FeatureMeta(name, kind.strip().lower(), role.strip().lower())
    feature_cols = [c for c in data.columns[1:]]
    unknown = sorted(set(declared) - set(feature_cols))
    if unknown:
        raise TableError(f"metadata names features absent from the data: {unknown}")
    undeclared = [c for c in feature_cols if c not in declared]
    if undeclared:
        raise TableError(f"data columns missing from metadata: {undeclared}")

    metas, columns, masks = [], [], []
    n = len(record_ids)
    for col in feature_cols:
        fm = declared[col]
        raw = [t.strip() for t in data[col]]
        present = np.array([not _is_missing(t, missing_tokens) for t in raw])
        observed = [t for t, p in zip(raw, present) if p]

        if fm.kind in ("numeric", "ordinal"):
            vals = np.full(n, np.nan)
            for i in np.flatnonzero(present):
                vals[i] = _parse_float(raw[i], col, record_ids[i])
            metas.append(fm)
            columns.append(vals)
            masks.append(present)
            continue

        levels, code = _encode_levels(observed)
        if fm.kind == "binary" and len(levels) > 2:
            raise TableError(f"binary column {col!r} has {len(levels)} levels: {levels[:5]}")
        numeric_codes = _all_numeric(levels)
        if fm.kind == "nominal" and fm.role == "input" and len(levels) > 2:
            for lvl in levels:
                ind = np.where(present, [1.0 if t == lvl else 0.0 for t in raw], np.nan)
                metas.append(FeatureMeta(f"{col}={lvl}", "binary", "input", source=col))
                columns.append(ind)
                masks.append(present.copy())
            continue
        vals = np.full(n, np.nan)
        for i in np.flatnonzero(present):
            vals[i] = float(raw[i]) if numeric_codes else float(code[raw[i]])
        metas.append(fm)
        columns.append(vals)
        masks.append(present)

    values = np.column_stack(columns) if columns else np.empty((n, 0))
    mask = np.column_stack(masks) if masks else np.empty((n, 0), dtype=bool)
    table = FeatureTable(tuple(metas), values, mask, tuple(record_ids))
    n_onehot = sum(m.source is not None for m in metas)
    if n_onehot:
        logger.info("expanded nominal features into %d one-hot indicators", n_onehot)
    return table


@dataclass(frozen=True)
class NormalizedView:
    """Std-normalized, jittered copy of a FeatureTable.

    ``jittered`` equals ``normalized`` except at entries whose value occurred
    more than once in their column; those received a uniform offset in
    ``(0, jitter_scale]``.
    """

    base: FeatureTable
    scale: np.ndarray
    constant: np.ndarray
    jitter_seed: int
    jitter_scale: float
    normalized: np.ndarray
    jittered: np.ndarray

    @property
    def n_records(self):
        return self.base.n_records

    @property
    def present(self):
        return self.base.present

    def admissible(self):
        """Feature indices usable in candidate tuples: input role, non-constant."""
        return [j for j in self.base.input_indices() if not self.constant[j]]


def _jitter_column(x, rng, jitter_scale):
    """Break exact ties in ``x`` (1-D, no NaN) by positive offsets."""
    uniq, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    dup = counts[inverse] > 1
    if not dup.any():
        return x
    cap = jitter_scale
    if len(uniq) > 1:
        # offsets stay below half the smallest gap, so distinct values keep their order
        cap = min(cap, float(np.min(np.diff(uniq))) / 2.0)
    out = x.copy()
    todo = np.flatnonzero(dup)
    while todo.size:
        out[todo] = x[todo] + cap * (1.0 - rng.random(todo.size))
        _, inv, cnt = np.unique(out, return_inverse=True, return_counts=True)
        clash = cnt[inv] > 1
        todo = np.flatnonzero(clash & dup)
    return out


def normalize_and_jitter(table: FeatureTable, seed: int, jitter_scale: float = 1e-6) -> NormalizedView:
    """Divide each feature by its std over present values, then break ties.

    Features with fewer than two distinct present values are flagged
    ``constant`` and keep scale 1; they are never admissible.
    """
    if not jitter_scale > 0:
        raise ValueError("jitter_scale must be positive")
    rng = np.random.default_rng(seed)
    n, d = table.values.shape
    scale = np.ones(d)
    constant = np.zeros(d, dtype=bool)
    normalized = np.full((n, d), np.nan)
    jittered = np.full((n, d), np.nan)
    for j in range(d):
        rows = table.present[:, j]
        x = table.values[rows, j]
        if x.size == 0 or np.unique(x).size < 2:
            constant[j] = True
        else:
            scale[j] = float(np.std(x))
        z = x / scale[j]
        normalized[rows, j] = z
        jittered[rows, j] = _jitter_column(z, rng, jitter_scale) if z.size else z
    if constant.any():
        logger.info("%d constant features excluded from candidacy", int(constant.sum()))
    return NormalizedView(
        base=table,
        scale=_frozen(scale),
        constant=_frozen(constant),
        jitter_seed=int(seed),
        jitter_scale=float(jitter_scale),
        normalized=_frozen(normalized),
        jittered=_frozen(jittered),
    )


def jensen_shannon(p, q) -> float:
    """Base-2 Jensen-Shannon divergence between two probability vectors."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError("p and q must be 1-D vectors of equal length")
    if (p < 0).any() or (q < 0).any():
        raise ValueError("probabilities must be non-negative")
    if abs(p.sum() - 1.0) > 1e-9 or abs(q.sum() - 1.0) > 1e-9:
        raise ValueError("probability vectors must sum to 1")
    s = p + q

    def kl_to_mid(a):
        # a * log2(a / m) with m = s / 2, written to avoid underflow of m
        nz = a > 0
        return float(np.sum(a[nz] * np.log2(2.0 * a[nz] / s[nz])))

    return float(np.clip(0.5 * kl_to_mid(p) + 0.5 * kl_to_mid(q), 0.0, 1.0))


def class_distribution(labels, n_leaves) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    counts = np.bincount(labels, minlength=n_leaves).astype(float)
    return counts / counts.sum()


@dataclass(frozen=True)
class SubsetSpec:
    class_distribution_full: np.ndarray
    min_support: int = 100
    max_jsd: float = 0.06

    def __post_init__(self):
        if not 0.0 <= self.max_jsd <= 1.0:
            raise ValueError("max_jsd is a base-2 JSD and must lie in [0, 1]")
        object.__setattr__(self, "class_distribution_full",
                           _frozen(np.asarray(self.class_distribution_full, dtype=float)))

    @classmethod
    def from_labels(cls, labels, n_leaves, min_support=100, max_jsd=0.06):
        return cls(class_distribution(labels, n_leaves), min_support, max_jsd)

    @property
    def n_leaves(self):
        return len(self.class_distribution_full)


@dataclass
class TupleCandidate:
    features: tuple
    support: np.ndarray
    jsd: float
    delta_w: Optional[float] = None

    @property
    def size(self):
        return len(self.features)


def complete_cases(present, features, exclude=None) -> np.ndarray:
    """Indices of records present in every feature of ``features``."""
    rows = present[:, list(features)].all(axis=1)
    if exclude is not None:
        rows = rows.copy()
        rows[np.atleast_1d(exclude)] = False
    return np.flatnonzero(rows)


def make_candidate(view: NormalizedView, features: Sequence[int], spec: SubsetSpec, labels,
                   exclude=None) -> TupleCandidate:
    """Materialize the complete-case support of a feature tuple.

    ``exclude`` removes records (e.g. a held-out record) from the support.

    Raises
    ------
    CandidateRejected
        If the support is smaller than ``spec.min_support`` or its class
        histogram diverges from the full distribution by more than ``spec.max_jsd``.
    """
    feats = tuple(sorted(set(int(f) for f in features)))
    if not feats:
        raise ValueError("empty feature set")
    admissible = set(view.admissible())
    bad = [f for f in feats if f not in admissible]
    if bad:
        raise ValueError(f"features {bad} are output-role or constant")
    support = complete_cases(view.present, feats, exclude)
    if support.size < spec.min_support or support.size == 0:
        raise CandidateRejected("support", feats, int(support.size), spec=spec)
    labels = np.asarray(labels, dtype=int)
    hist = class_distribution(labels[support], spec.n_leaves)
    jsd = jensen_shannon(hist, spec.class_distribution_full)
    if jsd > spec.max_jsd:
        raise CandidateRejected("jsd", feats, int(support.size), jsd, spec=spec)
    return TupleCandidate(feats, support, jsd)
