"""Command-line front end: select, predict, usage, pairwise, sweep-seeds, baseline."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import CandidateRejected, SubsetSpec, TableError, load_table, make_candidate, normalize_and_jitter
from .knn import (KnnConfig, level_accuracies, pairwise_feature_analysis, prior_corrected_knn,
                  random_neighbor_baseline, summarize_levels)
from .search import (BeamConfig, InfeasibleError, beam_search, patient_specific_tuples,
                     random_tuple_baseline, seed_stability_sweep, usage_statistic)
from .tree import labels_from_rules, load_tree, severity_tree

SCHEMA_VERSION = 1
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3

log = logging.getLogger("wiiselect")


def _write_json(path: Path, obj):
    obj = {"schema_version": SCHEMA_VERSION, **obj}
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _floats(a):
    return [None if np.isnan(x) else float(x) for x in np.asarray(a, dtype=float)]


class Run:
    """Inputs shared by every subcommand, loaded once from the parsed flags."""

    def __init__(self, args):
        self.args = args
        self.table = load_table(args.data, args.meta)
        self.tree = load_tree(args.tree) if args.tree else severity_tree()
        if args.labels:
            col = self.table.column(args.labels)
            if np.isnan(col).any():
                raise TableError(f"label column {args.labels!r} has missing values")
            if np.any(col != np.round(col)):
                raise TableError(f"label column {args.labels!r} must hold integer leaf indices")
            self.labels = self.tree.check_labels(col.astype(int))
        else:
            self.labels = labels_from_rules(self.table, self.tree)
        self.view = normalize_and_jitter(self.table, args.seed, args.jitter_scale)
        self.names = self.table.names
        self.beam = BeamConfig(beam_width=args.beam_width, max_tuple_size=args.max_tuple_size,
                               min_support=args.min_support, max_jsd=args.max_jsd,
                               top_k_report=args.top, n_jobs=args.threads)
        self.knn = KnnConfig(k=args.k)
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)

    def spec(self):
        return SubsetSpec.from_labels(self.labels, self.tree.n_leaves, self.args.min_support,
                                      self.args.max_jsd)

    def feature_ids(self, names):
        return [self.table.index(n.strip()) for n in names]

    def manifest(self):
        config = {k: v for k, v in sorted(vars(self.args).items()) if k not in ("func", "verbose", "threads")}
        _write_json(self.out / "manifest.json", {"version": __version__, "config": config})


def _levels_rows(levels_by_name):
    names = list(levels_by_name)
    n = len(next(iter(levels_by_name.values())))
    return [[L] + [levels_by_name[k][L] for k in names] for L in range(n)]


def cmd_select(run: Run):
    curve = beam_search(run.view, run.tree, run.labels, run.beam)
    d = curve.to_dict(run.names)
    _write_json(run.out / "curve.json", d)
    rows = []
    for n in curve.sizes:
        for rank, c in enumerate(curve.levels[n], 1):
            rows.append([n, rank, c.delta_w, len(c.support), c.jsd, ";".join(run.names[f] for f in c.features)])
    _write_csv(run.out / "best_tuples.csv", ["size", "rank", "delta_w", "support", "jsd", "features"], rows)
    _write_csv(run.out / "curve.csv", ["size", "best_delta_w"],
               [[n, s] for n, s in zip(curve.sizes, curve.best_scores)])
    run.manifest()
    best = curve.best()
    print(f"optimal tuple size: {curve.optimal_n}")
    print(f"best tuple (delta_w={best.delta_w:.4f}, support={len(best.support)}): "
          + ", ".join(run.names[f] for f in best.features))
    return 0


def cmd_predict(run: Run):
    spec = run.spec()
    reports, per_record, tuples = [], [], []
    for t, raw in enumerate(run.args.tuple):
        feats = run.feature_ids(raw.split(","))
        cand = make_candidate(run.view, feats, spec, run.labels)
        rep = prior_corrected_knn(run.view, cand, run.labels, run.tree, run.knn)
        reports.append(rep)
        lv = level_accuracies(rep)
        tuples.append({"features": [run.names[f] for f in cand.features], "support": int(len(cand.support)),
                       "jsd": cand.jsd, "levels": _floats(lv["overall"]),
                       "minority_levels": _floats(lv["minority"])})
        ids = run.table.record_ids
        per_record += [[t, ids[r], int(a), int(b), int(d)]
                       for r, a, b, d in zip(rep.records, rep.true, rep.predicted, rep.distance)]
    s = summarize_levels(reports)
    _write_json(run.out / "report.json", {
        "k": run.knn.k,
        "tuples": tuples,
        "mean_levels": _floats(s["overall_mean"]), "std_levels": _floats(s["overall_std"]),
        "mean_minority_levels": _floats(s["minority_mean"]),
        "std_minority_levels": _floats(s["minority_std"]),
    })
    _write_csv(run.out / "per_record.csv", ["tuple", "id", "true", "predicted", "distance"], per_record)
    _write_csv(run.out / "levels.csv", ["level", "overall", "overall_std", "minority", "minority_std"],
               _levels_rows({"o": _floats(s["overall_mean"]), "os": _floats(s["overall_std"]),
                             "m": _floats(s["minority_mean"]), "ms": _floats(s["minority_std"])}))
    cdf = [["overall", L, v] for L, v in enumerate(_floats(s["overall_mean"]))]
    cdf += [["minority", L, v] for L, v in enumerate(_floats(s["minority_mean"]))]
    _write_csv(run.out / "cdf.csv", ["curve", "level", "accuracy"], cdf)
    run.manifest()
    print("level accuracies: " + " ".join(f"{L}:{v:.3f}" for L, v in enumerate(s["overall_mean"])))
    return 0


def cmd_usage(run: Run):
    tuples = patient_specific_tuples(run.view, run.tree, run.labels, run.beam,
                                     epsilon_flat=run.args.epsilon_flat)
    stats = usage_statistic(tuples, run.table, run.view.admissible())
    rows = stats.rows()
    _write_json(run.out / "usage.json", {"n_records_with_tuple": len(tuples), "features": rows})
    _write_csv(run.out / "usage.csv", ["feature", "usage", "n_selected", "n_available"],
               [[r["feature"], r["usage"], r["n_selected"], r["n_available"]] for r in rows])
    ids = run.table.record_ids
    _write_csv(run.out / "patient_tuples.csv", ["id", "delta_w", "support", "features"],
               [[ids[r], c.delta_w, len(c.support), ";".join(run.names[f] for f in c.features)]
                for r, c in sorted(tuples.items())])
    run.manifest()
    for r in rows[:10]:
        print(f"{r['feature']}: U_f={r['usage']:.3f} ({r['n_selected']}/{r['n_available']})")
    return 0


def cmd_pairwise(run: Run):
    if run.args.features:
        feats = run.feature_ids(run.args.features.split(","))
    else:
        feats = [j for j in run.view.admissible() if run.table.metas[j].kind == "numeric"]
    rows, skipped = pairwise_feature_analysis(run.view, feats, run.args.min_overlap,
                                              run.args.asymmetry)
    n = run.names
    out = [{"a": n[r.a], "b": n[r.b], "delta_ab": r.delta_ab, "delta_ba": r.delta_ba,
            "pearson": r.pearson, "spearman": r.spearman, "n_shared": r.n_shared,
            "asymmetric": r.asymmetric(run.args.asymmetry)} for r in rows]
    _write_json(run.out / "pairwise.json", {
        "pairs": out, "skipped": [{"a": n[a], "b": n[b], "reason": why} for a, b, why in skipped]})
    _write_csv(run.out / "pairwise.csv", list(out[0]) if out else ["a", "b"],
               [list(o.values()) for o in out])
    run.manifest()
    for o in out[: run.args.top]:
        flag = " *asymmetric*" if o["asymmetric"] else ""
        print(f"{o['a']} -> {o['b']}: {o['delta_ab']:.3f} / {o['delta_ba']:.3f}  r={o['pearson']:.3f}{flag}")
    return 0


def cmd_sweep(run: Run):
    seeds = [run.args.seed + i for i in range(run.args.n_seeds)]
    table, scale = run.table, run.args.jitter_scale
    sweep = seed_stability_sweep(lambda s: normalize_and_jitter(table, s, scale), run.tree, run.labels,
                                 run.beam, seeds)
    sizes = []
    for size in sweep.sizes:
        modal, freq = sweep.modal_tuple(size)
        sizes.append({
            "size": size,
            "best_delta_w": _floats(sweep.scores(size)),
            "std": sweep.score_std()[size],
            "modal_tuple": [run.names[f] for f in modal],
            "modal_fraction": freq,
            "membership": {run.names[f]: v for f, v in sweep.membership(size).items()},
        })
    _write_json(run.out / "sweep.json", {"seeds": seeds, "sizes": sizes})
    run.manifest()
    for s in sizes:
        print(f"size {s['size']}: std={s['std']:.2e} modal fraction={s['modal_fraction']:.2f}")
    return 0


def cmd_baseline(run: Run):
    a = run.args
    top = random_tuple_baseline(run.view, run.tree, run.labels, a.size, a.n_draws, a.seed, run.beam)
    rand_reports = [prior_corrected_knn(run.view, c, run.labels, run.tree, run.knn) for c in top]
    nn_reports = random_neighbor_baseline(run.labels, run.tree, a.seed, a.reps, k=run.knn.k)
    r1, r2 = summarize_levels(rand_reports) if rand_reports else None, summarize_levels(nn_reports)
    out = {
        "random_tuples": [{"features": [run.names[f] for f in c.features], "delta_w": c.delta_w,
                           "support": int(len(c.support))} for c in top],
        "random_neighbors": {"reps": a.reps, "mean_levels": _floats(r2["overall_mean"]),
                             "std_levels": _floats(r2["overall_std"])},
    }
    cdf = [["random_neighbors", L, v] for L, v in enumerate(_floats(r2["overall_mean"]))]
    if r1 is not None:
        out["random_tuple_levels"] = {"mean_levels": _floats(r1["overall_mean"]),
                                      "std_levels": _floats(r1["overall_std"])}
        cdf = [["random_tuples", L, v] for L, v in enumerate(_floats(r1["overall_mean"]))] + cdf
    _write_json(run.out / "baseline.json", out)
    _write_csv(run.out / "baseline_cdf.csv", ["curve", "level", "accuracy"], cdf)
    run.manifest()
    if top:
        print(f"best random {a.size}-tuple delta_w={top[0].delta_w:.4f}")
    return 0


def _common(p):
    p.add_argument("--data", required=True, help="data CSV (first column = record id)")
    p.add_argument("--meta", required=True, help="metadata CSV with name,kind,role")
    p.add_argument("--tree", help="tree preset JSON (default: shipped severity tree)")
    p.add_argument("--labels", help="column holding leaf indices (default: tree rules)")
    p.add_argument("--seed", type=int, default=int(os.getenv("RUN_SEED", 0)),
                   help="jitter/draw seed (CLI > env:RUN_SEED > 0)")
    p.add_argument("--jitter-scale", type=float, default=1e-6)
    p.add_argument("--beam-width", type=int, default=55)
    p.add_argument("--max-tuple-size", type=int, default=20)
    p.add_argument("--min-support", type=int, default=100)
    p.add_argument("--max-jsd", type=float, default=0.06)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--top", type=int, default=10, help="tuples reported per size")
    p.add_argument("--out", default="out")
    p.add_argument("--threads", type=int, default=1, help="worker threads; never changes results")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="wiiselect", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select", help="beam search and tuple-size curve")
    _common(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("predict", help="prior-corrected LOO k-NN on given tuples")
    _common(p)
    p.add_argument("--tuple", action="append", required=True,
                   help="comma-separated feature names; repeat to average several tuples")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("usage", help="patient-specific tuples and usage-when-available")
    _common(p)
    p.add_argument("--epsilon-flat", type=float, default=1e-3)
    p.set_defaults(func=cmd_usage)

    p = sub.add_parser("pairwise", help="feature-to-feature imbalance vs correlation")
    _common(p)
    p.add_argument("--features", help="comma-separated names (default: numeric inputs)")
    p.add_argument("--min-overlap", type=int, default=100)
    p.add_argument("--asymmetry", type=float, default=0.1)
    p.set_defaults(func=cmd_pairwise)

    p = sub.add_parser("sweep-seeds", help="repeat selection under different jitter seeds")
    _common(p)
    p.add_argument("--n-seeds", type=int, default=10)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("baseline", help="random-tuple and random-neighbor baselines")
    _common(p)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--n-draws", type=int, default=1000)
    p.add_argument("--reps", type=int, default=10)
    p.set_defaults(func=cmd_baseline)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run = Run(args)
        return args.func(run)
    except (CandidateRejected, InfeasibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (TableError, KeyError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
