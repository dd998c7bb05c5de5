"""Command-line pipeline: simulate, fit, score, tree, report.

The pipeline is file-mediated so one expensive fit can back many
measure/cutoff experiments. Every command writes a manifest.json
(resolved parameters, input hashes, library versions) alongside its
outputs, and all file writes go through a temp-file rename so partial
outputs never appear. Exit codes: 0 success, 1 error, 2 success with
warnings.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys

import numpy as np
import scipy

import extrapolmv
from extrapolmv.cart import TreeParams, export_tree, grow_tree, import_tree, tree_splits
from extrapolmv.dataset import (
    IngestConfig,
    SynthSpec,
    TransformSpec,
    apply_transforms,
    load_csv,
    synthesize,
    write_csv,
)
from extrapolmv.extrapolation import (
    measure_column,
    score_locations,
    write_plotdata_csv,
    write_scores_csv,
)
from extrapolmv.sampler import (
    ModelSpec,
    convergence_summary,
    gibbs_fit,
    load_fit,
    save_fit,
)

THREADS_ENV = "EXTRAPOLMV_THREADS"
RHAT_WARN = 1.1


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad arguments by default; 2 means
    # success-with-warnings here, so remap to 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _sha256_json(obj) -> str:
    return hashlib.sha256(
        json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _atomic_write_text(path, text: str) -> None:
    tmp = str(path) + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_manifest(outdir, command: str, params: dict, **hashes) -> None:
    manifest = {
        "command": command,
        "params": params,
        "seed": params.get("seed"),
        "versions": {
            "extrapolmv": extrapolmv.__version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": ".".join(map(str, sys.version_info[:3])),
        },
    }
    manifest.update(hashes)
    _atomic_write_text(os.path.join(outdir, "manifest.json"),
                       json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _load_transformed(data_path, config: IngestConfig):
    """Load a CSV and apply the transforms the config explicitly names."""
    if config.transforms is None:
        raise CliError(
            "ingestion config must set 'transforms' explicitly (for example "
            '{"responses": "none", "standardize": true}); silent defaults are '
            "not applied")
    d = load_csv(data_path, config)
    t = TransformSpec.from_config(config.transforms, d.response_names,
                                  d.covariate_names)
    return apply_transforms(d, t), t


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


def _cmd_fit(args) -> int:
    config = IngestConfig.from_json(args.config)
    d, t = _load_transformed(args.data, config)
    spec = ModelSpec(iterations=args.iters, burn_in=args.burnin, thin=args.thin,
                     chains=args.chains, seed=args.seed,
                     coef_prior_var=args.prior_var)
    draws = gibbs_fit(d, spec, threads=args.threads)
    conv = convergence_summary(draws)

    os.makedirs(args.out, exist_ok=True)
    dataset_hash = _sha256_file(args.data)
    save_fit(draws, args.out, binary_cache=args.cache, extra_meta={
        "dataset_hash": dataset_hash,
        "ingest_config": config.to_jsonable(),
        "transform_constants": {
            "centers": None if t.centers is None else t.centers.tolist(),
            "scales": None if t.scales is None else t.scales.tolist(),
        },
        "convergence": conv.to_jsonable(),
    })
    params = {"data": str(args.data), "config": str(args.config),
              "iters": args.iters, "burnin": args.burnin, "thin": args.thin,
              "chains": args.chains, "seed": args.seed,
              "prior_var": args.prior_var, "threads": args.threads,
              "cache": bool(args.cache)}
    _write_manifest(args.out, "fit", params,
                    dataset_hash=dataset_hash,
                    config_hash=_sha256_json(config.to_jsonable()))
    if conv.max_rhat > RHAT_WARN:
        print(f"warning: max split-R-hat {conv.max_rhat:.3f} exceeds "
              f"{RHAT_WARN}; chains may not have converged", file=sys.stderr)
        return 2
    return 0


# ---------------------------------------------------------------------------
# score
# ---------------------------------------------------------------------------


def _cmd_score(args) -> int:
    draws, meta = load_fit(args.draws)
    dataset_hash = _sha256_file(args.data)
    recorded = meta.get("dataset_hash")
    if recorded and recorded != dataset_hash and not args.force:
        raise CliError(
            f"dataset hash {dataset_hash[:12]} does not match the hash the "
            f"draws were fitted on ({recorded[:12]}); pass --force to override")

    if args.config:
        config = IngestConfig.from_json(args.config)
    elif meta.get("ingest_config"):
        config = IngestConfig(**meta["ingest_config"])
    else:
        raise CliError("no ingestion config: pass --config or use a fit "
                       "directory whose meta records one")
    d, _t = _load_transformed(args.data, config)

    measures = args.measure or ["det", "trace"]
    cutoffs = [tok.strip() for tok in args.cutoffs.split(",") if tok.strip()]
    report = score_locations(draws, d, measures=measures, cutoffs=cutoffs)

    os.makedirs(args.out, exist_ok=True)
    scores_path = os.path.join(args.out, "scores.csv")
    plot_path = os.path.join(args.out, "plotdata.csv")
    write_scores_csv(report, scores_path + ".tmp")
    os.replace(scores_path + ".tmp", scores_path)
    write_plotdata_csv(report, plot_path + ".tmp")
    os.replace(plot_path + ".tmp", plot_path)

    params = {"draws": str(args.draws), "data": str(args.data),
              "measures": list(measures), "cutoffs": cutoffs,
              "force": bool(args.force)}
    _write_manifest(args.out, "score", params,
                    dataset_hash=dataset_hash,
                    config_hash=_sha256_json(config.to_jsonable()),
                    ingest_config=config.to_jsonable())
    return 0


# ---------------------------------------------------------------------------
# tree
# ---------------------------------------------------------------------------


def _read_scores_column(path, column: str) -> dict[str, int]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if column not in header:
            raise CliError(f"label column {column!r} not present in {path}")
        id_i = header.index("id")
        col_i = header.index(column)
        out = {}
        for row in reader:
            out[row[id_i]] = int(float(row[col_i]))
    return out


def _cmd_tree(args) -> int:
    scores_path = args.scores
    scores_dir = None
    if os.path.isdir(scores_path):
        scores_dir = scores_path
        scores_path = os.path.join(scores_path, "scores.csv")
    labels_by_id = _read_scores_column(scores_path, args.label)

    if args.config:
        config = IngestConfig.from_json(args.config)
    else:
        manifest_path = scores_dir and os.path.join(scores_dir, "manifest.json")
        if manifest_path and os.path.exists(manifest_path):
            with open(manifest_path, encoding="utf-8") as fh:
                stored = json.load(fh).get("ingest_config")
            if not stored:
                raise CliError("scores manifest has no ingestion config; pass --config")
            config = IngestConfig(**stored)
        else:
            raise CliError("pass --config or point --scores at a score output directory")

    # raw covariates: thresholds stay in original units
    d = load_csv(args.data, config)
    try:
        labels = np.array([labels_by_id[i] for i in d.ids], dtype=int)
    except KeyError as exc:
        raise CliError(f"scores file has no row for id {exc.args[0]!r}") from None

    os.makedirs(args.out, exist_ok=True)
    params = TreeParams(max_depth=args.max_depth, min_leaf=args.min_leaf,
                        min_split_gain=args.min_gain)
    if labels.min() == labels.max():
        print(f"warning: label column {args.label!r} is constant; "
              "emitting a single-leaf tree", file=sys.stderr)
    tree = grow_tree(d.X[:, 1:], labels, params,
                     feature_names=d.covariate_names[1:])
    _atomic_write_text(os.path.join(args.out, "tree.json"),
                       export_tree(tree, "json"))
    _atomic_write_text(os.path.join(args.out, "tree.txt"),
                       export_tree(tree, "text"))
    _write_manifest(args.out, "tree",
                    {"scores": str(args.scores), "data": str(args.data),
                     "label": args.label, "max_depth": args.max_depth,
                     "min_leaf": args.min_leaf, "min_gain": args.min_gain},
                    dataset_hash=_sha256_file(args.data),
                    config_hash=_sha256_json(config.to_jsonable()))
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _cmd_simulate(args) -> int:
    gen = SynthSpec.from_json(args.spec)
    d, truth = synthesize(gen, args.seed)
    os.makedirs(args.out, exist_ok=True)

    config = IngestConfig(
        id_col="id",
        covariates=d.covariate_names[1:],
        responses=d.response_names,
        lon_col="lon" if d.coords is not None else None,
        lat_col="lat" if d.coords is not None else None,
        transforms={"responses": "none", "standardize": True},
    )
    data_path = os.path.join(args.out, "dataset.csv")
    write_csv(d, data_path + ".tmp", config)
    os.replace(data_path + ".tmp", data_path)
    _atomic_write_text(os.path.join(args.out, "truth.json"),
                       json.dumps(truth, indent=1, sort_keys=True) + "\n")
    _atomic_write_text(os.path.join(args.out, "config.json"),
                       json.dumps(config.to_jsonable(), indent=1, sort_keys=True) + "\n")
    _write_manifest(args.out, "simulate",
                    {"spec": str(args.spec), "seed": args.seed},
                    dataset_hash=_sha256_file(data_path))
    return 0


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def _cmd_report(args) -> int:
    scores_path = args.scores
    scores_dir = None
    if os.path.isdir(scores_path):
        scores_dir = scores_path
        scores_path = os.path.join(scores_path, "scores.csv")
    with open(scores_path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    status_i = header.index("status")
    e_cols = [(name[2:], i) for i, name in enumerate(header) if name.startswith("e_")]
    k_cols = {name[2:]: i for i, name in enumerate(header) if name.startswith("k_")}
    measure_cols = [name for name in header
                    if name.startswith(("mvpv_", "cmvpv_"))]

    primary = None
    manifest_path = scores_dir and os.path.join(scores_dir, "manifest.json")
    if manifest_path and os.path.exists(manifest_path):
        with open(manifest_path, encoding="utf-8") as fh:
            stored = json.load(fh).get("params", {}).get("measures")
        if stored:
            primary = measure_column(stored[0])

    lines = ["# Extrapolation report", ""]
    lines.append(f"Locations scored: {len(rows)}")
    if measure_cols:
        lines.append(f"Measures: {', '.join(measure_cols)}")
    if primary:
        lines.append(f"Cutoff columns follow the primary measure: {primary}")
    lines += ["", "## Flag counts per cutoff", "",
              "| cutoff | cutoff value | flagged | flagged out-of-sample |",
              "|---|---|---|---|"]
    for name, i in e_cols:
        flagged = sum(int(float(r[i])) for r in rows)
        flagged_oos = sum(int(float(r[i])) for r in rows if r[status_i] != "full")
        k = rows[0][k_cols[name]] if rows and name in k_cols else ""
        lines.append(f"| {name} | {k} | {flagged} | {flagged_oos} |")

    tree_path = args.tree
    if tree_path and os.path.isdir(tree_path):
        tree_path = os.path.join(tree_path, "tree.json")
    if tree_path and os.path.exists(tree_path):
        with open(tree_path, encoding="utf-8") as fh:
            tree = import_tree(fh.read())
        lines += ["", "## Top tree splits", ""]
        splits = tree_splits(tree, max_depth=2)
        if splits:
            for feature, threshold, depth in splits:
                lines.append(f"- level {depth}: `{feature}` at threshold {threshold!r}")
        else:
            lines.append("- single leaf (no splits)")

    os.makedirs(args.out, exist_ok=True)
    _atomic_write_text(os.path.join(args.out, "report.md"),
                       "\n".join(lines) + "\n")
    _write_manifest(args.out, "report",
                    {"scores": str(args.scores), "tree": args.tree and str(args.tree)})
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="extrapolmv",
                     description="Predictive-variance extrapolation detection "
                                 "for multivariate-response regression")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[], help="fit the joint model by Gibbs sampling")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True, help="ingestion config JSON")
    p.add_argument("--iters", type=int, default=20000)
    p.add_argument("--burnin", type=int, default=10000)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--chains", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--prior-var", type=float, default=100.0)
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--cache", action="store_true",
                   help="also write a compact binary draws cache (draws.npz)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("score", help="compute measures, cutoffs and flags")
    p.add_argument("--draws", required=True, help="fit output directory")
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--measure", action="append",
                   help="trace, det or cmvpv:<response>; repeatable "
                        "(default: det trace; the first is primary)")
    p.add_argument("--cutoffs", default="max,lev,q99,q95",
                   help="comma list of max, lev, q99, q95 or q:<r>")
    p.add_argument("--force", action="store_true",
                   help="score even if the dataset hash does not match the fit")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("tree", help="characterize flags with a classification tree")
    p.add_argument("--scores", required=True, help="score output directory or scores.csv")
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--label", default="e_q95")
    p.add_argument("--max-depth", type=int, default=5)
    p.add_argument("--min-leaf", type=int, default=20)
    p.add_argument("--min-gain", type=float, default=1e-4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_tree)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("--spec", required=True, help="generator spec JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("report", help="summarize scores (and tree) as markdown")
    p.add_argument("--scores", required=True)
    p.add_argument("--tree", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, np.linalg.LinAlgError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
