"""Command-line interface: analyze, generate, simulate, validate, serve.

Exit codes: 0 success, 1 validation findings, 2 errors (bad flags, bad input).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import analytics, cohortgen, exports, syncsim
from .api import DATA_DIR_ENV, GatewayConfig, create_app
from .engine import canonical_json
from .errors import SentinelError
from .schema import (Dataset, FeatureSchema, default_schema, labels_from_csv,
                     normalize_matrix, records_from_csv, records_to_csv,
                     validate_dataset)


def _load_schema(path: str | None) -> FeatureSchema:
    return FeatureSchema.load(path) if path else default_schema()


def _load_dataset(data_path: str, schema: FeatureSchema,
                  incidents_path: str | None = None) -> Dataset:
    records = records_from_csv(Path(data_path).read_text(), schema)
    labels = (labels_from_csv(Path(incidents_path).read_text())
              if incidents_path else [])
    return Dataset(schema=schema, records=records, labels=labels)


def cmd_validate(args) -> int:
    schema = _load_schema(args.schema)
    dataset = _load_dataset(args.data, schema, args.incidents)
    report = validate_dataset(dataset)
    print(report.summary())
    return 0 if report.ok else 1


def cmd_generate(args) -> int:
    if args.config:
        config = cohortgen.GenConfig.load(args.config)
        if args.seed is not None:
            import dataclasses
            config = dataclasses.replace(config, seed=args.seed)
    else:
        config = cohortgen.default_calibrated_config(
            n_records=args.n,
            seed=args.seed if args.seed is not None else cohortgen.DEFAULT_SEED)
    dataset = cohortgen.generate(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "survey.csv").write_text(
        records_to_csv(dataset.records, dataset.schema))
    config.save(out / "genconfig.json")
    dataset.schema.save(out / "schema.json")
    rep = cohortgen.measure(dataset)
    (out / "measure.json").write_text(
        json.dumps(rep.to_json(), indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(dataset.records)} records to {out / 'survey.csv'}")
    print(json.dumps(rep.to_json(), indent=2, sort_keys=True))
    return 0


def cmd_analyze(args) -> int:
    schema = _load_schema(args.schema)
    dataset = _load_dataset(args.data, schema)
    report = validate_dataset(dataset)
    flagged = set(report.flagged_record_indices)
    records = [r for i, r in enumerate(dataset.records) if i not in flagged]
    if len(records) < 3:
        print("not enough valid records to analyze", file=sys.stderr)
        return 2
    clean = Dataset(schema=schema, records=records)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    X = normalize_matrix(records, schema)
    fit = analytics.pca(X)
    k85 = analytics.min_components_for(0.85, fit) if not fit.degenerate else 0
    pca_info = {
        "n_records": len(records), "n_flagged": len(flagged),
        "explained_variance_ratio":
            [float(v) for v in fit.explained_variance_ratio],
        "first_pc_evr": float(fit.explained_variance_ratio[0]),
        "components_for_85": k85,
        "degenerate": fit.degenerate,
    }

    k_dims = args.pca_dims if args.pca_dims else max(2, k85)
    k_dims = min(k_dims, fit.n_features)
    pts = analytics.project(X, fit, k_dims)
    tree = analytics.ward_cluster(pts)
    k_cut = max(1, min(args.clusters, len(records)))
    labels = analytics.cut_tree(tree, k_cut)
    (out / "dendrogram.svg").write_text(exports.dendrogram_svg(
        tree, [r.subject_id for r in records]))
    (out / "merges.txt").write_text(exports.merge_list_text(tree))
    (out / "clusters.csv").write_text(exports.cluster_assignments_csv(
        [r.subject_id for r in records], pts, labels))

    stats = analytics.similarity_stats(clean)
    (out / "similarity_hist.csv").write_text(
        exports.similarity_histogram_csv(stats))
    (out / "similarity_hist.svg").write_text(
        exports.similarity_histogram_svg(stats))

    corr = analytics.correlation_report(clean, tau=args.tau)
    (out / "correlogram.svg").write_text(exports.correlogram_svg(corr))
    (out / "correlation_graph.dot").write_text(
        exports.correlation_graph_dot(corr))

    summary = {
        "pca": pca_info,
        "clustering": {"pca_dims": k_dims, "clusters": k_cut,
                       "merges": len(tree.merges)},
        "similarity": {
            "duplicate_partner_fraction": stats.duplicate_partner_fraction,
            "low_similarity_pair_fraction_070":
                stats.low_similarity_pair_fraction(0.70)},
        "correlation": {"tau": args.tau,
                        "positive_edges": len(corr.positive_edges),
                        "constant_features": corr.constant_features},
        "artifacts": sorted(p.name for p in out.iterdir()),
    }
    (out / "report.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary["pca"] | summary["similarity"],
                     indent=2, sort_keys=True))
    print(f"artifacts in {out}")
    return 0


def cmd_simulate(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        obj = json.load(fh)
    config = syncsim.SimConfig.from_json(obj)
    if args.seed is not None:
        obj["seed"] = args.seed
        config = syncsim.SimConfig.from_json(obj)
    report = syncsim.run(config)
    report.save(args.out)
    print(f"simulated {len(report.trace)} events, "
          f"{len(report.agents)} agents -> {args.out}")
    print(canonical_json(report.conservation))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    config = GatewayConfig.from_env(
        data_dir=args.data_dir,
        schema=_load_schema(args.schema),
        base_seed=args.seed)
    if args.model:
        config.model_file = Path(args.model)
    app = create_app(config)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sentinel",
        description="Adaptive vulnerability scoring and survey analytics")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a survey CSV against a schema")
    p.add_argument("--data", required=True)
    p.add_argument("--schema")
    p.add_argument("--incidents")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("generate", help="draw a synthetic survey cohort")
    p.add_argument("--config", help="generator config JSON")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("analyze",
                       help="PCA, clustering, similarity and correlation "
                            "reports with SVG/DOT/CSV exports")
    p.add_argument("--data", required=True)
    p.add_argument("--schema")
    p.add_argument("--clusters", type=int, default=7)
    p.add_argument("--pca-dims", type=int, default=None,
                   help="projection dims (default: components for 85%% EVR)")
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="run the multi-agent sync simulation")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("serve", help="run the gateway API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8700)
    p.add_argument("--data-dir", default=None,
                   help=f"persistence root (default ${DATA_DIR_ENV})")
    p.add_argument("--schema")
    p.add_argument("--model", help="model bundle JSON for new agents")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SentinelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
