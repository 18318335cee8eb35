"""patlas command-line interface.

Subcommands mirror the pipeline stages (ingest, cluster, cluster-curve,
cluster-sensitivity, keywords, resolve, credits, portfolio, transactions),
plus `run` for the whole pipeline and `synth` for seeded synthetic corpora.
PATLAS_THREADS caps worker threads; PATLAS_BACKEND selects the kernel
backend. Failures print the failing stage and exit with code 2.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import __version__, coclus, entity, synth, topics
from . import transactions as transactions_mod
from .errors import PatlasError, StageError
from .ingest import filter_and_build_matrix, load_corpus, merge_applications, \
    parse_records, save_corpus
from .pipeline import PipelineConfig, csv_bytes, json_bytes, read_csv_rows, \
    run_pipeline, write_portfolio_reports, _Bundle


def _meta(args: argparse.Namespace) -> str:
    payload = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode())
    return f"patlas={__version__} config={digest.hexdigest()[:16]}"


def _load_clusters(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _clustering_from_doc(doc: dict) -> coclus.CoClustering:
    import numpy as np

    rows = doc["rows"]
    cols = doc["cols"]
    row_labels = tuple(sorted(rows))
    col_labels = tuple(sorted(cols))
    return coclus.CoClustering(
        g=int(doc["g"]),
        row_assignment=np.array([rows[k] for k in row_labels], dtype=np.int32),
        col_assignment=np.array([cols[k] for k in col_labels], dtype=np.int32),
        modularity=float(doc["modularity"]),
        row_labels=row_labels,
        col_labels=col_labels,
    )


def _load_registry(path) -> tuple[entity.IdentityRegistry, float]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return entity.IdentityRegistry.from_json(doc), float(doc.get("match_threshold", 80.0))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_ingest(args) -> int:
    records = parse_records(args.input, args.format)
    patents = merge_applications(records)
    save_corpus(patents, args.out)
    print(f"ingested {len(records)} records -> {len(patents)} applications -> {args.out}")
    return 0


def _cmd_cluster(args) -> int:
    patents = load_corpus(args.corpus)
    matrix = filter_and_build_matrix(patents)
    clustering = coclus.fit(matrix, args.g, seed=args.seed,
                            max_iter=args.max_iter, restarts=args.restarts)
    doc = {
        "version": 1,
        "g": clustering.g,
        "modularity": clustering.modularity,
        "rows": {str(k): v for k, v in sorted(clustering.row_partition().items())},
        "cols": {str(k): v for k, v in sorted(clustering.col_partition().items())},
    }
    Path(args.out).write_bytes(json_bytes(doc, _meta(args)))
    print(f"g={clustering.g} modularity={clustering.modularity:.6f} -> {args.out}")
    return 0


def _cmd_cluster_curve(args) -> int:
    patents = load_corpus(args.corpus)
    matrix = filter_and_build_matrix(patents)
    curve = coclus.modularity_curve(matrix, range(args.g_min, args.g_max + 1),
                                    seed=args.seed, restarts=args.restarts,
                                    max_iter=args.max_iter)
    Path(args.out).write_bytes(csv_bytes(["g", "modularity"], curve.points, _meta(args)))
    print(f"curve over g in [{args.g_min}, {args.g_max}] -> {args.out}")
    return 0


def _cmd_cluster_sensitivity(args) -> int:
    patents = load_corpus(args.corpus)
    matrix = filter_and_build_matrix(patents)
    trials = coclus.sensitivity_subsample(
        matrix, args.axis, fraction=args.fraction, trials=args.trials, g=args.g,
        seed=args.seed, restarts=args.restarts, max_iter=args.max_iter)
    rows = []
    for t, trial in enumerate(trials):
        best_diag = trial.overlap_vs_full.values.max(axis=1) \
            if trial.overlap_vs_full.values.size else []
        mean_overlap = float(sum(best_diag) / len(best_diag)) if len(best_diag) else 0.0
        rows.append([t, trial.modularity, mean_overlap])
    Path(args.out).write_bytes(
        csv_bytes(["trial", "modularity", "mean_best_overlap"], rows, _meta(args)))
    print(f"{args.trials} subsample trials -> {args.out}")
    return 0


def _cmd_keywords(args) -> int:
    patents = load_corpus(args.corpus)
    clustering = _clustering_from_doc(_load_clusters(args.clusters))
    with_codes = [p for p in patents if p.ipc_subclasses]
    stop = topics.load_stopwords(args.stopwords) if args.stopwords else None
    corpus = topics.tokenize(with_codes, stop)
    rows = []
    for cluster in range(clustering.g):
        for rank, score in enumerate(
                topics.top_keywords(cluster, corpus, clustering, args.top), 1):
            rows.append([cluster, rank, score.word, score.m_in_cluster,
                         score.mu, score.sigma, score.z])
    Path(args.out).write_bytes(
        csv_bytes(["cluster", "rank", "word", "M", "mu", "sigma", "z"], rows, _meta(args)))
    print(f"top {args.top} keywords x {clustering.g} clusters -> {args.out}")
    return 0


def _cmd_resolve(args) -> int:
    patents = load_corpus(args.corpus)
    registry = entity.build_registry(patents, p0=args.p0)
    scores = entity.original_match_scores(patents)
    match_threshold = 80.0
    if scores:
        counts, edges = entity.build_score_histogram(scores)
        try:
            match_threshold = entity.otsu_threshold(counts, edges)
        except PatlasError:
            pass
    entity.match_original_names(patents, registry, match_threshold)
    doc = registry.to_json()
    doc["match_threshold"] = match_threshold
    Path(args.out).write_bytes(json_bytes(doc, _meta(args)))
    print(f"{len(registry.entities)} entities (threshold {registry.threshold:.2f}, "
          f"match {match_threshold:.2f}) -> {args.out}")
    return 0


def _cmd_credits(args) -> int:
    patents = load_corpus(args.corpus)
    registry, match_threshold = _load_registry(args.registry)
    assignments = entity.match_original_names(patents, registry, match_threshold)
    ledger = entity.allocate_credits(patents, assignments, registry)
    rows = []
    for row in sorted(ledger.rows, key=lambda r: r.application_id):
        for entity_id, credit in row.credits:
            rows.append([row.application_id, row.region, row.category, entity_id, credit])
    Path(args.out).write_bytes(csv_bytes(
        ["application_id", "region", "category", "entity_id", "credit"], rows, _meta(args)))
    print(f"{len(ledger.rows)} credited patents -> {args.out}")
    return 0


def _cmd_portfolio(args) -> int:
    patents = load_corpus(args.corpus)
    doc = _load_clusters(args.clusters)
    years = {p.application_id: p.year for p in patents}
    areas = doc["rows"]
    rows_by_app: dict[str, list] = {}
    for row in read_csv_rows(args.credits):
        rows_by_app.setdefault(row["application_id"], []).append(row)
    ledger_rows = []
    for app_id in sorted(rows_by_app):
        group = rows_by_app[app_id]
        if app_id not in years:
            raise PatlasError(f"credits reference unknown application {app_id}")
        ledger_rows.append(entity.CreditRow(
            application_id=app_id,
            year=years[app_id],
            region=group[0]["region"],
            category=group[0]["category"],
            credits=tuple((r["entity_id"], float(r["credit"])) for r in group),
            area=areas.get(app_id),
        ))
    ledger = entity.CreditLedger(tuple(ledger_rows))
    registry = entity.IdentityRegistry()
    if args.registry:
        registry, _ = _load_registry(args.registry)
    config = PipelineConfig(input=str(args.corpus), g=int(doc["g"]), bins=args.bins,
                            heatmap_bins=args.heatmap_bins, base_year=args.base_year,
                            top_k=args.top_k)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bundle = _Bundle(out_dir, config)
    write_portfolio_reports(config, bundle, ledger, registry)
    print(f"portfolio reports ({len(bundle.artifacts)} files) -> {out_dir}")
    return 0


def _cmd_transactions(args) -> int:
    patents = load_corpus(args.corpus)
    registry, match_threshold = _load_registry(args.registry)
    aliases = transactions_mod.load_aliases(args.aliases) if args.aliases else None
    events = transactions_mod.collect_events(patents, registry, match_threshold, aliases)
    if args.credits:
        categories = {row["application_id"]: row["category"]
                      for row in read_csv_rows(args.credits)}
    else:
        assignments = entity.match_original_names(patents, registry, match_threshold)
        ledger = entity.allocate_credits(patents, assignments, registry)
        categories = {row.application_id: row.category for row in ledger.rows}
    reassign = transactions_mod.reassignment_stats(events, categories)
    licensing = transactions_mod.licensing_stats(events, categories, None, args.top_k)
    rows = []
    for ev in sorted(events, key=lambda e: (e.application_id, e.slots)):
        rows.append([ev.application_id, ev.kind, ev.year, ev.assignor_entity,
                     ev.assignee_entity, ev.from_category, ev.to_category,
                     int(ev.internal), ev.reasons])
    Path(args.out).write_bytes(csv_bytes(
        ["application_id", "kind", "year", "assignor_entity", "assignee_entity",
         "from_category", "to_category", "internal", "reasons"], rows, _meta(args)))
    doc = {
        "reassignment": {cat: {"total_patents": s.total_patents, "changed": s.changed,
                               "unchanged": s.unchanged,
                               "n_transactions": s.n_transactions}
                         for cat, s in reassign.items()},
        "licensing": {"total_instances": licensing.total_instances},
    }
    Path(args.stats).write_bytes(json_bytes(doc, _meta(args)))
    print(f"{len(events)} events -> {args.out}, stats -> {args.stats}")
    return 0


def _cmd_run(args) -> int:
    config = PipelineConfig.from_file(args.config)
    manifest = run_pipeline(config, args.out_dir)
    print(f"pipeline ok: {len(manifest['artifacts'])} artifacts -> {args.out_dir}")
    return 0


def _cmd_synth(args) -> int:
    spec = synth.SynthSpec(n_patents=args.patents, n_blocks=args.g,
                           n_codes=args.codes, n_entities=args.entities)
    sidecar = synth.generate_synthetic_corpus(spec, args.seed, args.out,
                                              args.sidecar, fmt=args.format)
    print(f"synthetic corpus: {sidecar['n_publications']} publications, "
          f"{sidecar['n_applications']} applications -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="patlas",
                                     description="patent-portfolio analytics toolkit")
    parser.add_argument("--version", action="version", version=f"patlas {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse raw records and build the binary corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("csv", "jsonl"), required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("cluster", help="fit a co-clustering at one g")
    p.add_argument("--corpus", required=True)
    p.add_argument("--g", type=int, default=7)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("cluster-curve", help="modularity over a g range")
    p.add_argument("--corpus", required=True)
    p.add_argument("--g-min", type=int, default=2)
    p.add_argument("--g-max", type=int, default=20)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_cluster_curve)

    p = sub.add_parser("cluster-sensitivity", help="refit on random subsamples")
    p.add_argument("--corpus", required=True)
    p.add_argument("--axis", choices=("rows", "cols"), default="rows")
    p.add_argument("--fraction", type=float, default=0.9)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--g", type=int, default=7)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_cluster_sensitivity)

    p = sub.add_parser("keywords", help="z-score keywords per cluster")
    p.add_argument("--corpus", required=True)
    p.add_argument("--clusters", required=True)
    p.add_argument("--top", type=int, default=25)
    p.add_argument("--stopwords", default="")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_keywords)

    p = sub.add_parser("resolve", help="build the assignee-name registry")
    p.add_argument("--corpus", required=True)
    p.add_argument("--p0", type=float, default=99.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_resolve)

    p = sub.add_parser("credits", help="allocate fractional patent credits")
    p.add_argument("--corpus", required=True)
    p.add_argument("--registry", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_credits)

    p = sub.add_parser("portfolio", help="portfolio entropy reports")
    p.add_argument("--credits", required=True)
    p.add_argument("--clusters", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--registry", default="")
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--heatmap-bins", type=int, default=50)
    p.add_argument("--base-year", type=int, default=2004)
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_portfolio)

    p = sub.add_parser("transactions", help="reassignment/licensing statistics")
    p.add_argument("--corpus", required=True)
    p.add_argument("--registry", required=True)
    p.add_argument("--credits", default="")
    p.add_argument("--aliases", default="")
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--out", required=True)
    p.add_argument("--stats", required=True)
    p.set_defaults(func=_cmd_transactions)

    config_keys = "\n".join(
        f"  {name} (default: {getattr(PipelineConfig(), name)!r})"
        for name in PipelineConfig.__annotations__)
    p = sub.add_parser(
        "run", help="run the full pipeline from a config file",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="config file keys (flat key = value lines, # comments):\n" + config_keys)
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("synth", help="generate a seeded synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--sidecar", default=None)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--patents", type=int, default=2000)
    p.add_argument("--g", type=int, default=7)
    p.add_argument("--codes", type=int, default=84)
    p.add_argument("--entities", type=int, default=250)
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.set_defaults(func=_cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PatlasError as exc:
        print(f"error: stage {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
