"""Command-line interface.

Subcommands mirror the pipeline stages (ingest, extract, eval-extract,
topics fit/sweep/import, tmc build, network build/communities/top) plus
`run`, which executes the whole pipeline from a JSON config file with
flag overrides. Exit codes: 0 success, 2 config error, 3 input error,
4 stage failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, TmckitError
from .extract import (
    compile_lexicon,
    evaluate_extraction,
    import_candidates,
    llmrule_extract,
    read_methods,
    rule_extract,
    standardize_candidates,
    write_methods,
)
from .graphio import write_graph
from .ingest import (
    corpus_stats,
    deduplicate,
    filter_by_year,
    normalize_record,
    parse_records,
    read_corpus,
    write_corpus,
)
from .network import (
    build_network,
    community_report,
    greedy_communities,
    network_graph_doc,
    rank_popularity,
    write_communities_csv,
    write_merge_history_csv,
    write_popularity_csv,
)
from .pipeline import Pipeline, RunConfig
from .tmc import (
    bipartite_graph_doc,
    build_tmc_table,
    export_bipartite,
    read_tmc_csv,
    write_tmc_csv,
)
from .topics import (
    assign_dominant_topic,
    doc_topic_dists,
    fit_topic_model,
    import_assignments,
    read_assignments,
    sweep_topic_counts,
    tokenize,
    write_assignments,
    write_quality_table,
)

logger = logging.getLogger(__name__)


def _cmd_ingest(args) -> int:
    parsed = parse_records(args.in_path, args.format)
    records = [normalize_record(r) for r in parsed.records]
    records = filter_by_year(records, args.year_min, args.year_max)
    records, report = deduplicate(records, args.title_sim)
    write_corpus(records, args.out)
    if args.report:
        with open(args.report, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(report.to_dict(), sort_keys=True, indent=2))
            fh.write("\n")
    if args.rejects:
        rows = [{"line": r.line, "reason": r.reason} for r in parsed.rejects]
        with open(args.rejects, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(rows, sort_keys=True, indent=2))
            fh.write("\n")
    stats = corpus_stats(records)
    print(
        f"parsed {len(parsed.records)} records ({len(parsed.rejects)} rejected), "
        f"kept {stats.count} after year filter and {len(report.merges)} merges"
    )
    return 0


def _cmd_extract(args) -> int:
    corpus = read_corpus(args.corpus)
    lexicon = compile_lexicon(args.lexicon)
    per_doc = {}
    unmapped: dict[str, list[str]] = {}
    if args.candidates:
        imported = import_candidates(args.candidates, known_ids={r.id for r in corpus})
        std = standardize_candidates(imported.candidates, lexicon)
        unmapped = std.unmapped
        for record in corpus:
            per_doc[record.id] = llmrule_extract(
                record,
                imported.candidates.get(record.id),
                lexicon,
                fallback_rule=args.fallback_rule,
                keep_unmapped=args.keep_unmapped,
            )
    else:
        for record in corpus:
            per_doc[record.id] = rule_extract(record, lexicon).canonicals
    write_methods(per_doc, args.out)
    if args.unmapped:
        with open(args.unmapped, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps({k: v for k, v in sorted(unmapped.items())}, indent=2, sort_keys=True))
            fh.write("\n")
    n_methods = len({m for ms in per_doc.values() for m in ms})
    print(f"extracted methods for {len(per_doc)} documents ({n_methods} distinct)")
    return 0


def _cmd_eval_extract(args) -> int:
    predicted = read_methods(args.pred)
    gold = read_methods(args.gold)
    result = evaluate_extraction(predicted, gold)
    print(result.summary())
    if result.unknown_docs:
        print(f"warning: {len(result.unknown_docs)} predicted docs missing from gold")
    return 0


def _cmd_topics_fit(args) -> int:
    corpus = read_corpus(args.corpus)
    tokens = [(r.id, tokenize(r)) for r in corpus]
    cfg = _topic_config_from_args(args, args.k)
    model = fit_topic_model(tokens, cfg)
    dists = doc_topic_dists(model)
    assignments = [assign_dominant_topic(d) for d in dists]
    write_assignments(assignments, args.out, dists={d.doc_id: d.probs for d in dists})
    print(f"fitted {args.k} topics over {len(corpus)} documents -> {args.out}")
    return 0


def _cmd_topics_sweep(args) -> int:
    corpus = read_corpus(args.corpus)
    tokens = [(r.id, tokenize(r)) for r in corpus]
    k_values = _parse_k_list(args.k_list)
    template = _topic_config_from_args(args, k_values[0])
    sweep = sweep_topic_counts(tokens, k_values, template)
    write_quality_table(sweep.points, sweep.selected_k, args.out)
    for p in sweep.points:
        marker = " <- selected" if p.k == sweep.selected_k else ""
        print(f"K={p.k}: perplexity={p.perplexity:.3f} coherence={p.coherence:.4f}{marker}")
    return 0


def _cmd_topics_import(args) -> int:
    imported = import_assignments(args.in_path, args.mode)
    write_assignments(imported.assignments, args.out)
    if imported.remap and any(old != new for old, new in imported.remap.items()):
        print(f"remapped topic ids: {imported.remap}")
    if imported.unassigned:
        print(f"unassigned documents excluded: {len(imported.unassigned)}")
    if imported.rejects:
        print(f"rejected rows: {len(imported.rejects)}")
    print(f"imported {len(imported.assignments)} assignments over {imported.k} topics")
    return 0


def _cmd_tmc_build(args) -> int:
    extractions = read_methods(args.methods)
    assignments, _ = read_assignments(args.topics)
    corpus_size = None
    if args.corpus:
        corpus_size = len(read_corpus(args.corpus))
    table = build_tmc_table(extractions, assignments, args.sigma, corpus_size=corpus_size)
    write_tmc_csv(table, args.out)
    if args.graph:
        write_graph(bipartite_graph_doc(export_bipartite(table)), args.graph)
    print(
        f"{len(table.pairs)} pairs, {table.retained_count} retained at sigma={args.sigma}"
    )
    return 0


def _cmd_network_build(args) -> int:
    table = read_tmc_csv(args.tmc)
    net = build_network(table)
    partition = greedy_communities(net) if args.communities else None
    write_graph(network_graph_doc(net, partition, weighted=args.weighted), args.out)
    print(f"network: {net.n_nodes} nodes, {len(net.edges)} edges -> {args.out}")
    return 0


def _cmd_network_communities(args) -> int:
    table = read_tmc_csv(args.tmc)
    net = build_network(table)
    partition = greedy_communities(net)
    write_communities_csv(partition, net, args.out)
    if args.history:
        write_merge_history_csv(partition, args.history)
    report = community_report(partition, net)
    print(f"{partition.n_communities} communities, Q={partition.q:.4f}")
    for summary in report:
        print(
            f"  community {summary.community}: {summary.size} pairs, "
            f"{summary.distinct_topics} topics x {summary.distinct_methods} methods"
        )
    return 0


def _cmd_network_top(args) -> int:
    table = read_tmc_csv(args.tmc)
    top = rank_popularity(table, args.n)
    if args.out:
        write_popularity_csv(top, args.out)
    for rank, pair in enumerate(top, start=1):
        print(f"{rank:3d}. {pair.label}  d_ij={pair.d_ij}  c_ij={pair.c_ij:.6g}")
    return 0


def _cmd_run(args) -> int:
    if args.config:
        config = RunConfig.from_file(args.config)
    else:
        config = RunConfig()
    overrides = {
        "in_path": args.in_path,
        "in_format": args.format,
        "out_dir": args.out_dir,
        "lexicon": args.lexicon,
        "candidates": args.candidates,
        "seed": args.seed,
        "sigma": args.sigma,
        "k": args.k,
        "year_min": args.year_min,
        "year_max": args.year_max,
    }
    for name, value in overrides.items():
        if value is not None:
            setattr(config, name, value)
    pipeline = Pipeline(config, resume=not args.no_resume)
    if args.manifest_only:
        for record in pipeline.plan():
            print(f"{record.name}: {record.status}")
        return 0
    manifest = pipeline.run()
    for record in manifest.stages:
        print(f"{record.name}: {record.status} ({record.wall_clock_s:.2f}s)")
    print(f"manifest written to {Path(config.out_dir) / 'manifest.json'}")
    return 0


def _topic_config_from_args(args, k: int):
    from .pipeline import TOPIC_STAGE_SEED_OFFSET
    from .topics import TopicModelConfig

    return TopicModelConfig(
        k=k,
        alpha=args.alpha,
        beta=args.beta,
        iterations=args.iterations,
        burn_in=args.burn_in,
        seed=args.seed + TOPIC_STAGE_SEED_OFFSET,
    )


def _parse_k_list(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad k list {text!r}: {exc}") from exc
    if not values:
        raise ConfigError("empty k list")
    return values


def _add_topic_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--alpha", type=float, default=None, help="doc-topic prior (default 50/K)")
    parser.add_argument("--beta", type=float, default=0.01, help="topic-word prior")
    parser.add_argument("--iterations", type=int, default=1000)
    parser.add_argument("--burn-in", dest="burn_in", type=int, default=800)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tmckit",
        description="Topic-method composition mining over bibliographic corpora.",
    )
    parser.add_argument("--version", action="version", version=f"tmckit {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse, year-filter and deduplicate an export file")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--format", choices=["jsonl", "csv", "wos_tab"], default="jsonl")
    p.add_argument("--year-min", type=int, default=1992)
    p.add_argument("--year-max", type=int, default=2022)
    p.add_argument("--title-sim", dest="title_sim", type=float, default=0.90)
    p.add_argument("--out", required=True, help="canonical corpus JSONL")
    p.add_argument("--report", help="dedup report JSON")
    p.add_argument("--rejects", help="rejected-rows report JSON")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("extract", help="extract method entities per document")
    p.add_argument("--corpus", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--candidates", help="external candidate mentions JSONL")
    p.add_argument("--fallback-rule", dest="fallback_rule", action="store_true")
    p.add_argument("--keep-unmapped", dest="keep_unmapped", action="store_true")
    p.add_argument("--out", required=True, help="methods JSONL")
    p.add_argument("--unmapped", help="unmapped candidates report JSON")
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("eval-extract", help="score predicted methods against gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.set_defaults(func=_cmd_eval_extract)

    p = sub.add_parser("topics", help="topic model operations")
    tsub = p.add_subparsers(dest="topics_command", required=True)

    tp = tsub.add_parser("fit", help="fit the built-in topic model")
    tp.add_argument("--corpus", required=True)
    tp.add_argument("--k", type=int, required=True)
    _add_topic_model_flags(tp)
    tp.add_argument("--out", required=True, help="assignments CSV")
    tp.set_defaults(func=_cmd_topics_fit)

    tp = tsub.add_parser("sweep", help="sweep topic counts and select one")
    tp.add_argument("--corpus", required=True)
    tp.add_argument("--k-list", dest="k_list", required=True, help="comma separated")
    _add_topic_model_flags(tp)
    tp.add_argument("--out", required=True, help="quality table CSV")
    tp.set_defaults(func=_cmd_topics_sweep)

    tp = tsub.add_parser("import", help="import external topic assignments")
    tp.add_argument("--in", dest="in_path", required=True)
    tp.add_argument("--mode", choices=["argmax_rows", "full_dist"], default="argmax_rows")
    tp.add_argument("--out", required=True, help="canonical assignments CSV")
    tp.set_defaults(func=_cmd_topics_import)

    p = sub.add_parser("tmc", help="topic-method pair table")
    csub = p.add_subparsers(dest="tmc_command", required=True)
    cp = csub.add_parser("build", help="count pairs and apply the sigma truncation")
    cp.add_argument("--methods", required=True)
    cp.add_argument("--topics", required=True)
    cp.add_argument("--corpus", help="corpus JSONL, for the reported corpus size")
    cp.add_argument("--sigma", type=float, default=0.001)
    cp.add_argument("--out", required=True, help="pair table CSV")
    cp.add_argument("--graph", help="bipartite graph export (.graphml/.gexf)")
    cp.set_defaults(func=_cmd_tmc_build)

    p = sub.add_parser("network", help="pair-network analysis")
    nsub = p.add_subparsers(dest="network_command", required=True)

    np_ = nsub.add_parser("build", help="export the shared-element network")
    np_.add_argument("--tmc", required=True)
    np_.add_argument("--out", required=True, help=".graphml or .gexf")
    np_.add_argument("--weighted", action="store_true", help="edge weight = min endpoint intensity")
    np_.add_argument("--communities", action="store_true", help="annotate nodes with communities")
    np_.set_defaults(func=_cmd_network_build)

    np_ = nsub.add_parser("communities", help="greedy modularity communities")
    np_.add_argument("--tmc", required=True)
    np_.add_argument("--out", required=True, help="node,community CSV")
    np_.add_argument("--history", help="merge history CSV")
    np_.set_defaults(func=_cmd_network_communities)

    np_ = nsub.add_parser("top", help="most popular pairs")
    np_.add_argument("--tmc", required=True)
    np_.add_argument("--n", type=int, default=35)
    np_.add_argument("--out", help="popularity CSV")
    np_.set_defaults(func=_cmd_network_top)

    p = sub.add_parser("run", help="run the full pipeline from a config file")
    p.add_argument("--config", help="JSON config; flags below override its values")
    p.add_argument("--in", dest="in_path")
    p.add_argument("--format", choices=["jsonl", "csv", "wos_tab"])
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--lexicon")
    p.add_argument("--candidates")
    p.add_argument("--seed", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--year-min", dest="year_min", type=int)
    p.add_argument("--year-max", dest="year_max", type=int)
    p.add_argument("--manifest-only", action="store_true", help="print planned stages, run nothing")
    p.add_argument("--no-resume", action="store_true", help="re-run every stage")
    p.set_defaults(func=_cmd_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except TmckitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except BrokenPipeError:
        return 0


if __name__ == "__main__":
    sys.exit(main())
