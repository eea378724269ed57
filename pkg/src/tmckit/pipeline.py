"""End-to-end pipeline: ingest -> extract -> topics -> tmc -> network -> report.

Each stage reads and writes declared files under one output directory, so
external adapters can replace any stage by supplying its output file. A run
manifest records the effective config and a digest of every input and
output; re-running with identical inputs skips stages whose outputs are
already present and untampered, and reproduces identical bytes otherwise.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable

from . import __version__
from .errors import ConfigError, InputError, StageError, TmckitError
from .extract import (
    compile_lexicon,
    import_candidates,
    llmrule_extract,
    read_methods,
    rule_extract,
    standardize_candidates,
    write_methods,
)
from .graphio import write_gexf, write_graphml
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
    greedy_communities,
    modularity,
    network_graph_doc,
    rank_popularity,
    write_communities_csv,
    write_merge_history_csv,
    write_popularity_csv,
)
from .tmc import (
    bipartite_graph_doc,
    build_tmc_table,
    export_bipartite,
    read_tmc_csv,
    write_tmc_csv,
)
from .topics import (
    TopicModelConfig,
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

TOPIC_STAGE_SEED_OFFSET = 100
CONFIG_VERSION = "1"

# stage output file names, relative to the run output directory
F_CORPUS = "corpus.jsonl"
F_DEDUP = "dedup.json"
F_REJECTS = "ingest_rejects.json"
F_METHODS = "methods.jsonl"
F_UNMAPPED = "unmapped.json"
F_TOPICS = "topics.csv"
F_QUALITY = "topic_quality.csv"
F_TMC = "tmc.csv"
F_BIPARTITE = "tmc_bipartite.graphml"
F_NET_GRAPHML = "network.graphml"
F_NET_GEXF = "network.gexf"
F_COMMUNITIES = "communities.csv"
F_HISTORY = "merge_history.csv"
F_TOP = "top_pairs.csv"
F_SUMMARY = "summary.txt"
F_MANIFEST = "manifest.json"


@dataclass
class RunConfig:
    """Every pipeline flag, serializable into the run manifest."""

    in_path: str = ""
    in_format: str = "jsonl"
    out_dir: str = "run"
    year_min: int = 1992
    year_max: int = 2022
    title_sim: float = 0.90
    lexicon: str = ""
    candidates: str | None = None
    fallback_rule: bool = False
    keep_unmapped: bool = False
    topics_mode: str = "fit"  # fit | sweep | import
    k: int = 38
    k_list: list[int] = field(default_factory=list)
    alpha: float | None = None
    beta: float = 0.01
    iterations: int = 1000
    burn_in: int = 800
    seed: int = 7
    import_path: str | None = None
    import_mode: str = "argmax_rows"
    sigma: float = 0.001
    top_n: int = 35
    weighted: bool = False
    version: str = CONFIG_VERSION

    def validate(self) -> None:
        if not self.in_path:
            raise ConfigError("no input file configured")
        if self.in_format not in ("jsonl", "csv", "wos_tab"):
            raise ConfigError(f"unknown input format: {self.in_format!r}")
        if self.year_min > self.year_max:
            raise ConfigError(f"year_min {self.year_min} > year_max {self.year_max}")
        if not 0.0 <= self.title_sim <= 1.0:
            raise ConfigError(f"title_sim must be in [0,1], got {self.title_sim}")
        if not self.lexicon:
            raise ConfigError("no lexicon configured")
        if self.topics_mode not in ("fit", "sweep", "import"):
            raise ConfigError(f"unknown topics mode: {self.topics_mode!r}")
        if self.topics_mode == "sweep" and not self.k_list:
            raise ConfigError("topics_mode=sweep requires a k_list")
        if self.topics_mode == "import" and not self.import_path:
            raise ConfigError("topics_mode=import requires an import_path")
        if self.sigma < 0:
            raise ConfigError(f"sigma must be >= 0, got {self.sigma}")
        if self.top_n < 1:
            raise ConfigError(f"top_n must be >= 1, got {self.top_n}")
        # raises ConfigError on bad alpha/beta/iterations/burn_in/k
        self.topic_config(self.k)

    def topic_config(self, k: int) -> TopicModelConfig:
        return TopicModelConfig(
            k=k,
            alpha=self.alpha,
            beta=self.beta,
            iterations=self.iterations,
            burn_in=self.burn_in,
            seed=self.seed + TOPIC_STAGE_SEED_OFFSET,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        """Load a JSON config; relative paths resolve against the file's directory."""
        path = Path(path)
        if not path.is_file():
            raise InputError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a JSON object")
        cfg = cls.from_dict(data)
        base = path.parent
        for name in ("in_path", "lexicon", "candidates", "import_path", "out_dir"):
            value = getattr(cfg, name)
            if value:
                p = Path(value)
                if not p.is_absolute():
                    setattr(cfg, name, str(base / p))
        return cfg


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return f"sha256:{digest.hexdigest()}"


@dataclass
class StageRecord:
    name: str
    status: str  # run | skipped | failed | planned | planned_skip
    outputs: dict[str, str] = field(default_factory=dict)
    wall_clock_s: float = 0.0
    stale_outputs: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.status,
            "outputs": self.outputs,
            "wall_clock_s": self.wall_clock_s,
            "stale_outputs": self.stale_outputs,
        }


@dataclass
class RunManifest:
    config: dict
    input_digests: dict[str, str]
    stages: list[StageRecord]
    tool_version: str = __version__

    def to_dict(self) -> dict:
        return {
            "tool_version": self.tool_version,
            "config": self.config,
            "input_digests": self.input_digests,
            "stages": [s.to_dict() for s in self.stages],
        }

    def output_digests(self) -> dict[str, str]:
        out: dict[str, str] = {}
        for stage in self.stages:
            out.update(stage.outputs)
        return out

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(self.to_dict(), sort_keys=True, indent=2))
            fh.write("\n")


def _load_previous_manifest(path: Path, config: RunConfig) -> dict[str, str] | None:
    """Digest map of the previous compatible run, or None."""
    if not path.is_file():
        return None
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, OSError):
        logger.warning("ignoring unreadable previous manifest at %s", path)
        return None
    if data.get("tool_version") != __version__ or data.get("config") != config.to_dict():
        return None
    digests: dict[str, str] = dict(data.get("input_digests", {}))
    for stage in data.get("stages", []):
        if stage.get("status") in ("run", "skipped"):
            digests.update(stage.get("outputs", {}))
    return digests


@dataclass
class _Stage:
    name: str
    inputs: list[str]  # external role names (role:...) or stage output file names
    outputs: list[str]
    run: Callable[[], None] | None = None


class Pipeline:
    def __init__(self, config: RunConfig, resume: bool = True):
        config.validate()
        self.config = config
        self.out_dir = Path(config.out_dir)
        self.resume = resume
        self.external: dict[str, str] = {"role:in": config.in_path, "role:lexicon": config.lexicon}
        if config.candidates:
            self.external["role:candidates"] = config.candidates
        if config.topics_mode == "import":
            self.external["role:import"] = config.import_path
        self.stages = self._declare_stages()

    def _declare_stages(self) -> list[_Stage]:
        topics_inputs = [F_CORPUS]
        topics_outputs = [F_TOPICS]
        if self.config.topics_mode == "sweep":
            topics_outputs = [F_TOPICS, F_QUALITY]
        if self.config.topics_mode == "import":
            topics_inputs = ["role:import"]
        extract_inputs = [F_CORPUS, "role:lexicon"]
        if self.config.candidates:
            extract_inputs.append("role:candidates")
        return [
            _Stage("ingest", ["role:in"], [F_CORPUS, F_DEDUP, F_REJECTS], self._run_ingest),
            _Stage("extract", extract_inputs, [F_METHODS, F_UNMAPPED], self._run_extract),
            _Stage("topics", topics_inputs, topics_outputs, self._run_topics),
            _Stage("tmc", [F_METHODS, F_TOPICS, F_CORPUS], [F_TMC, F_BIPARTITE], self._run_tmc),
            _Stage(
                "network",
                [F_TMC],
                [F_NET_GRAPHML, F_NET_GEXF, F_COMMUNITIES, F_HISTORY, F_TOP],
                self._run_network,
            ),
            _Stage(
                "report",
                [F_CORPUS, F_METHODS, F_TOPICS, F_TMC, F_COMMUNITIES],
                [F_SUMMARY],
                self._run_report,
            ),
        ]

    # ---- stage bodies ----

    def _run_ingest(self) -> None:
        cfg = self.config
        parsed = parse_records(cfg.in_path, cfg.in_format)
        records = [normalize_record(r) for r in parsed.records]
        records = filter_by_year(records, cfg.year_min, cfg.year_max)
        records, report = deduplicate(records, cfg.title_sim)
        write_corpus(records, self.out_dir / F_CORPUS)
        with open(self.out_dir / F_DEDUP, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(report.to_dict(), sort_keys=True, indent=2))
            fh.write("\n")
        rejects = [{"line": r.line, "reason": r.reason} for r in parsed.rejects]
        with open(self.out_dir / F_REJECTS, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(rejects, sort_keys=True, indent=2))
            fh.write("\n")

    def _run_extract(self) -> None:
        cfg = self.config
        corpus = read_corpus(self.out_dir / F_CORPUS)
        lexicon = compile_lexicon(cfg.lexicon)
        unmapped: dict[str, list[str]] = {}
        per_doc: dict[str, frozenset[str]] = {}
        if cfg.candidates:
            imported = import_candidates(cfg.candidates, known_ids={r.id for r in corpus})
            for record in corpus:
                per_doc[record.id] = llmrule_extract(
                    record,
                    imported.candidates.get(record.id),
                    lexicon,
                    fallback_rule=cfg.fallback_rule,
                    keep_unmapped=cfg.keep_unmapped,
                )
            std = standardize_candidates(imported.candidates, lexicon)
            unmapped = std.unmapped
        else:
            for record in corpus:
                per_doc[record.id] = rule_extract(record, lexicon).canonicals
        write_methods(per_doc, self.out_dir / F_METHODS)
        with open(self.out_dir / F_UNMAPPED, "w", encoding="utf-8", newline="\n") as fh:
            report = {doc: sorted(set(v)) for doc, v in sorted(unmapped.items())}
            fh.write(json.dumps(report, sort_keys=True, indent=2))
            fh.write("\n")

    def _run_topics(self) -> None:
        cfg = self.config
        if cfg.topics_mode == "import":
            imported = import_assignments(cfg.import_path, cfg.import_mode)
            write_assignments(imported.assignments, self.out_dir / F_TOPICS)
            return
        corpus = read_corpus(self.out_dir / F_CORPUS)
        tokens = [(r.id, tokenize(r)) for r in corpus]
        k = cfg.k
        if cfg.topics_mode == "sweep":
            sweep = sweep_topic_counts(tokens, cfg.k_list, self.config.topic_config(cfg.k_list[0]))
            write_quality_table(sweep.points, sweep.selected_k, self.out_dir / F_QUALITY)
            k = sweep.selected_k
        model = fit_topic_model(tokens, self.config.topic_config(k))
        dists = doc_topic_dists(model)
        assignments = [assign_dominant_topic(d) for d in dists]
        write_assignments(
            assignments, self.out_dir / F_TOPICS, dists={d.doc_id: d.probs for d in dists}
        )

    def _run_tmc(self) -> None:
        cfg = self.config
        extractions = read_methods(self.out_dir / F_METHODS)
        assignments, _ = read_assignments(self.out_dir / F_TOPICS)
        corpus_size = len(read_corpus(self.out_dir / F_CORPUS))
        table = build_tmc_table(extractions, assignments, cfg.sigma, corpus_size=corpus_size)
        write_tmc_csv(table, self.out_dir / F_TMC)
        write_graphml(bipartite_graph_doc(export_bipartite(table)), self.out_dir / F_BIPARTITE)

    def _run_network(self) -> None:
        cfg = self.config
        table = read_tmc_csv(self.out_dir / F_TMC)
        net = build_network(table)
        partition = greedy_communities(net)
        doc = network_graph_doc(net, partition, weighted=cfg.weighted)
        write_graphml(doc, self.out_dir / F_NET_GRAPHML)
        write_gexf(doc, self.out_dir / F_NET_GEXF)
        write_communities_csv(partition, net, self.out_dir / F_COMMUNITIES)
        write_merge_history_csv(partition, self.out_dir / F_HISTORY)
        write_popularity_csv(rank_popularity(table, cfg.top_n), self.out_dir / F_TOP)

    def _run_report(self) -> None:
        emit_report(self.out_dir)

    # ---- orchestration ----

    def _current_input_digest(self, token: str) -> str | None:
        if token.startswith("role:"):
            path = Path(self.external[token])
        else:
            path = self.out_dir / token
        if not path.is_file():
            return None
        return sha256_file(path)

    def _can_skip(self, stage: _Stage, prev: dict[str, str] | None) -> bool:
        if prev is None:
            return False
        for token in stage.inputs:
            current = self._current_input_digest(token)
            if current is None or prev.get(token) != current:
                return False
        for name in stage.outputs:
            path = self.out_dir / name
            if not path.is_file() or prev.get(name) != sha256_file(path):
                return False
        return True

    def plan(self) -> list[StageRecord]:
        """Planned stage statuses without executing anything."""
        prev = (
            _load_previous_manifest(self.out_dir / F_MANIFEST, self.config)
            if self.resume
            else None
        )
        records = []
        dirty = False
        for stage in self.stages:
            if not dirty and self._can_skip(stage, prev):
                records.append(StageRecord(name=stage.name, status="planned_skip"))
            else:
                dirty = True
                records.append(StageRecord(name=stage.name, status="planned"))
        return records

    def run(self) -> RunManifest:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        for token, path in self.external.items():
            if not Path(path).is_file():
                raise InputError(f"input file for {token.split(':', 1)[1]} not found: {path}")
        prev = (
            _load_previous_manifest(self.out_dir / F_MANIFEST, self.config)
            if self.resume
            else None
        )
        input_digests = {token: sha256_file(path) for token, path in self.external.items()}
        manifest = RunManifest(
            config=self.config.to_dict(), input_digests=input_digests, stages=[]
        )
        for stage in self.stages:
            record = StageRecord(name=stage.name, status="run")
            started = time.perf_counter()
            if self._can_skip(stage, prev):
                record.status = "skipped"
                record.outputs = {
                    name: sha256_file(self.out_dir / name) for name in stage.outputs
                }
                record.wall_clock_s = time.perf_counter() - started
                manifest.stages.append(record)
                logger.info("stage %s: skipped (outputs up to date)", stage.name)
                continue
            try:
                stage.run()
            except Exception as exc:
                record.status = "failed"
                record.stale_outputs = [
                    name for name in stage.outputs if (self.out_dir / name).is_file()
                ]
                record.wall_clock_s = time.perf_counter() - started
                manifest.stages.append(record)
                manifest.write(self.out_dir / F_MANIFEST)
                if isinstance(exc, TmckitError):
                    raise StageError(stage.name, str(exc)) from exc
                raise StageError(stage.name, f"{type(exc).__name__}: {exc}") from exc
            record.outputs = {
                name: sha256_file(self.out_dir / name) for name in stage.outputs
            }
            record.wall_clock_s = time.perf_counter() - started
            manifest.stages.append(record)
            logger.info("stage %s: run in %.2fs", stage.name, record.wall_clock_s)
        manifest.write(self.out_dir / F_MANIFEST)
        return manifest


def run_pipeline(config: RunConfig, resume: bool = True) -> RunManifest:
    """Execute all stages; returns the written manifest."""
    return Pipeline(config, resume=resume).run()


def emit_report(out_dir: str | Path) -> Path:
    """Write summary.txt from the stage output files themselves.

    Every number is re-read from the CSV/JSONL outputs so the summary
    cannot disagree with them.
    """
    out_dir = Path(out_dir)
    for name in (F_CORPUS, F_METHODS, F_TOPICS, F_TMC, F_COMMUNITIES):
        if not (out_dir / name).is_file():
            raise InputError(f"missing upstream output: {name}")
    corpus = read_corpus(out_dir / F_CORPUS)
    extractions = read_methods(out_dir / F_METHODS)
    assignments, k = read_assignments(out_dir / F_TOPICS)
    table = read_tmc_csv(out_dir / F_TMC)
    net = build_network(table)
    with open(out_dir / F_COMMUNITIES, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        community_of = {row[0]: int(row[1]) for row in reader if row}
    assignment = {
        i: community_of[pair.label] for i, pair in enumerate(net.nodes)
    }
    q = modularity(net, assignment)
    methods = sorted({m for ms in extractions.values() for m in ms})
    lines = [
        f"corpus_size: {len(corpus)}",
        f"method_count: {len(methods)}",
        f"topic_count: {k}",
        f"retained_pairs: {table.retained_count}",
        f"community_count: {len(set(community_of.values()))}",
        f"modularity_q: {q!r}",
    ]
    stats = corpus_stats(corpus)
    lines.append(f"year_span: {min(stats.per_year)}-{max(stats.per_year)}" if stats.per_year else "year_span: -")
    path = out_dir / F_SUMMARY
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")
    return path
