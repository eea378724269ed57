"""Topic-method pair counting, interaction intensity and truncation.

For a method i and a topic j over one corpus:

* d_i — documents whose extracted method set contains i;
* d_j — documents whose dominant topic is j;
* d_ij — documents satisfying both;
* c_ij = d_ij / (d_i * d_j) — the interaction intensity;
* r_ij = c_ij when c_ij > sigma, else 0 — the truncated relation.

Pairs with r_ij > 0 are "retained" and become graph links; pairs below the
threshold stay in the table so sensitivity can be re-read without
recounting.
"""

from __future__ import annotations

import csv
import logging
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .errors import ConfigError, InputError
from .topics import TopicAssignment

logger = logging.getLogger(__name__)

SIGMA_DEFAULT = 0.001


@dataclass(frozen=True)
class TmcPair:
    method: str
    topic: int
    d_i: int
    d_j: int
    d_ij: int
    c_ij: float
    r_ij: float

    @property
    def retained(self) -> bool:
        return self.r_ij > 0.0

    @property
    def label(self) -> str:
        return f"{self.method} @ {self.topic}"


@dataclass
class TmcTable:
    sigma: float | None
    pairs: list[TmcPair]
    corpus_size: int

    def retained_pairs(self) -> list[TmcPair]:
        return [p for p in self.pairs if p.retained]

    @property
    def retained_count(self) -> int:
        return sum(1 for p in self.pairs if p.retained)


def _pair_sort_key(p: TmcPair):
    # canonical table order: d_ij desc, c_ij desc, method asc, topic asc
    return (-p.d_ij, -p.c_ij, p.method, p.topic)


def count_method_docs(extractions: Mapping[str, Iterable[str]]) -> dict[str, int]:
    """Documents per method (set semantics: one count per document)."""
    counts: Counter[str] = Counter()
    for methods in extractions.values():
        counts.update(set(methods))
    return dict(counts)


def cooccurrence_counts(
    extractions: Mapping[str, Iterable[str]],
    assignments: Iterable[TopicAssignment],
) -> dict[tuple[str, int], int]:
    """Documents where method i and dominant topic j co-occur.

    Documents missing either an extraction entry or a topic assignment
    contribute nothing.
    """
    topic_of = {a.doc_id: a.topic_id for a in assignments}
    counts: Counter[tuple[str, int]] = Counter()
    for doc_id, methods in extractions.items():
        topic = topic_of.get(doc_id)
        if topic is None:
            continue
        for method in set(methods):
            counts[(method, topic)] += 1
    return dict(counts)


def intensity(d_ij: int, d_i: int, d_j: int) -> float:
    """Interaction intensity d_ij / (d_i * d_j)."""
    if d_i < 1 or d_j < 1:
        raise ValueError(
            f"intensity undefined for d_i={d_i}, d_j={d_j} (pair should not exist)"
        )
    if not 0 <= d_ij <= min(d_i, d_j):
        raise ValueError(f"impossible counts: d_ij={d_ij}, d_i={d_i}, d_j={d_j}")
    return d_ij / (d_i * d_j)


@dataclass
class CoverageStats:
    """Overlap between the extraction and assignment document universes."""

    docs_with_methods: int
    docs_with_topic: int
    docs_with_both: int

    def to_dict(self) -> dict:
        return {
            "docs_with_methods": self.docs_with_methods,
            "docs_with_topic": self.docs_with_topic,
            "docs_with_both": self.docs_with_both,
        }


def coverage_stats(
    extractions: Mapping[str, Iterable[str]], assignments: Iterable[TopicAssignment]
) -> CoverageStats:
    assigned = {a.doc_id for a in assignments}
    extracted = {d for d, m in extractions.items() if m}
    return CoverageStats(
        docs_with_methods=len(extracted),
        docs_with_topic=len(assigned),
        docs_with_both=len(extracted & assigned),
    )


def build_tmc_table(
    extractions: Mapping[str, Iterable[str]],
    assignments: Iterable[TopicAssignment],
    sigma: float = SIGMA_DEFAULT,
    corpus_size: int | None = None,
) -> TmcTable:
    """Count every co-occurring (method, topic) pair and apply the
    strict truncation c_ij > sigma.

    All pairs with d_ij >= 1 appear in the table; only retained pairs carry
    r_ij > 0. ``corpus_size`` defaults to the union of the two document
    universes and is reported alongside sigma because intensity scales with
    corpus size.
    """
    if sigma < 0:
        raise ConfigError(f"sigma must be >= 0, got {sigma}")
    assignments = list(assignments)
    d_i = count_method_docs(extractions)
    d_j: Counter[int] = Counter(a.topic_id for a in assignments)
    d_ij = cooccurrence_counts(extractions, assignments)
    if corpus_size is None:
        corpus_size = len(set(extractions) | {a.doc_id for a in assignments})
    pairs = []
    for (method, topic), co in d_ij.items():
        c = intensity(co, d_i[method], d_j[topic])
        pairs.append(
            TmcPair(
                method=method,
                topic=topic,
                d_i=d_i[method],
                d_j=d_j[topic],
                d_ij=co,
                c_ij=c,
                r_ij=c if c > sigma else 0.0,
            )
        )
    pairs.sort(key=_pair_sort_key)
    table = TmcTable(sigma=sigma, pairs=pairs, corpus_size=corpus_size)
    logger.info(
        "tmc table: %d pairs, %d retained at sigma=%s over %d documents",
        len(pairs),
        table.retained_count,
        sigma,
        corpus_size,
    )
    return table


@dataclass(frozen=True)
class BipartiteNode:
    node_id: str
    kind: str  # "topic" | "method"
    label: str
    doc_count: int


@dataclass
class BipartiteGraph:
    """Topic-method graph: edges only between a topic and a method."""

    nodes: list[BipartiteNode]
    edges: list[tuple[str, str, float]]  # (method node id, topic node id, weight)


def export_bipartite(table: TmcTable) -> BipartiteGraph:
    """Bipartite graph of the retained pairs, edge weight = intensity."""
    retained = table.retained_pairs()
    if not retained:
        logger.warning("no retained pairs; bipartite graph is empty")
    methods = sorted({(p.method, p.d_i) for p in retained})
    topics = sorted({(p.topic, p.d_j) for p in retained})
    nodes = [
        BipartiteNode(node_id=f"m:{m}", kind="method", label=m, doc_count=di)
        for m, di in methods
    ] + [
        BipartiteNode(node_id=f"t:{t}", kind="topic", label=str(t), doc_count=dj)
        for t, dj in topics
    ]
    edges = [(f"m:{p.method}", f"t:{p.topic}", p.c_ij) for p in retained]
    return BipartiteGraph(nodes=nodes, edges=edges)


def bipartite_graph_doc(graph: BipartiteGraph):
    """GraphDoc of the bipartite export, ready for GraphML/GEXF writing."""
    from .graphio import GraphDoc

    doc = GraphDoc()
    for node in graph.nodes:
        doc.add_node(
            node.node_id, kind=node.kind, label=node.label, doc_count=node.doc_count
        )
    for src, dst, weight in graph.edges:
        doc.add_edge(src, dst, weight=weight)
    return doc


def write_tmc_csv(table: TmcTable, path: str | Path) -> None:
    """Write the table as CSV method,topic_id,d_i,d_j,d_ij,c_ij,retained."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "topic_id", "d_i", "d_j", "d_ij", "c_ij", "retained"])
        for p in table.pairs:
            writer.writerow(
                [p.method, p.topic, p.d_i, p.d_j, p.d_ij, repr(p.c_ij), str(p.retained).lower()]
            )


def read_tmc_csv(path: str | Path) -> TmcTable:
    """Read a table written by :func:`write_tmc_csv`.

    The originating sigma is not stored in the CSV; retention follows the
    ``retained`` column and ``sigma`` is None on the loaded table.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"tmc table not found: {path}")
    pairs = []
    doc_ids_union = 0
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["method", "topic_id"]:
            raise InputError(f"{path}: expected a tmc table header")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                method, topic, d_i, d_j, d_ij, c_ij, retained = row
                c = float(c_ij)
                pairs.append(
                    TmcPair(
                        method=method,
                        topic=int(topic),
                        d_i=int(d_i),
                        d_j=int(d_j),
                        d_ij=int(d_ij),
                        c_ij=c,
                        r_ij=c if retained == "true" else 0.0,
                    )
                )
            except (ValueError, IndexError) as exc:
                raise InputError(f"{path}:{line_no}: malformed tmc row: {exc}") from exc
    pairs.sort(key=_pair_sort_key)
    return TmcTable(sigma=None, pairs=pairs, corpus_size=doc_ids_union)


def retention_sensitivity(
    table: TmcTable, sigmas: Iterable[float]
) -> list[tuple[float, int]]:
    """Retained-pair counts the table would have under other thresholds."""
    out = []
    for s in sorted(sigmas):
        if s < 0 or math.isnan(s):
            raise ConfigError(f"sigma must be >= 0, got {s}")
        out.append((s, sum(1 for p in table.pairs if p.c_ij > s)))
    return out
