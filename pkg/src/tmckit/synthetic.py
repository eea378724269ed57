"""Seeded synthetic fixtures: a small end-to-end corpus plus focused
test corpora.

Everything here is deterministic for a given seed, so the bundled data
files under data/synthetic/ can be regenerated byte-identically and the
pipeline can be exercised without any external corpus.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .topics import TopicAssignment

PIPELINE_SEED = 7

THEMES = {
    "archives": (
        "manuscript archive heritage museum collection digitization preservation "
        "curation artifact exhibition provenance catalog conservation repository"
    ).split(),
    "geography": (
        "map spatial terrain cartography region landscape territory elevation "
        "settlement boundary navigation atlas geography distance"
    ).split(),
    "literature": (
        "novel poetry narrative corpus literary author genre stylistic vocabulary "
        "syntax semantics discourse translation rhetoric"
    ).split(),
    "society": (
        "community network communication collaboration interaction audience "
        "participation influence engagement membership reciprocity cohesion diffusion"
    ).split(),
}

LEXICON = {
    "text mining": ["tm", "text data mining"],
    "topic modeling": ["lda", "latent dirichlet allocation", "topic models"],
    "social network analysis": ["sna", "network analysis"],
    "geographic information systems": ["gis", "geospatial analysis"],
    "machine learning": ["ml", "supervised learning"],
    "optical character recognition": ["ocr"],
    "sentiment analysis": ["opinion mining"],
    "named entity recognition": ["ner", "entity extraction"],
}

THEME_METHODS = {
    "archives": ["optical character recognition", "machine learning", "named entity recognition"],
    "geography": ["geographic information systems", "machine learning"],
    "literature": ["text mining", "topic modeling", "sentiment analysis"],
    "society": ["social network analysis", "topic modeling"],
}

NOISE_CANDIDATES = [
    "quantum hermeneutics",
    "synergy matrix",
    "holistic paradigm",
    "conceptual scaffolding",
    "bespoke toolchain",
    "artisanal pipeline",
]

_SURNAMES = ["Arnold", "Bell", "Chen", "Dietrich", "Elio", "Fuentes", "Gray", "Hart"]
_VENUES = [
    "Journal of Computational Heritage",
    "Digital Scholarship Quarterly",
    "Proceedings of Applied Text Analysis",
]


@dataclass
class PipelineFixture:
    """Raw export rows plus the side files the pipeline consumes."""

    raw_rows: list[dict]
    lexicon: dict[str, list[str]]
    candidates: dict[str, list[str]]
    gold: dict[str, list[str]]


def _sentence(rng: np.random.Generator, words: list[str], n: int) -> str:
    picks = [words[int(i)] for i in rng.integers(0, len(words), size=n)]
    return " ".join(picks)


def _method_sentence(rng: np.random.Generator, canonical: str) -> str:
    surfaces = [canonical] + LEXICON[canonical]
    surface = surfaces[int(rng.integers(0, len(surfaces)))]
    templates = [
        f"We apply {surface} to the material.",
        f"The study relies on {surface} throughout.",
        f"Results were obtained with {surface}.",
    ]
    return templates[int(rng.integers(0, len(templates)))]


def pipeline_fixture(seed: int = PIPELINE_SEED) -> PipelineFixture:
    """The bundled 60-document corpus with planted year and duplicate rows.

    The raw export has 64 rows: 60 keepers (one planted with year 1992),
    one planted 1991 record that the default year filter drops, and three
    duplicate rows that the dedup cascade merges (one DOI duplicate, one
    exact-title duplicate, one single-edit fuzzy-title duplicate).
    """
    rng = np.random.default_rng(seed)
    theme_names = list(THEMES)
    rows: list[dict] = []
    candidates: dict[str, list[str]] = {}
    gold: dict[str, list[str]] = {}

    def make_doc(doc_id: str, theme: str, year: int) -> dict:
        words = THEMES[theme]
        preferred = THEME_METHODS[theme]
        n_methods = 1 + int(rng.integers(0, 2))
        methods = sorted(
            {preferred[int(i)] for i in rng.integers(0, len(preferred), size=n_methods)}
        )
        if rng.random() < 0.10:
            other = sorted(set(LEXICON) - set(methods))
            methods = sorted(set(methods) | {other[int(rng.integers(0, len(other)))]})
        title = _sentence(rng, words, 5 + int(rng.integers(0, 3))).capitalize()
        body = [
            _sentence(rng, words, 8 + int(rng.integers(0, 5))).capitalize() + "."
            for _ in range(4)
        ]
        for canonical in methods:
            body.insert(
                1 + int(rng.integers(0, 3)), _method_sentence(rng, canonical)
            )
        abstract = " ".join(body)
        authors = sorted(
            {
                f"{_SURNAMES[int(i)]}, {chr(65 + int(rng.integers(0, 26)))}."
                for i in rng.integers(0, len(_SURNAMES), size=2 + int(rng.integers(0, 2)))
            }
        )
        row = {
            "id": doc_id,
            "source": ["wos", "crossref", "dimensions", "generic"][int(rng.integers(0, 4))],
            "doi": f"10.5555/syn.{doc_id}" if rng.random() < 0.7 else None,
            "title": title,
            "abstract": abstract,
            "year": year,
            "venue": _VENUES[int(rng.integers(0, len(_VENUES)))],
            "authors": authors,
        }
        gold[doc_id] = methods
        cands = [
            (
                canonical
                if rng.random() < 0.6
                else ([canonical] + LEXICON[canonical])[
                    int(rng.integers(0, len(LEXICON[canonical]) + 1))
                ]
            )
            for canonical in methods
        ]
        cands.append(NOISE_CANDIDATES[int(rng.integers(0, len(NOISE_CANDIDATES)))])
        order = rng.permutation(len(cands))
        candidates[doc_id] = [cands[int(i)] for i in order]
        return row

    for i in range(59):
        theme = theme_names[i % len(theme_names)]
        year = 1993 + int(rng.integers(0, 30))
        rows.append(make_doc(f"doc-{i:03d}", theme, year))
    rows.append(make_doc("doc-y1992", theme_names[3], 1992))
    rows.append(make_doc("doc-y1991", theme_names[0], 1991))

    # planted duplicates of keeper rows; the DOI target must carry a DOI
    rows[3]["doi"] = "10.5555/syn.doc-003"
    doi_dup = dict(rows[3])
    doi_dup.update(
        id="dup-doi",
        title="An unrelated looking survey of digitization practice",
        abstract="Short stub.",
    )
    rows.append(doi_dup)

    title_dup = dict(rows[5])
    title_dup.update(
        id="dup-title",
        doi=None,
        title=rows[5]["title"].upper() + "!",
        abstract="Shorter abstract stub.",
    )
    rows.append(title_dup)

    fuzzy_title = rows[7]["title"]
    mid = len(fuzzy_title) // 2
    if fuzzy_title[mid] == "q":
        flipped = "x"
    else:
        flipped = "q"
    fuzzy_dup = dict(rows[7])
    fuzzy_dup.update(
        id="dup-fuzzy",
        doi=None,
        title=fuzzy_title[:mid] + flipped + fuzzy_title[mid + 1:],
        abstract="",
    )
    rows.append(fuzzy_dup)

    for planted in ("doc-y1991", "dup-doi", "dup-title", "dup-fuzzy"):
        candidates.pop(planted, None)
        gold.pop(planted, None)

    return PipelineFixture(
        raw_rows=rows,
        lexicon={k: list(v) for k, v in LEXICON.items()},
        candidates=candidates,
        gold=gold,
    )


def write_pipeline_fixture(fixture: PipelineFixture, out_dir: str | Path) -> None:
    """Materialize the fixture files consumed by the pipeline CLI."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "raw_export.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for row in fixture.raw_rows:
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False))
            fh.write("\n")
    with open(out_dir / "lexicon.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(fixture.lexicon, sort_keys=True, indent=2, ensure_ascii=False))
        fh.write("\n")
    with open(out_dir / "candidates.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for doc_id in sorted(fixture.candidates):
            fh.write(
                json.dumps(
                    {"doc_id": doc_id, "candidates": fixture.candidates[doc_id]},
                    sort_keys=True,
                    ensure_ascii=False,
                )
            )
            fh.write("\n")
    with open(out_dir / "gold.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for doc_id in sorted(fixture.gold):
            fh.write(
                json.dumps(
                    {"doc_id": doc_id, "methods": fixture.gold[doc_id]},
                    sort_keys=True,
                    ensure_ascii=False,
                )
            )
            fh.write("\n")


def two_cluster_corpus(
    n_docs: int = 100,
    seed: int = 11,
    vocab_size: int = 30,
    doc_len: tuple[int, int] = (8, 13),
) -> tuple[list[tuple[str, list[str]]], list[int]]:
    """Corpus drawn from two disjoint vocabularies, labels alternating.

    Documents are short on purpose: splitting a true cluster across extra
    topics then visibly hurts held-out likelihood, which keeps topic-count
    selection honest.
    """
    rng = np.random.default_rng(seed)
    vocabs = [
        [f"alpha{i:02d}" for i in range(vocab_size)],
        [f"beta{i:02d}" for i in range(vocab_size)],
    ]
    docs = []
    labels = []
    lo, hi = doc_len
    for i in range(n_docs):
        label = i % 2
        length = lo + int(rng.integers(0, hi - lo + 1))
        tokens = [vocabs[label][int(j)] for j in rng.integers(0, vocab_size, size=length)]
        docs.append((f"syn-{i:03d}", tokens))
        labels.append(label)
    return docs, labels


def pair_count_fixture(
    n_docs: int = 200, n_methods: int = 10, n_topics: int = 6, seed: int = 23
) -> tuple[dict[str, frozenset[str]], list[TopicAssignment]]:
    """Random extraction sets and topic assignments for count oracles.

    A few documents lack a topic assignment and a few lack methods, so the
    mismatched-universe paths are exercised too.
    """
    rng = np.random.default_rng(seed)
    methods = [f"m{i:02d}" for i in range(n_methods)]
    extractions: dict[str, frozenset[str]] = {}
    assignments: list[TopicAssignment] = []
    for i in range(n_docs):
        doc_id = f"d{i:04d}"
        n_m = int(rng.integers(0, 4))
        chosen = frozenset(methods[int(j)] for j in rng.integers(0, n_methods, size=n_m))
        if rng.random() > 0.05:  # ~5% of docs have no extraction entry
            extractions[doc_id] = chosen
        if rng.random() > 0.05:  # ~5% of docs lack a topic assignment
            assignments.append(
                TopicAssignment(doc_id=doc_id, topic_id=int(rng.integers(0, n_topics)))
            )
    return extractions, assignments
