"""Bibliographic ingest: parse export files, filter by year, deduplicate.

Three export formats are supported (jsonl, csv, wos_tab); all of them are
mapped onto the same canonical record. Deduplication runs a three-stage
cascade: exact DOI, exact normalized title + year, fuzzy title + year.
"""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

from .errors import ConfigError, InputError
from .textnorm import collapse_ws, levenshtein_similarity, title_match_key

logger = logging.getLogger(__name__)

SOURCES = ("wos", "crossref", "dimensions", "generic")
YEAR_MIN_DEFAULT = 1992
YEAR_MAX_DEFAULT = 2022
TITLE_SIM_DEFAULT = 0.90

# Column mapping for tab-separated Web of Science exports. Unknown columns
# are ignored; AU is a "; "-separated author list.
WOS_TAB_COLUMNS = {
    "UT": "id",
    "DI": "doi",
    "TI": "title",
    "AB": "abstract",
    "PY": "year",
    "SO": "venue",
    "AU": "authors",
}

_DOI_PREFIXES = (
    "https://doi.org/",
    "http://doi.org/",
    "https://dx.doi.org/",
    "http://dx.doi.org/",
    "doi:",
)


@dataclass(frozen=True)
class BiblioRecord:
    """One cleaned bibliographic document."""

    id: str
    source: str
    doi: str | None
    title: str
    abstract: str
    year: int
    venue: str | None = None
    authors: tuple[str, ...] = ()

    def text(self) -> str:
        """The searchable text buffer: title + " " + abstract."""
        return f"{self.title} {self.abstract}"

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "source": self.source,
            "doi": self.doi,
            "title": self.title,
            "abstract": self.abstract,
            "year": self.year,
            "venue": self.venue,
            "authors": list(self.authors),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BiblioRecord":
        return cls(
            id=str(d["id"]),
            source=d.get("source") or "generic",
            doi=d.get("doi") or None,
            title=d.get("title") or "",
            abstract=d.get("abstract") or "",
            year=int(d["year"]),
            venue=d.get("venue") or None,
            authors=tuple(d.get("authors") or ()),
        )


@dataclass(frozen=True)
class RejectedRow:
    line: int
    reason: str


@dataclass
class ParseResult:
    """Parsed records plus an audit trail of rejected rows."""

    records: list[BiblioRecord]
    rejects: list[RejectedRow] = field(default_factory=list)


@dataclass(frozen=True)
class Merge:
    kept_id: str
    removed_id: str
    reason: str  # doi_exact | title_exact | title_fuzzy


@dataclass
class DedupReport:
    input_count: int
    output_count: int
    merges: list[Merge]

    def to_dict(self) -> dict:
        return {
            "input_count": self.input_count,
            "output_count": self.output_count,
            "merges": [
                {"kept_id": m.kept_id, "removed_id": m.removed_id, "reason": m.reason}
                for m in self.merges
            ],
        }


@dataclass
class CorpusStats:
    count: int
    per_year: dict[int, int]
    per_source: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "per_year": {str(k): v for k, v in sorted(self.per_year.items())},
            "per_source": dict(sorted(self.per_source.items())),
        }


def _parse_year(raw) -> int:
    if raw is None:
        raise ValueError("missing year")
    if isinstance(raw, bool):
        raise ValueError("bad year")
    if isinstance(raw, int):
        year = raw
    elif isinstance(raw, float) and raw.is_integer():
        year = int(raw)
    else:
        text = str(raw).strip()
        if not text:
            raise ValueError("missing year")
        if not text.lstrip("-").isdigit():
            raise ValueError("bad year")
        year = int(text)
    if not 1000 <= year <= 3000:
        raise ValueError("bad year")
    return year


def _normalize_doi(raw: str | None) -> str | None:
    if raw is None:
        return None
    doi = str(raw).strip().lower()
    for prefix in _DOI_PREFIXES:
        if doi.startswith(prefix):
            doi = doi[len(prefix):]
            break
    doi = doi.strip()
    if not doi.startswith("10."):
        return None
    return doi


def _build_record(raw: dict, row_no: int, default_source: str) -> BiblioRecord:
    """Build a record from a loosely-typed field dict; raises ValueError on bad rows."""
    title = collapse_ws(str(raw.get("title") or ""))
    doi = _normalize_doi(raw.get("doi"))
    if not title and not doi:
        raise ValueError("missing title and doi")
    year = _parse_year(raw.get("year"))
    source = str(raw.get("source") or default_source).strip().lower()
    if source not in SOURCES:
        source = "generic"
    authors_raw = raw.get("authors") or ()
    if isinstance(authors_raw, str):
        authors_raw = [a for a in authors_raw.split(";")]
    authors = tuple(a.strip() for a in authors_raw if str(a).strip())
    rec_id = raw.get("id")
    if rec_id is None or str(rec_id).strip() == "":
        # row-derived fallback keeps ids unique even when DOIs repeat
        rec_id = f"{source}-{row_no:05d}"
    venue = raw.get("venue")
    venue = collapse_ws(str(venue)) if venue else None
    abstract = str(raw.get("abstract") or "")
    return BiblioRecord(
        id=str(rec_id).strip(),
        source=source,
        doi=doi,
        title=title,
        abstract=abstract,
        year=year,
        venue=venue,
        authors=authors,
    )


def _iter_jsonl_rows(path: Path) -> Iterable[tuple[int, dict | None, str | None]]:
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                yield line_no, None, "bad json"
                continue
            if not isinstance(obj, dict):
                yield line_no, None, "bad json"
                continue
            yield line_no, obj, None


def parse_records(path: str | Path, format: str) -> ParseResult:
    """Parse one export file into canonical records.

    Malformed rows land in the rejects list instead of being dropped, so
    `len(records) + len(rejects)` equals the number of data rows read.
    """
    path = Path(path)
    if format not in ("jsonl", "csv", "wos_tab"):
        raise ConfigError(f"unknown input format: {format!r}")
    if not path.is_file():
        raise InputError(f"input file not found: {path}")

    result = ParseResult(records=[], rejects=[])
    seen_ids: set[str] = set()

    def accept(raw: dict, row_no: int, default_source: str) -> None:
        try:
            rec = _build_record(raw, row_no, default_source)
        except ValueError as exc:
            result.rejects.append(RejectedRow(line=row_no, reason=str(exc)))
            return
        if rec.id in seen_ids:
            result.rejects.append(RejectedRow(line=row_no, reason="duplicate id"))
            return
        seen_ids.add(rec.id)
        result.records.append(rec)

    try:
        if format == "jsonl":
            for line_no, obj, err in _iter_jsonl_rows(path):
                if err:
                    result.rejects.append(RejectedRow(line=line_no, reason=err))
                else:
                    accept(obj, line_no, "generic")
        elif format == "csv":
            with open(path, encoding="utf-8", newline="") as fh:
                reader = csv.DictReader(fh)
                for row_no, row in enumerate(reader, start=2):  # 1 = header
                    accept({k: v for k, v in row.items() if k}, row_no, "generic")
        else:  # wos_tab
            with open(path, encoding="utf-8", newline="") as fh:
                reader = csv.DictReader(fh, delimiter="\t")
                for row_no, row in enumerate(reader, start=2):
                    mapped = {
                        WOS_TAB_COLUMNS[col]: val
                        for col, val in row.items()
                        if col in WOS_TAB_COLUMNS
                    }
                    accept(mapped, row_no, "wos")
    except UnicodeDecodeError as exc:
        raise InputError(f"{path} is not valid UTF-8: {exc}") from exc
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc

    return result


def normalize_record(r: BiblioRecord) -> BiblioRecord:
    """Normalize doi/title/authors in place-free fashion; idempotent."""
    return replace(
        r,
        doi=_normalize_doi(r.doi),
        title=collapse_ws(r.title),
        authors=tuple(a.strip() for a in r.authors if a.strip()),
    )


def filter_by_year(
    records: list[BiblioRecord],
    min_year: int = YEAR_MIN_DEFAULT,
    max_year: int = YEAR_MAX_DEFAULT,
) -> list[BiblioRecord]:
    """Keep records with min_year <= year <= max_year (both inclusive)."""
    if min_year > max_year:
        raise ConfigError(f"min_year {min_year} > max_year {max_year}")
    return [r for r in records if min_year <= r.year <= max_year]


def _keep_order(records: Iterable[BiblioRecord]) -> list[BiblioRecord]:
    """Pick the record to keep from a duplicate group: longest abstract, then smaller id."""
    return sorted(records, key=lambda r: (-len(r.abstract), r.id))


def _merge_groups(
    groups: Iterable[list[BiblioRecord]], reason: str, merges: list[Merge]
) -> set[str]:
    """Record merges for every multi-record group; returns the removed ids."""
    removed: set[str] = set()
    for group in groups:
        if len(group) < 2:
            continue
        ordered = _keep_order(group)
        kept = ordered[0]
        for loser in ordered[1:]:
            merges.append(Merge(kept_id=kept.id, removed_id=loser.id, reason=reason))
            removed.add(loser.id)
    return removed


def deduplicate(
    records: list[BiblioRecord], title_sim_threshold: float = TITLE_SIM_DEFAULT
) -> tuple[list[BiblioRecord], DedupReport]:
    """Merge duplicate records via the doi / exact-title / fuzzy-title cascade.

    Stage a: identical non-empty DOI.
    Stage b: identical normalized title and same year.
    Stage c: normalized-Levenshtein title similarity >= threshold and same year.

    The kept record of each group is the one with the longer abstract (ties
    broken by smaller id). Output order follows input order of the kept
    records; re-running on the output produces zero merges.
    """
    if not 0.0 <= title_sim_threshold <= 1.0:
        raise ConfigError(
            f"title similarity threshold must be in [0,1], got {title_sim_threshold}"
        )
    merges: list[Merge] = []
    survivors = list(records)

    # stage a: doi
    by_doi: dict[str, list[BiblioRecord]] = defaultdict(list)
    for rec in survivors:
        if rec.doi:
            by_doi[rec.doi].append(rec)
    removed = _merge_groups(
        (by_doi[k] for k in sorted(by_doi)), "doi_exact", merges
    )
    survivors = [r for r in survivors if r.id not in removed]

    # stage b: exact normalized title + year
    by_title: dict[tuple[str, int], list[BiblioRecord]] = defaultdict(list)
    for rec in survivors:
        key = title_match_key(rec.title)
        if key:
            by_title[(key, rec.year)].append(rec)
    removed = _merge_groups(
        (by_title[k] for k in sorted(by_title)), "title_exact", merges
    )
    survivors = [r for r in survivors if r.id not in removed]

    # stage c: fuzzy title + year, transitive closure via union-find
    by_year: dict[int, list[BiblioRecord]] = defaultdict(list)
    for rec in survivors:
        by_year[rec.year].append(rec)
    parent: dict[str, str] = {r.id: r.id for r in survivors}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for year in sorted(by_year):
        group = sorted(by_year[year], key=lambda r: r.id)
        keys = {r.id: title_match_key(r.title) for r in group}
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                a, b = group[i], group[j]
                if not keys[a.id] or not keys[b.id]:
                    continue
                if levenshtein_similarity(keys[a.id], keys[b.id]) >= title_sim_threshold:
                    ra, rb = find(a.id), find(b.id)
                    if ra != rb:
                        parent[max(ra, rb)] = min(ra, rb)

    clusters: dict[str, list[BiblioRecord]] = defaultdict(list)
    for rec in survivors:
        clusters[find(rec.id)].append(rec)
    removed = _merge_groups(
        (clusters[k] for k in sorted(clusters)), "title_fuzzy", merges
    )
    survivors = [r for r in survivors if r.id not in removed]

    report = DedupReport(
        input_count=len(records), output_count=len(survivors), merges=merges
    )
    return survivors, report


def corpus_stats(records: list[BiblioRecord]) -> CorpusStats:
    """Record count plus per-year and per-source tallies."""
    per_year = Counter(r.year for r in records)
    per_source = Counter(r.source for r in records)
    return CorpusStats(
        count=len(records), per_year=dict(per_year), per_source=dict(per_source)
    )


def write_corpus(records: Iterable[BiblioRecord], path: str | Path) -> None:
    """Write the canonical JSON Lines corpus file."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True, ensure_ascii=False))
            fh.write("\n")


def read_corpus(path: str | Path) -> list[BiblioRecord]:
    """Read a canonical JSON Lines corpus file."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"corpus file not found: {path}")
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(BiblioRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise InputError(f"{path}:{line_no}: malformed corpus row: {exc}") from exc
    return records
