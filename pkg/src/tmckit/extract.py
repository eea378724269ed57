"""Method-entity recognition against a curated lexicon.

Two recognition routes share one matcher:

* rule route — scan title+abstract for lexicon variants directly;
* gated route — take externally produced candidate mentions per document
  and standardize them through the lexicon, which acts as a precision gate.

Matching is case-insensitive, word-boundary aware and leftmost-longest,
with document-level set semantics (a method counts once per document).
"""

from __future__ import annotations

import csv
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import ConfigError, InputError
from .ingest import BiblioRecord
from .textnorm import norm_phrase, word_tokens

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MethodMention:
    doc_id: str
    canonical: str
    surface: str
    char_start: int
    char_end: int


@dataclass
class MethodLexicon:
    """Canonical method names with their normalized surface variants.

    Every canonical name is implicitly a variant of itself; a variant
    string may belong to exactly one canonical.
    """

    entries: dict[str, tuple[str, ...]]
    _variant_to_canonical: dict[str, str] = field(repr=False, default_factory=dict)
    _by_first_token: dict[str, list[tuple[tuple[str, ...], str]]] = field(
        repr=False, default_factory=dict
    )

    def __post_init__(self):
        if not self.entries:
            raise InputError("lexicon is empty")
        v2c: dict[str, str] = {}
        for canonical in sorted(self.entries):
            variants = set(self.entries[canonical]) | {norm_phrase(canonical)}
            for var in sorted(variants):
                var = norm_phrase(var)
                if not var:
                    continue
                owner = v2c.get(var)
                if owner is not None and owner != canonical:
                    raise InputError(
                        f"ambiguous lexicon variant {var!r}: "
                        f"claimed by both {owner!r} and {canonical!r}"
                    )
                v2c[var] = canonical
        self._variant_to_canonical = v2c
        index: dict[str, list[tuple[tuple[str, ...], str]]] = defaultdict(list)
        for var, canonical in v2c.items():
            toks = tuple(t for t, _, _ in word_tokens(var))
            if toks:
                index[toks[0]].append((toks, canonical))
        for bucket in index.values():
            bucket.sort(key=lambda item: (-len(item[0]), item[0]))
        self._by_first_token = dict(index)

    @property
    def variant_count(self) -> int:
        return len(self._variant_to_canonical)

    def lookup_exact(self, phrase: str) -> str | None:
        """Canonical for an exact (normalized) variant, else None."""
        return self._variant_to_canonical.get(norm_phrase(phrase))

    def scan(self, text: str) -> list[tuple[str, int, int]]:
        """Leftmost-longest non-overlapping variant matches over ``text``.

        Returns (canonical, char_start, char_end) with offsets into ``text``.
        Word boundaries are token boundaries: variants only match whole
        alphanumeric tokens, so "lda" matches inside "LDA-based" but not
        inside "holdall".
        """
        tokens = word_tokens(text)
        matches: list[tuple[str, int, int]] = []
        pos = 0
        while pos < len(tokens):
            tok = tokens[pos][0]
            hit = None
            for var_toks, canonical in self._by_first_token.get(tok, ()):
                if len(var_toks) <= len(tokens) - pos and all(
                    tokens[pos + k][0] == var_toks[k] for k in range(len(var_toks))
                ):
                    hit = (canonical, len(var_toks))
                    break  # bucket is longest-first
            if hit is None:
                pos += 1
            else:
                canonical, width = hit
                start = tokens[pos][1]
                end = tokens[pos + width - 1][2]
                matches.append((canonical, start, end))
                pos += width
        return matches


def compile_lexicon(path: str | Path) -> MethodLexicon:
    """Load a lexicon from a JSON object {canonical: [variants...]} or a
    two-column CSV (canonical, variant)."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"lexicon file not found: {path}")
    entries: dict[str, set[str]] = defaultdict(set)
    if path.suffix.lower() == ".csv":
        with open(path, encoding="utf-8", newline="") as fh:
            for row_no, row in enumerate(csv.reader(fh), start=1):
                if not row or not row[0].strip():
                    continue
                canonical = row[0].strip()
                entries.setdefault(canonical, set())
                if len(row) > 1 and row[1].strip():
                    entries[canonical].add(norm_phrase(row[1]))
    else:
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InputError(f"lexicon {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise InputError(f"lexicon {path} must be a JSON object")
        for canonical, variants in data.items():
            entries[str(canonical)] = {norm_phrase(str(v)) for v in variants}
    return MethodLexicon(
        entries={c: tuple(sorted(v - {""})) for c, v in entries.items()}
    )


@dataclass
class RuleExtraction:
    doc_id: str
    canonicals: frozenset[str]
    mentions: list[MethodMention]


def rule_extract(doc: BiblioRecord, lexicon: MethodLexicon) -> RuleExtraction:
    """Find lexicon methods in a document's title+abstract text."""
    text = doc.text()
    mentions = [
        MethodMention(
            doc_id=doc.id,
            canonical=canonical,
            surface=text[start:end],
            char_start=start,
            char_end=end,
        )
        for canonical, start, end in lexicon.scan(text)
    ]
    return RuleExtraction(
        doc_id=doc.id,
        canonicals=frozenset(m.canonical for m in mentions),
        mentions=mentions,
    )


@dataclass
class CandidateImport:
    candidates: dict[str, list[str]]
    rejects: list[tuple[int, str]] = field(default_factory=list)
    unknown_doc_ids: list[str] = field(default_factory=list)


def import_candidates(
    path: str | Path, known_ids: set[str] | None = None
) -> CandidateImport:
    """Read JSON Lines of {doc_id, candidates: [...]} produced offline.

    Candidate order and duplicates are preserved; when ``known_ids`` is
    given, doc_ids outside it are kept but listed in ``unknown_doc_ids``.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"candidates file not found: {path}")
    out = CandidateImport(candidates={})
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                doc_id = str(obj["doc_id"])
                cands = [str(c) for c in obj["candidates"]]
            except (json.JSONDecodeError, KeyError, TypeError):
                out.rejects.append((line_no, "malformed candidate line"))
                continue
            out.candidates.setdefault(doc_id, []).extend(cands)
            if known_ids is not None and doc_id not in known_ids:
                out.unknown_doc_ids.append(doc_id)
    if out.unknown_doc_ids:
        logger.warning(
            "%d candidate doc ids not present in the corpus", len(out.unknown_doc_ids)
        )
    return out


@dataclass
class StandardizeResult:
    per_doc: dict[str, frozenset[str]]
    unmapped: dict[str, list[str]] = field(default_factory=dict)


def standardize_candidates(
    candidates: Mapping[str, list[str]],
    lexicon: MethodLexicon,
    keep_unmapped: bool = False,
) -> StandardizeResult:
    """Map raw candidate strings onto canonical method names.

    Each candidate is normalized and looked up as an exact variant; on a
    miss it is scanned for embedded variants (leftmost-longest). Candidates
    that still map to nothing are dropped and reported, or kept under their
    normalized form as provisional canonicals when ``keep_unmapped`` is set.
    """
    result = StandardizeResult(per_doc={})
    for doc_id in candidates:
        mapped: set[str] = set()
        misses: list[str] = []
        for raw in candidates[doc_id]:
            canonical = lexicon.lookup_exact(raw)
            if canonical is not None:
                mapped.add(canonical)
                continue
            hits = lexicon.scan(norm_phrase(raw))
            if hits:
                mapped.update(canonical for canonical, _, _ in hits)
                continue
            misses.append(raw)
            if keep_unmapped:
                provisional = norm_phrase(raw)
                if provisional:
                    mapped.add(provisional)
        result.per_doc[doc_id] = frozenset(mapped)
        if misses:
            result.unmapped[doc_id] = misses
    return result


def llmrule_extract(
    doc: BiblioRecord,
    candidates: list[str] | None,
    lexicon: MethodLexicon,
    fallback_rule: bool = False,
    keep_unmapped: bool = False,
) -> frozenset[str]:
    """Two-stage recognition: candidate list filtered through the lexicon.

    In strict mode a document with no candidates yields the empty set; with
    ``fallback_rule`` the direct rule-route extraction is unioned in.
    """
    if candidates:
        std = standardize_candidates(
            {doc.id: list(candidates)}, lexicon, keep_unmapped=keep_unmapped
        )
        found = set(std.per_doc.get(doc.id, frozenset()))
    else:
        found = set()
    if fallback_rule:
        found |= rule_extract(doc, lexicon).canonicals
    return frozenset(found)


@dataclass
class ExtractionEval:
    """Micro-averaged document-level precision/recall/F1 (percent)."""

    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    unknown_docs: tuple[str, ...] = ()

    @classmethod
    def from_counts(
        cls, tp: int, fp: int, fn: int, unknown_docs: tuple[str, ...] = ()
    ) -> "ExtractionEval":
        precision = 100.0 * tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = 100.0 * tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = harmonic_f1(precision, recall)
        return cls(tp, fp, fn, precision, recall, f1, unknown_docs)

    def summary(self) -> str:
        return (
            f"P={self.precision:.2f} R={self.recall:.2f} F1={self.f1:.2f} "
            f"(tp={self.tp} fp={self.fp} fn={self.fn})"
        )


def harmonic_f1(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if precision + recall <= 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def evaluate_extraction(
    predicted: Mapping[str, Iterable[str]], gold: Mapping[str, Iterable[str]]
) -> ExtractionEval:
    """Score predictions against gold sets, micro-averaged over (doc, method) pairs.

    Documents predicted but absent from gold count against precision and are
    flagged; documents in gold with no prediction contribute false negatives.
    """
    if not gold:
        raise ConfigError("gold annotations are empty")
    tp = fp = fn = 0
    unknown = []
    for doc_id in sorted(set(predicted) | set(gold)):
        pred = set(predicted.get(doc_id, ()))
        gold_set = set(gold.get(doc_id, ()))
        if doc_id not in gold:
            unknown.append(doc_id)
        tp += len(pred & gold_set)
        fp += len(pred - gold_set)
        fn += len(gold_set - pred)
    if unknown:
        logger.warning("%d predicted doc ids missing from gold", len(unknown))
    return ExtractionEval.from_counts(tp, fp, fn, unknown_docs=tuple(unknown))


def write_methods(per_doc: Mapping[str, Iterable[str]], path: str | Path) -> None:
    """Write per-document method sets as JSON Lines {doc_id, methods:[...]}."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc_id in sorted(per_doc):
            row = {"doc_id": doc_id, "methods": sorted(per_doc[doc_id])}
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False))
            fh.write("\n")


def read_methods(path: str | Path) -> dict[str, frozenset[str]]:
    """Read a methods/gold JSON Lines file into doc_id -> set of canonicals."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"methods file not found: {path}")
    out: dict[str, frozenset[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                out[str(obj["doc_id"])] = frozenset(str(m) for m in obj["methods"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise InputError(f"{path}:{line_no}: malformed methods row: {exc}") from exc
    return out
