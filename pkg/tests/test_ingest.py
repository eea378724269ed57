import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tmckit.errors import ConfigError, InputError
from tmckit.ingest import (
    BiblioRecord,
    corpus_stats,
    deduplicate,
    filter_by_year,
    normalize_record,
    parse_records,
    read_corpus,
    write_corpus,
)
from tmckit.textnorm import levenshtein, levenshtein_similarity, title_match_key


def rec(**kwargs) -> BiblioRecord:
    base = dict(
        id="r1",
        source="generic",
        doi=None,
        title="A title",
        abstract="",
        year=2000,
        venue=None,
        authors=(),
    )
    base.update(kwargs)
    return BiblioRecord(**base)


# ---- parsing ----


def test_parse_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("", encoding="utf-8")
    result = parse_records(path, "jsonl")
    assert result.records == []
    assert result.rejects == []


def test_parse_jsonl_roundtrip(tmp_path):
    rows = [
        {"id": "a", "title": "First", "abstract": "x", "year": 1999, "authors": ["P, Q."]},
        {"id": "b", "title": "Second", "year": 2001, "doi": "10.1/b"},
        {"id": "c", "title": "Third", "year": 2010, "source": "wos"},
    ]
    path = tmp_path / "rows.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in rows), encoding="utf-8")
    result = parse_records(path, "jsonl")
    assert len(result.records) == 3 and not result.rejects
    assert result.records[0].title == "First"
    assert result.records[0].authors == ("P, Q.",)
    assert result.records[1].doi == "10.1/b"
    assert result.records[2].source == "wos"


def test_parse_csv_bad_year_rejected(tmp_path):
    path = tmp_path / "rows.csv"
    path.write_text(
        "id,title,year\nr1,Fine title,20x2\n", encoding="utf-8"
    )
    result = parse_records(path, "csv")
    assert result.records == []
    assert len(result.rejects) == 1
    assert result.rejects[0].reason == "bad year"


def test_parse_missing_title_and_doi_rejected(tmp_path):
    path = tmp_path / "rows.jsonl"
    path.write_text(json.dumps({"id": "x", "year": 2000}), encoding="utf-8")
    result = parse_records(path, "jsonl")
    assert not result.records
    assert result.rejects[0].reason == "missing title and doi"


def test_parse_counts_add_up(tmp_path):
    lines = [
        json.dumps({"id": "a", "title": "ok", "year": 2000}),
        "not json at all",
        json.dumps({"id": "b", "year": 2000}),  # no title/doi
        json.dumps({"id": "c", "title": "ok", "year": 99}),  # out of range
        json.dumps({"id": "d", "title": "ok", "year": 2001}),
    ]
    path = tmp_path / "rows.jsonl"
    path.write_text("\n".join(lines), encoding="utf-8")
    result = parse_records(path, "jsonl")
    assert len(result.records) + len(result.rejects) == 5
    assert len(result.records) == 2


def test_parse_wos_tab(tmp_path):
    path = tmp_path / "export.txt"
    path.write_text(
        "UT\tTI\tAB\tPY\tSO\tAU\tDI\tXX\n"
        "WOS:1\tMapping things\tAn abstract\t2005\tSome Venue\tA, B.; C, D.\t10.9/z\tignored\n",
        encoding="utf-8",
    )
    result = parse_records(path, "wos_tab")
    assert len(result.records) == 1
    r = result.records[0]
    assert r.id == "WOS:1" and r.year == 2005 and r.source == "wos"
    assert r.doi == "10.9/z" and r.venue == "Some Venue"
    assert r.authors == ("A, B.", "C, D.")


def test_parse_unknown_format_and_missing_file(tmp_path):
    path = tmp_path / "x.jsonl"
    path.write_text("", encoding="utf-8")
    with pytest.raises(ConfigError):
        parse_records(path, "bibtex")
    with pytest.raises(InputError):
        parse_records(tmp_path / "nope.jsonl", "jsonl")


# ---- normalization ----


def test_normalize_doi_prefix_and_case():
    r = normalize_record(rec(doi="HTTPS://DOI.ORG/10.1000/ABC "))
    assert r.doi == "10.1000/abc"


def test_normalize_title_whitespace():
    assert normalize_record(rec(title="A  B\tC")).title == "A B C"


def test_normalize_idempotent():
    r = normalize_record(rec(doi="10.1000/abc", title="A B C", authors=("X",)))
    assert normalize_record(r) == r


def test_normalize_drops_non_doi():
    assert normalize_record(rec(doi="not-a-doi")).doi is None


# ---- year filter ----


def test_filter_by_year_boundaries():
    records = [rec(id="a", year=1991), rec(id="b", year=1992), rec(id="c", year=2022), rec(id="d", year=2023)]
    kept = filter_by_year(records)
    assert [r.id for r in kept] == ["b", "c"]


def test_filter_by_year_empty_and_idempotent():
    assert filter_by_year([]) == []
    records = [rec(id=str(i), year=1990 + i) for i in range(40)]
    once = filter_by_year(records, 1995, 2005)
    assert filter_by_year(once, 1995, 2005) == once


def test_filter_by_year_bad_bounds():
    with pytest.raises(ConfigError):
        filter_by_year([], 2000, 1999)


# ---- dedup ----


def test_dedup_doi_exact():
    a = rec(id="a", doi="10.1000/x", abstract="long abstract here")
    b = rec(id="b", doi="10.1000/x", title="Entirely different", year=1998)
    kept, report = deduplicate([a, b])
    assert [r.id for r in kept] == ["a"]
    assert report.merges[0].reason == "doi_exact"
    assert report.output_count == report.input_count - len(report.merges) == 1


def test_dedup_title_exact_case_punct():
    a = rec(id="a", title="Text mining in DH!", year=2001, abstract="longer one")
    b = rec(id="b", title="text mining in dh", year=2001)
    kept, report = deduplicate([a, b])
    assert [r.id for r in kept] == ["a"]
    assert report.merges[0].reason == "title_exact"


def test_dedup_title_fuzzy_one_edit():
    t1 = "analysis of twenty chars"  # key length 24
    t2 = "analysis of twanty chars"
    key1, key2 = title_match_key(t1), title_match_key(t2)
    assert levenshtein(key1, key2) == 1
    assert levenshtein_similarity(key1, key2) >= 0.9
    a = rec(id="a", title=t1, year=2001, abstract="keep me, longest")
    b = rec(id="b", title=t2, year=2001)
    kept, report = deduplicate([a, b])
    assert [r.id for r in kept] == ["a"]
    assert report.merges[0].reason == "title_fuzzy"


def test_dedup_fuzzy_requires_same_year():
    a = rec(id="a", title="analysis of twenty chars", year=2001)
    b = rec(id="b", title="analysis of twanty chars", year=2002)
    kept, _ = deduplicate([a, b])
    assert len(kept) == 2


def test_dedup_idempotent_and_order_insensitive():
    records = [
        rec(id="a", doi="10.1/x", abstract="aa"),
        rec(id="b", doi="10.1/x"),
        rec(id="c", title="Shared name", year=2000),
        rec(id="d", title="shared NAME!", year=2000),
        rec(id="e", title="completely different title", year=2000),
    ]
    kept, report = deduplicate(records)
    kept_ids = {r.id for r in kept}
    again, report2 = deduplicate(kept)
    assert report2.merges == []
    rng = random.Random(5)
    for _ in range(5):
        shuffled = records[:]
        rng.shuffle(shuffled)
        kept_s, _ = deduplicate(shuffled)
        assert {r.id for r in kept_s} == kept_ids


def test_dedup_threshold_validation():
    with pytest.raises(ConfigError):
        deduplicate([], title_sim_threshold=1.5)


def test_dedup_never_increases_count():
    records = [rec(id=str(i), title=f"title {i}", year=2000) for i in range(10)]
    kept, _ = deduplicate(records)
    assert len(kept) <= len(records)


@settings(max_examples=25, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.sampled_from(["10.1/x", "10.1/y", None]),
            st.sampled_from(["alpha beta gamma", "delta epsilon zeta", "eta theta iota"]),
            st.integers(min_value=1999, max_value=2001),
        ),
        max_size=8,
    )
)
def test_dedup_idempotence_property(rows):
    records = [
        rec(id=f"r{i}", doi=doi, title=title, year=year, abstract="x" * i)
        for i, (doi, title, year) in enumerate(rows)
    ]
    kept, report = deduplicate(records)
    assert report.output_count == report.input_count - len(report.merges)
    removed = [m.removed_id for m in report.merges]
    assert len(removed) == len(set(removed))
    kept2, report2 = deduplicate(kept)
    assert report2.merges == [] and len(kept2) == len(kept)


# ---- stats / io ----


def test_corpus_stats_empty():
    stats = corpus_stats([])
    assert stats.count == 0 and stats.per_year == {} and stats.per_source == {}


def test_corpus_stats_counting():
    records = [rec(id="a", year=1992), rec(id="b", year=1992), rec(id="c", year=2000)]
    stats = corpus_stats(records)
    assert stats.per_year == {1992: 2, 2000: 1}
    assert sum(stats.per_source.values()) == stats.count == 3


def test_corpus_roundtrip(tmp_path):
    records = [
        rec(id="a", doi="10.1/a", venue="V", authors=("X", "Y"), abstract="body"),
        rec(id="b", year=2010),
    ]
    path = tmp_path / "corpus.jsonl"
    write_corpus(records, path)
    assert read_corpus(path) == records
