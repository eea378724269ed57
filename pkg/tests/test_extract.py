import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tmckit.errors import ConfigError, InputError
from tmckit.extract import (
    MethodLexicon,
    compile_lexicon,
    evaluate_extraction,
    harmonic_f1,
    import_candidates,
    llmrule_extract,
    read_methods,
    rule_extract,
    standardize_candidates,
    write_methods,
)
from tmckit.ingest import BiblioRecord


def doc(doc_id="d1", title="", abstract="", year=2000) -> BiblioRecord:
    return BiblioRecord(
        id=doc_id, source="generic", doi=None, title=title, abstract=abstract, year=year
    )


@pytest.fixture
def lexicon(tmp_path):
    data = {
        "topic modeling": ["lda", "latent dirichlet allocation"],
        "gis": [],
        "social network analysis": ["sna", "network analysis"],
        "dirichlet processes": ["dirichlet"],
    }
    path = tmp_path / "lex.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return compile_lexicon(path)


# ---- lexicon ----


def test_lexicon_self_variant(tmp_path):
    path = tmp_path / "lex.json"
    path.write_text(
        json.dumps({"topic modeling": ["lda", "latent dirichlet allocation"]}),
        encoding="utf-8",
    )
    lex = compile_lexicon(path)
    assert lex.variant_count == 3
    assert lex.lookup_exact("topic modeling") == "topic modeling"


def test_lexicon_ambiguous_variant(tmp_path):
    path = tmp_path / "lex.json"
    path.write_text(
        json.dumps({"support vector machines": ["svm"], "state vector model": ["svm"]}),
        encoding="utf-8",
    )
    with pytest.raises(InputError) as err:
        compile_lexicon(path)
    assert "support vector machines" in str(err.value)
    assert "state vector model" in str(err.value)


def test_lexicon_variant_normalization():
    lex = MethodLexicon(entries={"topic modeling": (" Topic   Modeling ",)})
    assert lex.lookup_exact("topic modeling") == "topic modeling"
    assert lex.variant_count == 1  # normalizes onto the self-variant


def test_lexicon_empty_fatal(tmp_path):
    path = tmp_path / "lex.json"
    path.write_text("{}", encoding="utf-8")
    with pytest.raises(InputError):
        compile_lexicon(path)


def test_lexicon_csv_format(tmp_path):
    path = tmp_path / "lex.csv"
    path.write_text("topic modeling,lda\ntopic modeling,topic models\ngis,\n", encoding="utf-8")
    lex = compile_lexicon(path)
    assert lex.lookup_exact("LDA") == "topic modeling"
    assert lex.lookup_exact("gis") == "gis"


# ---- rule extraction ----


def test_rule_extract_basic(lexicon):
    d = doc(abstract="we apply LDA and GIS")
    result = rule_extract(d, lexicon)
    assert result.canonicals == {"topic modeling", "gis"}


def test_rule_extract_empty(lexicon):
    assert rule_extract(doc(), lexicon).canonicals == frozenset()


def test_rule_extract_longest_match_wins(lexicon):
    # "latent dirichlet allocation" (3 tokens) beats "dirichlet" (1 token)
    d = doc(abstract="latent dirichlet allocation")
    result = rule_extract(d, lexicon)
    assert result.canonicals == {"topic modeling"}


def test_rule_extract_word_boundaries(lexicon):
    # "lda" inside "LDA-based" matches (hyphen is a boundary), but not inside a word
    assert rule_extract(doc(abstract="LDA-based models"), lexicon).canonicals == {
        "topic modeling"
    }
    assert rule_extract(doc(abstract="glsdaq holdall"), lexicon).canonicals == frozenset()


def test_rule_extract_mention_offsets(lexicon):
    d = doc(title="On GIS", abstract="we use Latent  Dirichlet Allocation daily")
    result = rule_extract(d, lexicon)
    text = d.text()
    for m in result.mentions:
        assert m.char_start < m.char_end
        assert text[m.char_start:m.char_end] == m.surface
    surfaces = {m.surface for m in result.mentions}
    assert "Latent  Dirichlet Allocation" in surfaces
    assert "GIS" in surfaces


def test_rule_extract_case_invariance(lexicon):
    d1 = doc(abstract="We Apply LDA and gis")
    d2 = doc(abstract="we apply lda AND GIS")
    assert rule_extract(d1, lexicon).canonicals == rule_extract(d2, lexicon).canonicals


def test_rule_extract_duplication_invariance(lexicon):
    base = "we apply lda to maps. "
    d1 = doc(abstract=base)
    d2 = doc(abstract=base * 3)
    assert rule_extract(d1, lexicon).canonicals == rule_extract(d2, lexicon).canonicals


def test_rule_extract_deterministic(lexicon):
    d = doc(abstract="sna with network analysis and lda")
    m1 = rule_extract(d, lexicon).mentions
    m2 = rule_extract(d, lexicon).mentions
    assert m1 == m2


# ---- candidates ----


def test_import_candidates_roundtrip(tmp_path):
    path = tmp_path / "cands.jsonl"
    path.write_text(
        json.dumps({"doc_id": "d1", "candidates": ["LDA", "social network analysis"]}),
        encoding="utf-8",
    )
    imported = import_candidates(path)
    assert imported.candidates == {"d1": ["LDA", "social network analysis"]}
    assert imported.rejects == []


def test_import_candidates_empty(tmp_path):
    path = tmp_path / "cands.jsonl"
    path.write_text("", encoding="utf-8")
    assert import_candidates(path).candidates == {}


def test_import_candidates_duplicates_preserved(tmp_path, lexicon):
    path = tmp_path / "cands.jsonl"
    path.write_text(
        json.dumps({"doc_id": "d1", "candidates": ["lda", "lda", "LDA"]}), encoding="utf-8"
    )
    imported = import_candidates(path)
    assert len(imported.candidates["d1"]) == 3
    std = standardize_candidates(imported.candidates, lexicon)
    assert std.per_doc["d1"] == {"topic modeling"}


def test_import_candidates_unknown_ids_flagged(tmp_path):
    path = tmp_path / "cands.jsonl"
    path.write_text(json.dumps({"doc_id": "ghost", "candidates": ["x"]}), encoding="utf-8")
    imported = import_candidates(path, known_ids={"d1"})
    assert imported.unknown_doc_ids == ["ghost"]
    assert "ghost" in imported.candidates


def test_import_candidates_malformed_line(tmp_path):
    path = tmp_path / "cands.jsonl"
    path.write_text('{"doc_id": "d1"}\n{bad json\n', encoding="utf-8")
    imported = import_candidates(path)
    assert len(imported.rejects) == 2


# ---- standardization ----


def test_standardize_exact_variant(lexicon):
    std = standardize_candidates({"d1": ["Latent Dirichlet Allocation"]}, lexicon)
    assert std.per_doc["d1"] == {"topic modeling"}


def test_standardize_substring_fallback(lexicon):
    std = standardize_candidates({"d1": ["we used LDA-based models"]}, lexicon)
    assert std.per_doc["d1"] == {"topic modeling"}


def test_standardize_unmapped_dropped_and_reported(lexicon):
    std = standardize_candidates({"d1": ["fancy unheard-of method"]}, lexicon)
    assert std.per_doc["d1"] == frozenset()
    assert std.unmapped == {"d1": ["fancy unheard-of method"]}


def test_standardize_keep_unmapped(lexicon):
    std = standardize_candidates(
        {"d1": ["Fancy  Unheard-of Method"]}, lexicon, keep_unmapped=True
    )
    assert std.per_doc["d1"] == {"fancy unheard-of method"}


# ---- two-stage extraction ----


def test_llmrule_single_mapped_candidate(lexicon):
    assert llmrule_extract(doc(), ["LDA"], lexicon) == {"topic modeling"}


def test_llmrule_strict_empty(lexicon):
    assert llmrule_extract(doc(abstract="we use gis"), [], lexicon) == frozenset()
    assert llmrule_extract(doc(abstract="we use gis"), None, lexicon) == frozenset()


def test_llmrule_fallback_union(lexicon):
    d = doc(abstract="the gis layer")
    assert llmrule_extract(d, ["nonsense"], lexicon, fallback_rule=True) == {"gis"}
    assert llmrule_extract(d, ["lda"], lexicon, fallback_rule=True) == {
        "topic modeling",
        "gis",
    }


# ---- evaluation ----


def test_evaluate_manual_confusion():
    result = evaluate_extraction({"d": {"a", "b", "c"}}, {"d": {"b", "c", "d"}})
    assert (result.tp, result.fp, result.fn) == (2, 1, 1)
    assert result.precision == pytest.approx(66.6667, abs=0.01)
    assert result.recall == pytest.approx(66.6667, abs=0.01)
    assert result.f1 == pytest.approx(66.6667, abs=0.01)


def test_evaluate_perfect():
    gold = {"d1": {"a"}, "d2": {"b", "c"}}
    result = evaluate_extraction(gold, gold)
    assert result.precision == result.recall == result.f1 == 100.0


def test_evaluate_table_rows_f1_consistency():
    rows = [
        (20.62, 11.98, 15.15),
        (18.28, 33.95, 23.77),
        (43.69, 26.14, 32.71),
    ]
    for p, r, f1 in rows:
        assert harmonic_f1(p, r) == pytest.approx(f1, abs=0.01)


def test_evaluate_unknown_doc_counts_fp():
    result = evaluate_extraction({"d1": {"a"}, "ghost": {"b"}}, {"d1": {"a"}})
    assert result.fp == 1 and result.unknown_docs == ("ghost",)


def test_evaluate_empty_gold():
    with pytest.raises(ConfigError):
        evaluate_extraction({"d": {"a"}}, {})


@settings(max_examples=50, deadline=None)
@given(
    st.floats(min_value=0.0, max_value=100.0),
    st.floats(min_value=0.0, max_value=100.0),
)
def test_f1_between_min_and_max(p, r):
    f1 = harmonic_f1(p, r)
    if p > 0 and r > 0:
        assert min(p, r) - 1e-9 <= f1 <= max(p, r) + 1e-9
    else:
        assert f1 == 0.0


def test_methods_file_roundtrip(tmp_path):
    per_doc = {"d2": {"b", "a"}, "d1": {"c"}}
    path = tmp_path / "methods.jsonl"
    write_methods(per_doc, path)
    assert read_methods(path) == {"d1": {"c"}, "d2": {"a", "b"}}
