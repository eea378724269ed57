import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tmckit.errors import ConfigError, InputError
from tmckit.ingest import BiblioRecord
from tmckit.synthetic import two_cluster_corpus
from tmckit.topics import (
    DocTopicDist,
    TopicAssignment,
    TopicModelConfig,
    assign_dominant_topic,
    coherence_umass,
    doc_topic_dists,
    dominant_topic_index,
    fit_topic_model,
    import_assignments,
    perplexity,
    perplexity_from_params,
    read_assignments,
    sweep_topic_counts,
    tokenize,
    topic_doc_counts,
    write_assignments,
)


def doc(title="", abstract=""):
    return BiblioRecord(
        id="d", source="generic", doi=None, title=title, abstract=abstract, year=2000
    )


FAST = dict(alpha=0.5, beta=0.01, iterations=60, burn_in=30, seed=3)


# ---- tokenize ----


def test_tokenize_stopwords_and_minlen():
    assert tokenize(doc(title="The GIS of maps"), stopwords={"the", "of"}) == ["gis", "maps"]


def test_tokenize_empty():
    assert tokenize(doc()) == []


def test_tokenize_alnum_split():
    assert tokenize(doc(abstract="re-use re-use"), stopwords=set()) == ["use", "use"]


# ---- config ----


def test_config_defaults_and_validation():
    cfg = TopicModelConfig(k=10)
    assert cfg.alpha_eff == pytest.approx(5.0)
    with pytest.raises(ConfigError):
        TopicModelConfig(k=0)
    with pytest.raises(ConfigError):
        TopicModelConfig(k=2, alpha=-1)
    with pytest.raises(ConfigError):
        TopicModelConfig(k=2, iterations=10, burn_in=10)


# ---- fitting ----


def test_fit_k1_degenerate():
    model = fit_topic_model([("a", ["x", "y"]), ("b", ["z"])], TopicModelConfig(k=1, **FAST))
    for dist in doc_topic_dists(model):
        assert dist.probs == (1.0,)
        assert assign_dominant_topic(dist).topic_id == 0


def test_fit_empty_corpus_fatal():
    with pytest.raises(InputError):
        fit_topic_model([("a", []), ("b", [])], TopicModelConfig(k=2, **FAST))


def test_fit_same_seed_identical():
    docs, _ = two_cluster_corpus(n_docs=20, seed=5)
    cfg = TopicModelConfig(k=2, **FAST)
    m1 = fit_topic_model(docs, cfg)
    m2 = fit_topic_model(docs, cfg)
    assert m1.z == m2.z
    assert np.array_equal(m1.theta(), m2.theta())


def test_fit_two_clusters_purity():
    docs, labels = two_cluster_corpus(n_docs=50, seed=13)
    model = fit_topic_model(
        docs, TopicModelConfig(k=2, alpha=0.5, beta=0.01, iterations=150, burn_in=50, seed=13)
    )
    assigns = [assign_dominant_topic(d).topic_id for d in doc_topic_dists(model)]
    agree = sum(1 for a, b in zip(assigns, labels) if a == b)
    purity = max(agree, len(labels) - agree) / len(labels)
    assert purity >= 0.9


def test_dists_sum_to_one_and_empty_doc_uniform():
    docs = [("a", ["w1", "w2", "w1"]), ("empty", []), ("b", ["w3"])]
    model = fit_topic_model(docs, TopicModelConfig(k=4, **FAST))
    dists = doc_topic_dists(model)
    for dist in dists:
        assert abs(math.fsum(dist.probs) - 1.0) <= 1e-9
        assert all(p >= 0 for p in dist.probs)
    empty = next(d for d in dists if d.doc_id == "empty")
    assert empty.probs == tuple([0.25] * 4)


# ---- assignment ----


def test_assign_argmax_and_ties():
    assert assign_dominant_topic(DocTopicDist("d", (0.1, 0.7, 0.2))).topic_id == 1
    assert assign_dominant_topic(DocTopicDist("d", (0.5, 0.5))).topic_id == 0
    assert assign_dominant_topic(DocTopicDist("d", (0.25, 0.25, 0.25, 0.25))).topic_id == 0


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(min_value=0.001, max_value=10.0), min_size=1, max_size=6),
    st.floats(min_value=0.1, max_value=100.0),
)
def test_argmax_scale_invariant(vec, scale):
    assert dominant_topic_index(vec) == dominant_topic_index([v * scale for v in vec])


def test_dist_validation():
    with pytest.raises(ValueError):
        DocTopicDist("d", (0.5, 0.6))
    with pytest.raises(ValueError):
        DocTopicDist("d", (-0.1, 1.1))


def test_topic_doc_counts():
    assigns = [TopicAssignment("a", 0), TopicAssignment("b", 0), TopicAssignment("c", 1)]
    assert topic_doc_counts(assigns, 2) == [2, 1]
    assert topic_doc_counts([], 3) == [0, 0, 0]
    with pytest.raises(ValueError):
        topic_doc_counts(assigns, 1)


def test_topic_doc_counts_sums_to_corpus():
    docs, _ = two_cluster_corpus(n_docs=30, seed=2)
    model = fit_topic_model(docs, TopicModelConfig(k=3, **FAST))
    assigns = [assign_dominant_topic(d) for d in doc_topic_dists(model)]
    assert sum(topic_doc_counts(assigns, 3)) == len(docs)


# ---- import adapter ----


def test_import_argmax_rows_remap(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text("doc_id,topic_id\nd1,0\nd2,3\n", encoding="utf-8")
    imported = import_assignments(path, "argmax_rows")
    assert imported.remap == {0: 0, 3: 1}
    assert [(a.doc_id, a.topic_id) for a in imported.assignments] == [("d1", 0), ("d2", 1)]
    assert imported.k == 2


def test_import_outlier_excluded(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text("doc_id,topic_id\nd1,-1\nd2,0\n", encoding="utf-8")
    imported = import_assignments(path, "argmax_rows")
    assert imported.unassigned == ["d1"]
    assert len(imported.assignments) == 1


def test_import_all_unassigned_fatal(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text("doc_id,topic_id\nd1,-1\n", encoding="utf-8")
    with pytest.raises(InputError):
        import_assignments(path, "argmax_rows")


def test_import_malformed_rows_rejected(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text("doc_id,topic_id\nd1,zero\nd2,1\nd2,2\n", encoding="utf-8")
    imported = import_assignments(path, "argmax_rows")
    assert len(imported.rejects) == 2  # bad topic id + duplicate doc id
    assert len(imported.assignments) == 1


def test_import_full_dist(tmp_path):
    path = tmp_path / "d.jsonl"
    rows = [
        {"doc_id": "d1", "dist": [0.25, 0.75]},
        {"doc_id": "d2", "dist": [0.9, 0.1]},
        {"doc_id": "bad", "dist": [0.5, 0.2]},
    ]
    path.write_text("\n".join(json.dumps(r) for r in rows), encoding="utf-8")
    imported = import_assignments(path, "full_dist")
    assert [(a.doc_id, a.topic_id) for a in imported.assignments] == [("d1", 1), ("d2", 0)]
    assert len(imported.rejects) == 1
    assert imported.dists is not None and imported.dists[0].probs == (0.25, 0.75)


def test_assignment_csv_roundtrip(tmp_path):
    path = tmp_path / "t.csv"
    assigns = [TopicAssignment("a", 0), TopicAssignment("b", 1)]
    write_assignments(assigns, path, dists={"a": (0.8, 0.2), "b": (0.3, 0.7)})
    loaded, k = read_assignments(path)
    assert loaded == assigns and k == 2


# ---- perplexity ----


def test_uniform_model_perplexity_equals_vocab_size():
    k, v = 4, 16
    theta = np.full((2, k), 1.0 / k)
    phi = np.full((k, v), 1.0 / v)
    docs = [[0, 3, 5, 15], [2, 2, 9]]
    assert perplexity_from_params(theta, phi, docs) == float(v)


def test_perplexity_at_least_one():
    docs, _ = two_cluster_corpus(n_docs=20, seed=4)
    model = fit_topic_model(docs, TopicModelConfig(k=2, **FAST))
    assert perplexity(model, docs) >= 1.0


def test_perplexity_closed_form_two_word_doc():
    # single doc "a a b b", K=1: as priors shrink, per-token probability
    # approaches 1/2, so perplexity approaches 2
    corpus = [("d", ["a", "a", "b", "b"])]
    model = fit_topic_model(
        corpus, TopicModelConfig(k=1, alpha=1e-9, beta=1e-9, iterations=2, burn_in=1, seed=1)
    )
    assert perplexity(model, corpus) == pytest.approx(2.0, abs=1e-6)


def test_perplexity_unseen_word_smoothed():
    corpus = [("d", ["a", "b"])]
    model = fit_topic_model(corpus, TopicModelConfig(k=2, **FAST))
    value = perplexity(model, [("h", ["a", "zzz"])])
    assert math.isfinite(value) and value > 0


def test_perplexity_empty_heldout():
    model = fit_topic_model([("d", ["a"])], TopicModelConfig(k=1, **FAST))
    with pytest.raises(InputError):
        perplexity(model, [("h", [])])


# ---- coherence ----


def _forced_model(doc_tokens, k=1):
    return fit_topic_model(doc_tokens, TopicModelConfig(k=k, **FAST))


def test_coherence_single_pair_hand_computed():
    # D(w2)=10, D(w1,w2)=5 for the higher-ranked word w2 -> log(6/10)
    docs = [("d%d" % i, ["w2", "w2", "w1"] if i < 5 else ["w2", "w2"]) for i in range(10)]
    model = _forced_model(docs)
    result = coherence_umass(model, top_n=2)
    assert result.mean == pytest.approx(math.log(6 / 10), abs=1e-12)


def test_coherence_always_cooccurring_positive():
    # both words in every doc: log((D+1)/D) > 0 and -> 0 as D grows
    small = _forced_model([(f"d{i}", ["aa", "bb", "aa"]) for i in range(5)])
    large = _forced_model([(f"d{i}", ["aa", "bb", "aa"]) for i in range(50)])
    c_small = coherence_umass(small, top_n=2).mean
    c_large = coherence_umass(large, top_n=2).mean
    assert c_small > 0 and c_large > 0
    assert c_large < c_small


def test_coherence_ten_doc_fixture():
    docs = [(f"d{i}", ["xx", "yy", "xx"]) for i in range(10)]
    model = _forced_model(docs)
    assert coherence_umass(model, top_n=2).mean == pytest.approx(math.log(11 / 10), abs=1e-12)


def test_coherence_short_topic_flagged():
    model = _forced_model([("d", ["solo"])])
    result = coherence_umass(model, top_n=5)
    assert result.short_topics == [0]
    assert result.mean == 0.0


def test_coherence_top_n_validation():
    model = _forced_model([("d", ["a", "b"])])
    with pytest.raises(ConfigError):
        coherence_umass(model, top_n=1)


# ---- sweep ----


def test_sweep_single_k():
    docs, _ = two_cluster_corpus(n_docs=30, seed=6)
    sweep = sweep_topic_counts(docs, [3], TopicModelConfig(k=3, **FAST))
    assert sweep.selected_k == 3
    assert len(sweep.points) == 1


def test_sweep_dominant_k_selected():
    docs, _ = two_cluster_corpus(n_docs=50, seed=7)
    template = TopicModelConfig(k=2, alpha=0.5, beta=0.5, iterations=100, burn_in=50, seed=7)
    sweep = sweep_topic_counts(docs, [1, 2], template)
    by_k = {p.k: p for p in sweep.points}
    if (
        by_k[2].perplexity < by_k[1].perplexity
        and by_k[2].coherence > by_k[1].coherence
    ):
        assert sweep.selected_k == 2


def test_sweep_recovers_two_clusters():
    docs, _ = two_cluster_corpus(n_docs=100, seed=11)
    template = TopicModelConfig(k=2, alpha=0.5, beta=0.5, iterations=200, burn_in=100, seed=31)
    sweep = sweep_topic_counts(docs, [1, 2, 3, 5], template)
    assert sweep.selected_k in (2, 3)


def test_sweep_empty_k_list():
    with pytest.raises(ConfigError):
        sweep_topic_counts([("d", ["a"])], [], TopicModelConfig(k=1, **FAST))
