"""Per-document topic distributions and dominant-topic assignment.

Two interchangeable sources feed downstream intensity counting:

* a built-in latent topic model fitted by collapsed Gibbs sampling, fully
  deterministic given a seed;
* an import adapter for externally produced assignments (CSV rows or full
  per-document distributions), with BERTopic's -1 outlier convention mapped
  to "unassigned".

Model selection sweeps candidate topic counts and combines held-out
perplexity with UMass coherence by rank sum.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, InputError
from .ingest import BiblioRecord
from .textnorm import word_tokens

logger = logging.getLogger(__name__)

# Compact English stopword list; callers can pass their own set.
STOPWORDS = frozenset(
    """a about above after again against all am an and any are as at be because
    been before being below between both but by can could did do does doing down
    during each few for from further had has have having he her here hers him his
    how i if in into is it its itself just me more most my no nor not now of off
    on once only or other our ours out over own same she should so some such than
    that the their theirs them then there these they this those through to too
    under until up very was we were what when where which while who whom why will
    with you your yours""".split()
)

FOLD_IN_SWEEPS = 100
_FOLD_IN_SEED_OFFSET = 1_000_003


def tokenize(
    doc: BiblioRecord,
    stopwords: frozenset[str] | set[str] = STOPWORDS,
    min_len: int = 3,
) -> list[str]:
    """Lowercase alphanumeric tokens of title+abstract, filtered by
    stopwords and minimum length."""
    return [
        tok
        for tok, _, _ in word_tokens(doc.text())
        if len(tok) >= min_len and tok not in stopwords
    ]


@dataclass(frozen=True)
class TopicModelConfig:
    k: int
    alpha: float | None = None  # None -> 50/k
    beta: float = 0.01
    iterations: int = 1000
    burn_in: int = 800
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"topic count must be >= 1, got {self.k}")
        if self.alpha is not None and self.alpha <= 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if self.beta <= 0:
            raise ConfigError(f"beta must be positive, got {self.beta}")
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if not 0 <= self.burn_in < self.iterations:
            raise ConfigError(
                f"burn_in must be in [0, iterations), got {self.burn_in}"
            )

    @property
    def alpha_eff(self) -> float:
        return self.alpha if self.alpha is not None else 50.0 / self.k

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "alpha": self.alpha,
            "beta": self.beta,
            "iterations": self.iterations,
            "burn_in": self.burn_in,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class DocTopicDist:
    doc_id: str
    probs: tuple[float, ...]

    def __post_init__(self):
        if any(p < 0 for p in self.probs):
            raise ValueError(f"negative probability in distribution for {self.doc_id}")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(
                f"distribution for {self.doc_id} sums to {total!r}, not 1"
            )


@dataclass(frozen=True)
class TopicAssignment:
    doc_id: str
    topic_id: int


@dataclass(frozen=True)
class TopicQualityPoint:
    k: int
    perplexity: float
    coherence: float


def _as_doc_list(corpus_tokens) -> list[tuple[str, list[str]]]:
    if isinstance(corpus_tokens, Mapping):
        return [(str(d), list(t)) for d, t in corpus_tokens.items()]
    return [(str(d), list(t)) for d, t in corpus_tokens]


class TopicModel:
    """Latent topic model fitted by collapsed Gibbs sampling.

    Point estimates come from the final sampler state:
    theta(d,k) = (n_dk + alpha) / (n_d + K*alpha),
    phi(k,w) = (n_kw + beta) / (n_k + V*beta).
    """

    def __init__(self, corpus_tokens, config: TopicModelConfig):
        docs = _as_doc_list(corpus_tokens)
        if not docs or all(len(toks) == 0 for _, toks in docs):
            raise InputError("cannot fit topic model: corpus has no tokens")
        self.config = config
        self.doc_ids: tuple[str, ...] = tuple(d for d, _ in docs)
        self.vocab: tuple[str, ...] = tuple(
            sorted({t for _, toks in docs for t in toks})
        )
        self._word_id = {w: i for i, w in enumerate(self.vocab)}
        self.docs: list[list[int]] = [
            [self._word_id[t] for t in toks] for _, toks in docs
        ]
        total_tokens = sum(len(d) for d in self.docs)
        if config.k > total_tokens:
            logger.warning(
                "topic count %d exceeds corpus token count %d", config.k, total_tokens
            )
        self.z: list[list[int]] = []
        k, v = config.k, len(self.vocab)
        self.n_dk = [[0] * k for _ in self.docs]
        self.n_kw = [[0] * v for _ in range(k)]
        self.n_k = [0] * k
        self._gibbs(total_tokens)

    def _gibbs(self, total_tokens: int) -> None:
        cfg = self.config
        k, v = cfg.k, len(self.vocab)
        alpha, beta = cfg.alpha_eff, cfg.beta
        vbeta = v * beta
        rng = np.random.default_rng(cfg.seed)

        init = rng.integers(0, k, size=total_tokens)
        pos = 0
        for d, doc in enumerate(self.docs):
            zs = [int(init[pos + i]) for i in range(len(doc))]
            pos += len(doc)
            self.z.append(zs)
            ndk = self.n_dk[d]
            for w, t in zip(doc, zs):
                ndk[t] += 1
                self.n_kw[t][w] += 1
                self.n_k[t] += 1

        n_kw, n_k, n_dk = self.n_kw, self.n_k, self.n_dk
        cum = [0.0] * k
        for _ in range(cfg.iterations):
            us = rng.random(total_tokens)
            t_idx = 0
            for d, doc in enumerate(self.docs):
                zs = self.z[d]
                ndk = n_dk[d]
                for i, w in enumerate(doc):
                    old = zs[i]
                    ndk[old] -= 1
                    n_kw[old][w] -= 1
                    n_k[old] -= 1
                    total = 0.0
                    for t in range(k):
                        total += (
                            (ndk[t] + alpha)
                            * (n_kw[t][w] + beta)
                            / (n_k[t] + vbeta)
                        )
                        cum[t] = total
                    u = us[t_idx] * total
                    t_idx += 1
                    new = 0
                    while cum[new] < u and new < k - 1:
                        new += 1
                    zs[i] = new
                    ndk[new] += 1
                    n_kw[new][w] += 1
                    n_k[new] += 1

    def theta(self) -> np.ndarray:
        """Per-document topic proportions, rows summing to 1."""
        cfg = self.config
        counts = np.asarray(self.n_dk, dtype=float)
        lengths = counts.sum(axis=1, keepdims=True)
        return (counts + cfg.alpha_eff) / (lengths + cfg.k * cfg.alpha_eff)

    def phi(self) -> np.ndarray:
        """Per-topic word distributions, rows summing to 1."""
        cfg = self.config
        counts = np.asarray(self.n_kw, dtype=float)
        totals = counts.sum(axis=1, keepdims=True)
        return (counts + cfg.beta) / (totals + len(self.vocab) * cfg.beta)

    def top_words(self, topic: int, n: int) -> list[str]:
        """Up to n words actually assigned to the topic, by count then
        alphabetically."""
        counts = self.n_kw[topic]
        ranked = sorted(
            (w for w in range(len(self.vocab)) if counts[w] > 0),
            key=lambda w: (-counts[w], w),
        )
        return [self.vocab[w] for w in ranked[:n]]


def fit_topic_model(corpus_tokens, config: TopicModelConfig) -> TopicModel:
    """Fit the built-in topic model; deterministic for a fixed seed."""
    return TopicModel(corpus_tokens, config)


def doc_topic_dists(model: TopicModel) -> list[DocTopicDist]:
    """One normalized distribution per training document."""
    theta = model.theta()
    return [
        DocTopicDist(doc_id=doc_id, probs=tuple(float(p) for p in theta[i]))
        for i, doc_id in enumerate(model.doc_ids)
    ]


def dominant_topic_index(probs: Sequence[float]) -> int:
    """Index of the maximal entry, lowest index on ties. Accepts
    unnormalized non-negative vectors."""
    best = 0
    for i in range(1, len(probs)):
        if probs[i] > probs[best]:
            best = i
    return best


def assign_dominant_topic(dist: DocTopicDist) -> TopicAssignment:
    return TopicAssignment(doc_id=dist.doc_id, topic_id=dominant_topic_index(dist.probs))


def topic_doc_counts(assignments: Iterable[TopicAssignment], k: int) -> list[int]:
    """Number of documents per dominant topic."""
    counts = [0] * k
    for a in assignments:
        if not 0 <= a.topic_id < k:
            raise ValueError(
                f"topic id {a.topic_id} out of range [0, {k}) for doc {a.doc_id}"
            )
        counts[a.topic_id] += 1
    return counts


@dataclass
class ImportedAssignments:
    assignments: list[TopicAssignment]
    k: int
    dists: list[DocTopicDist] | None = None
    remap: dict[int, int] = field(default_factory=dict)
    unassigned: list[str] = field(default_factory=list)
    rejects: list[tuple[int, str]] = field(default_factory=list)


def import_assignments(path: str | Path, mode: str) -> ImportedAssignments:
    """Load external topic assignments.

    ``argmax_rows``: CSV with header doc_id,topic_id[,probability]. Topic
    ids are remapped onto a contiguous 0..K-1 range (remap table reported);
    id -1 marks an outlier/unassigned document, which is excluded and
    counted. ``full_dist``: JSON Lines {doc_id, dist: [...]} accepted
    verbatim after validation.
    """
    path = Path(path)
    if mode not in ("argmax_rows", "full_dist"):
        raise ConfigError(f"unknown import mode: {mode!r}")
    if not path.is_file():
        raise InputError(f"assignments file not found: {path}")
    if mode == "full_dist":
        return _import_full_dist(path)
    return _import_argmax_rows(path)


def _import_argmax_rows(path: Path) -> ImportedAssignments:
    raw: list[tuple[str, int]] = []
    rejects: list[tuple[int, str]] = []
    unassigned: list[str] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not header or header[0].strip() != "doc_id":
            raise InputError(f"{path}: expected a doc_id,topic_id[,probability] header")
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                rejects.append((line_no, "too few columns"))
                continue
            doc_id = row[0].strip()
            try:
                topic_id = int(row[1])
            except ValueError:
                rejects.append((line_no, "bad topic id"))
                continue
            if not doc_id:
                rejects.append((line_no, "empty doc id"))
                continue
            if doc_id in seen:
                rejects.append((line_no, "duplicate doc id"))
                continue
            seen.add(doc_id)
            if topic_id == -1:
                unassigned.append(doc_id)
            elif topic_id < -1:
                rejects.append((line_no, "bad topic id"))
            else:
                raw.append((doc_id, topic_id))
    if not raw:
        raise InputError(f"{path}: no assigned documents (all rows unassigned or rejected)")
    distinct = sorted({t for _, t in raw})
    remap = {old: new for new, old in enumerate(distinct)}
    assignments = [TopicAssignment(d, remap[t]) for d, t in raw]
    if unassigned:
        logger.warning("%d documents unassigned (topic id -1)", len(unassigned))
    return ImportedAssignments(
        assignments=assignments,
        k=len(distinct),
        remap=remap,
        unassigned=unassigned,
        rejects=rejects,
    )


def _import_full_dist(path: Path) -> ImportedAssignments:
    dists: list[DocTopicDist] = []
    rejects: list[tuple[int, str]] = []
    k: int | None = None
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                doc_id = str(obj["doc_id"])
                vec = [float(x) for x in obj["dist"]]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                rejects.append((line_no, "malformed distribution line"))
                continue
            if doc_id in seen:
                rejects.append((line_no, "duplicate doc id"))
                continue
            if k is None:
                k = len(vec)
            if len(vec) != k or k == 0:
                rejects.append((line_no, "inconsistent distribution length"))
                continue
            if any(p < 0 for p in vec) or abs(math.fsum(vec) - 1.0) > 1e-6:
                rejects.append((line_no, "distribution does not sum to 1"))
                continue
            total = math.fsum(vec)
            probs = tuple(p / total for p in vec)
            seen.add(doc_id)
            dists.append(DocTopicDist(doc_id=doc_id, probs=probs))
    if not dists:
        raise InputError(f"{path}: no valid distribution rows")
    assignments = [assign_dominant_topic(d) for d in dists]
    return ImportedAssignments(
        assignments=assignments,
        k=k or 0,
        dists=dists,
        remap={t: t for t in range(k or 0)},
        rejects=rejects,
    )


def _log2_likelihood(
    theta: np.ndarray,
    phi: np.ndarray,
    docs: list[list[int | None]],
    unseen_col: np.ndarray | None = None,
) -> tuple[float, int]:
    """Sum of per-token log2 mixture probabilities and the token count.

    ``None`` word ids stand for words outside the model vocabulary; they
    are scored with ``unseen_col`` (the smoothing-only phi column).
    """
    total = 0.0
    n_tokens = 0
    for d, doc in enumerate(docs):
        row = theta[d]
        for w in doc:
            col = phi[:, w] if w is not None else unseen_col
            total += math.log2(float(np.dot(row, col)))
            n_tokens += 1
    return total, n_tokens


def perplexity(
    model: TopicModel, heldout_tokens, fold_in_sweeps: int = FOLD_IN_SWEEPS
) -> float:
    """Held-out perplexity under the fitted model.

    Held-out topic proportions are estimated by fold-in sampling: the
    topic-word counts stay frozen while each held-out document's topic
    mix is resampled for ``fold_in_sweeps`` sweeps with a fixed derived
    seed. Perplexity is 2**(-mean log2 token probability), so a uniform
    model over V words scores exactly V.
    """
    docs = _as_doc_list(heldout_tokens)
    doc_ids = [
        [model._word_id.get(t) for t in toks] for _, toks in docs
    ]
    if sum(len(d) for d in doc_ids) == 0:
        raise InputError("held-out corpus has no tokens")
    cfg = model.config
    k, v = cfg.k, len(model.vocab)
    alpha, beta = cfg.alpha_eff, cfg.beta
    vbeta = v * beta
    phi_cols = {None: [beta / (model.n_k[t] + vbeta) for t in range(k)]}

    rng = np.random.default_rng(cfg.seed + _FOLD_IN_SEED_OFFSET)
    h_ndk = [[0] * k for _ in doc_ids]
    z: list[list[int]] = []
    total_tokens = sum(len(d) for d in doc_ids)
    init = rng.integers(0, k, size=total_tokens)
    pos = 0
    for d, doc in enumerate(doc_ids):
        zs = [int(init[pos + i]) for i in range(len(doc))]
        pos += len(doc)
        z.append(zs)
        for t in zs:
            h_ndk[d][t] += 1

    def phi_col(w):
        col = phi_cols.get(w)
        if col is None:
            col = [(model.n_kw[t][w] + beta) / (model.n_k[t] + vbeta) for t in range(k)]
            phi_cols[w] = col
        return col

    cum = [0.0] * k
    for _ in range(fold_in_sweeps):
        us = rng.random(total_tokens)
        t_idx = 0
        for d, doc in enumerate(doc_ids):
            zs = z[d]
            ndk = h_ndk[d]
            for i, w in enumerate(doc):
                old = zs[i]
                ndk[old] -= 1
                col = phi_col(w)
                total = 0.0
                for t in range(k):
                    total += (ndk[t] + alpha) * col[t]
                    cum[t] = total
                u = us[t_idx] * total
                t_idx += 1
                new = 0
                while cum[new] < u and new < k - 1:
                    new += 1
                zs[i] = new
                ndk[new] += 1

    counts = np.asarray(h_ndk, dtype=float)
    theta = (counts + alpha) / (counts.sum(axis=1, keepdims=True) + k * alpha)
    total_ll, n_tokens = _log2_likelihood(
        theta, model.phi(), doc_ids, unseen_col=np.asarray(phi_cols[None])
    )
    return 2.0 ** (-total_ll / n_tokens)


def perplexity_from_params(
    theta: np.ndarray, phi: np.ndarray, doc_word_ids: list[list[int]]
) -> float:
    """Perplexity for explicit theta/phi matrices (no fold-in)."""
    total_ll, n_tokens = _log2_likelihood(theta, phi, doc_word_ids)
    if n_tokens == 0:
        raise InputError("held-out corpus has no tokens")
    return 2.0 ** (-total_ll / n_tokens)


@dataclass
class CoherenceResult:
    mean: float
    per_topic: list[float]
    short_topics: list[int] = field(default_factory=list)


def coherence_umass(
    model: TopicModel, corpus_tokens=None, top_n: int = 10
) -> CoherenceResult:
    """UMass coherence: document co-occurrence score over each topic's top words.

    For each ordered pair of top words (higher-ranked word h, lower-ranked
    word l): log((D(l, h) + 1) / D(h)), where D counts documents in the
    reference corpus. Topics with fewer than ``top_n`` assigned words use
    the words available and are flagged.
    """
    if top_n < 2:
        raise ConfigError(f"top_n must be >= 2, got {top_n}")
    if corpus_tokens is None:
        doc_sets = [frozenset(doc) for doc in model.docs]
    else:
        docs = _as_doc_list(corpus_tokens)
        doc_sets = [
            frozenset(
                model._word_id[t] for t in toks if t in model._word_id
            )
            for _, toks in docs
        ]
    word_docs: dict[int, set[int]] = {}
    for d, words in enumerate(doc_sets):
        for w in words:
            word_docs.setdefault(w, set()).add(d)

    per_topic: list[float] = []
    short: list[int] = []
    for t in range(model.config.k):
        counts = model.n_kw[t]
        ranked = sorted(
            (w for w in range(len(model.vocab)) if counts[w] > 0),
            key=lambda w: (-counts[w], w),
        )[:top_n]
        if len(ranked) < top_n:
            short.append(t)
        score = 0.0
        for i in range(len(ranked)):
            high = ranked[i]
            d_high = len(word_docs.get(high, ()))
            for j in range(i + 1, len(ranked)):
                low = ranked[j]
                both = len(word_docs.get(high, set()) & word_docs.get(low, set()))
                if d_high > 0:
                    score += math.log((both + 1) / d_high)
        per_topic.append(score)
    if short:
        logger.warning("topics with fewer than %d ranked words: %s", top_n, short)
    mean = math.fsum(per_topic) / len(per_topic) if per_topic else 0.0
    return CoherenceResult(mean=mean, per_topic=per_topic, short_topics=short)


@dataclass
class SweepResult:
    points: list[TopicQualityPoint]
    selected_k: int
    heldout_fraction: float


def _ranks(values: list[float], ks: list[int], reverse: bool) -> dict[int, int]:
    order = sorted(
        range(len(values)),
        key=lambda i: (-values[i] if reverse else values[i], ks[i]),
    )
    return {ks[i]: rank for rank, i in enumerate(order)}


def sweep_topic_counts(
    corpus_tokens, k_values: list[int], template: TopicModelConfig, top_n: int = 10
) -> SweepResult:
    """Fit one model per candidate topic count and pick the best by rank sum.

    Every fifth document is held out for perplexity; coherence is computed
    on the training split. Each candidate K is fitted with seed
    ``template.seed + K``. The selected K minimizes (perplexity rank +
    coherence rank), ties going to the smaller K.
    """
    if not k_values:
        raise ConfigError("k_values must not be empty")
    docs = _as_doc_list(corpus_tokens)
    heldout = [docs[i] for i in range(len(docs)) if i % 5 == 4 and docs[i][1]]
    train = [docs[i] for i in range(len(docs)) if not (i % 5 == 4 and docs[i][1])]
    if not heldout or not any(toks for _, toks in train):
        logger.warning("corpus too small for a held-out split; scoring on the full corpus")
        train = docs
        heldout = docs

    points: list[TopicQualityPoint] = []
    for k in sorted(set(k_values)):
        cfg = replace(template, k=k, seed=template.seed + k)
        model = fit_topic_model(train, cfg)
        ppl = perplexity(model, heldout)
        coh = coherence_umass(model, top_n=top_n).mean
        points.append(TopicQualityPoint(k=k, perplexity=ppl, coherence=coh))

    ks = [p.k for p in points]
    ppl_rank = _ranks([p.perplexity for p in points], ks, reverse=False)
    coh_rank = _ranks([p.coherence for p in points], ks, reverse=True)
    selected = min(ks, key=lambda k: (ppl_rank[k] + coh_rank[k], k))
    return SweepResult(
        points=points,
        selected_k=selected,
        heldout_fraction=len(heldout) / max(len(docs), 1),
    )


def write_assignments(
    assignments: Iterable[TopicAssignment],
    path: str | Path,
    dists: Mapping[str, Sequence[float]] | None = None,
) -> None:
    """Write assignments as CSV doc_id,topic_id[,probability]."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if dists is None:
            writer.writerow(["doc_id", "topic_id"])
            for a in assignments:
                writer.writerow([a.doc_id, a.topic_id])
        else:
            writer.writerow(["doc_id", "topic_id", "probability"])
            for a in assignments:
                prob = max(dists[a.doc_id]) if a.doc_id in dists else ""
                writer.writerow([a.doc_id, a.topic_id, repr(float(prob)) if prob != "" else ""])


def read_assignments(path: str | Path) -> tuple[list[TopicAssignment], int]:
    """Read a doc_id,topic_id[,probability] CSV; returns assignments and K."""
    imported = import_assignments(path, mode="argmax_rows")
    if imported.rejects:
        raise InputError(
            f"{path}: {len(imported.rejects)} malformed assignment rows"
        )
    return imported.assignments, imported.k


def write_quality_table(
    points: Iterable[TopicQualityPoint], selected_k: int, path: str | Path
) -> None:
    """Write the sweep table as CSV K,perplexity,coherence,selected."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["K", "perplexity", "coherence", "selected"])
        for p in points:
            writer.writerow(
                [p.k, repr(p.perplexity), repr(p.coherence), str(p.k == selected_k).lower()]
            )
