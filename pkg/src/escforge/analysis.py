"""Corpus analyses: statistics, TF-IDF semantic diversity, lexical
distinct-n, strategy distribution / transition / uniqueness, and
scenario-dialogue similarity.

All functions are pure; the same corpus always yields identical reports.
"""

from __future__ import annotations

import math
import re
import statistics
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .corpus import SEEKER, SUPPORTER, STRATEGIES, Dialogue
from .counselor import N_BUCKETS, progress_bucket

_TOKEN = re.compile(r"[^\W_]+")

HISTOGRAM_BINS = 20


def tokenize(text: str) -> list[str]:
    """Default tokenizer: lowercase, maximal Unicode alphanumeric runs."""
    return _TOKEN.findall(text.lower())


# --- statistics ---------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class StatsReport:
    n_dialogues: int
    n_utterances: int
    avg_dialogue_length: float
    avg_utterance_length: float
    seeker_n_utterances: int
    seeker_avg_per_dialogue: float
    seeker_avg_utterance_length: float
    supporter_n_utterances: int
    supporter_avg_per_dialogue: float
    supporter_avg_utterance_length: float

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}

    def to_rows(self) -> list[tuple[str, str, float]]:
        return [
            ("Total", "# Dialogues", self.n_dialogues),
            ("Total", "# Utterances", self.n_utterances),
            ("Total", "Avg. Dialogue Length", self.avg_dialogue_length),
            ("Total", "Avg. Utterance Length", self.avg_utterance_length),
            ("Seeker", "# Utterances", self.seeker_n_utterances),
            ("Seeker", "Avg. # Utter. per Dialog", self.seeker_avg_per_dialogue),
            ("Seeker", "Avg. Utterance Length", self.seeker_avg_utterance_length),
            ("Supporter", "# Utterances", self.supporter_n_utterances),
            ("Supporter", "Avg. # Utter. per Dialog", self.supporter_avg_per_dialogue),
            ("Supporter", "Avg. Utterance Length", self.supporter_avg_utterance_length),
        ]


def corpus_statistics(corpus: list[Dialogue], tokenizer=tokenize) -> StatsReport:
    """Table-style corpus statistics; expects pre-merged dialogues."""
    if not corpus:
        raise ValueError("empty corpus")
    texts = {SEEKER: [], SUPPORTER: []}
    for d in corpus:
        for u in d.utterances:
            texts[u.speaker].append(u.text)
    n_dialogues = len(corpus)
    n_seeker, n_supporter = len(texts[SEEKER]), len(texts[SUPPORTER])
    n_utterances = n_seeker + n_supporter

    def avg_tokens(items: list[str]) -> float:
        return sum(len(tokenizer(t)) for t in items) / len(items) if items else 0.0

    return StatsReport(
        n_dialogues=n_dialogues,
        n_utterances=n_utterances,
        avg_dialogue_length=n_utterances / n_dialogues,
        avg_utterance_length=avg_tokens(texts[SEEKER] + texts[SUPPORTER]),
        seeker_n_utterances=n_seeker,
        seeker_avg_per_dialogue=n_seeker / n_dialogues,
        seeker_avg_utterance_length=avg_tokens(texts[SEEKER]),
        supporter_n_utterances=n_supporter,
        supporter_avg_per_dialogue=n_supporter / n_dialogues,
        supporter_avg_utterance_length=avg_tokens(texts[SUPPORTER]),
    )


# --- TF-IDF -------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class TfidfVector:
    """L2-normalized sparse tf-idf weights plus the pre-normalization norm."""

    weights: dict[int, float]
    norm: float


def tfidf_vectors(docs: list[str], tokenizer=tokenize) -> list[TfidfVector]:
    """tf = raw count, idf = ln((1+N)/(1+df)) + 1, weight = tf*idf, then
    L2-normalized per doc. Vocabulary comes from the input docs only."""
    if not docs:
        raise ValueError("no documents")
    tokenized = [tokenizer(doc) for doc in docs]
    if not any(tokenized):
        raise ValueError("all documents are empty")
    vocabulary: dict[str, int] = {}
    for tokens in tokenized:
        for token in tokens:
            vocabulary.setdefault(token, len(vocabulary))
    n_docs = len(docs)
    df = Counter()
    for tokens in tokenized:
        df.update(set(tokens))
    idf = {term: math.log((1 + n_docs) / (1 + df[term])) + 1.0 for term in vocabulary}
    vectors = []
    for tokens in tokenized:
        tf = Counter(tokens)
        raw = {vocabulary[t]: count * idf[t] for t, count in tf.items()}
        norm = math.sqrt(sum(w * w for w in raw.values()))
        weights = {t: w / norm for t, w in raw.items()} if norm else {}
        vectors.append(TfidfVector(weights=weights, norm=norm))
    return vectors


def cosine(u: TfidfVector, v: TfidfVector) -> float:
    """Cosine of two stored-normalized vectors; clamped to [0, 1]."""
    if len(u.weights) > len(v.weights):
        u, v = v, u
    value = sum(w * v.weights.get(t, 0.0) for t, w in u.weights.items())
    return min(max(value, 0.0), 1.0)


def _cosine_matrix(vectors: list[TfidfVector]) -> np.ndarray:
    """All-pairs cosine via one sparse matrix product."""
    n = len(vectors)
    dim = 1 + max((max(v.weights) for v in vectors if v.weights), default=0)
    rows, cols, data = [], [], []
    for i, v in enumerate(vectors):
        for t, w in v.weights.items():
            rows.append(i)
            cols.append(t)
            data.append(w)
    matrix = sparse.csr_matrix((data, (rows, cols)), shape=(n, dim))
    return np.asarray((matrix @ matrix.T).todense())


@dataclass(frozen=True, slots=True)
class SimilaritySummary:
    n_items: int
    n_pairs: int
    mean: float
    median: float
    stdev: float
    histogram: tuple[tuple[float, float, int], ...]

    def to_dict(self) -> dict:
        return {
            "n_items": self.n_items,
            "n_pairs": self.n_pairs,
            "mean": self.mean,
            "median": self.median,
            "stdev": self.stdev,
            "histogram": [{"bin_low": lo, "bin_high": hi, "count": c} for lo, hi, c in self.histogram],
        }


def summarize_values(values: list[float], n_items: int | None = None) -> SimilaritySummary:
    """Mean/median/population-stdev plus a 20-bin histogram on [0, 1]."""
    if not values:
        raise ValueError("no values to summarize")
    bins = [0] * HISTOGRAM_BINS
    for v in values:
        bins[min(int(v * HISTOGRAM_BINS), HISTOGRAM_BINS - 1)] += 1
    histogram = tuple(
        (i / HISTOGRAM_BINS, (i + 1) / HISTOGRAM_BINS, count) for i, count in enumerate(bins)
    )
    return SimilaritySummary(
        n_items=n_items if n_items is not None else len(values),
        n_pairs=len(values),
        mean=statistics.fmean(values),
        median=statistics.median(values),
        stdev=statistics.pstdev(values),
        histogram=histogram,
    )


def pairwise_similarity(vectors: list[TfidfVector]) -> SimilaritySummary:
    """Statistics over all unordered distinct pairs of the given vectors."""
    n = len(vectors)
    if n < 2:
        raise ValueError("need at least 2 vectors")
    matrix = _cosine_matrix(vectors)
    iu = np.triu_indices(n, k=1)
    values = np.clip(matrix[iu], 0.0, 1.0).tolist()
    return summarize_values(values, n_items=n)


def top_strategies(corpus: list[Dialogue], k: int = 4) -> list[str]:
    counts = Counter()
    for d in corpus:
        counts.update(d.supporter_strategies())
    # canonical order breaks count ties so reports are stable
    return sorted(counts, key=lambda s: (-counts[s], STRATEGIES.index(s)))[:k]


def grouped_similarity(
    corpus: list[Dialogue], grouping: str, tokenizer=tokenize
) -> tuple[dict[str, SimilaritySummary], list[str]]:
    """Inter-document TF-IDF cosine summaries per group.

    grouping "global": whole-dialogue texts, one group.
    grouping "by_problem_type": whole-dialogue texts sharing a problem type.
    grouping "by_strategy": supporter responses sharing one of the four most
    frequent strategies.
    TF-IDF is fit per group (each group is its own document collection).
    Groups with fewer than 2 documents are skipped with a warning.
    """
    groups: dict[str, list[str]] = {}
    if grouping == "global":
        groups["global"] = [d.text() for d in corpus]
    elif grouping == "by_problem_type":
        for d in corpus:
            groups.setdefault(d.problem_type.name, []).append(d.text())
    elif grouping == "by_strategy":
        for strategy in top_strategies(corpus):
            docs = [
                u.text
                for d in corpus
                for u in d.utterances
                if u.speaker == SUPPORTER and u.strategy == strategy
            ]
            groups[strategy] = docs
    else:
        raise ValueError(f"unknown grouping: {grouping!r}")

    summaries: dict[str, SimilaritySummary] = {}
    warnings: list[str] = []
    for name, docs in groups.items():
        if len(docs) < 2:
            warnings.append(f"group {name!r} skipped: fewer than 2 documents")
            continue
        summaries[name] = pairwise_similarity(tfidf_vectors(docs, tokenizer))
    return summaries, warnings


def scenario_dialogue_similarity(
    corpus: list[Dialogue], tokenizer=tokenize
) -> tuple[SimilaritySummary, list[str]]:
    """Per-dialogue cosine between the scenario text and the concatenated
    dialogue text, TF-IDF fit on the union of both document sets."""
    eligible = []
    warnings = []
    for d in corpus:
        if d.scenario.strip():
            eligible.append(d)
        else:
            warnings.append(f"dialogue {d.id!r} skipped: empty scenario")
    if not eligible:
        raise ValueError("no dialogues with scenarios")
    docs: list[str] = []
    for d in eligible:
        docs.append(d.scenario)
        docs.append(d.text())
    vectors = tfidf_vectors(docs, tokenizer)
    values = [cosine(vectors[2 * i], vectors[2 * i + 1]) for i in range(len(eligible))]
    return summarize_values(values, n_items=len(eligible)), warnings


# --- lexical diversity ---------------------------------------------------------


def ngrams(tokens: list[str], n: int) -> list[tuple[str, ...]]:
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def distinct_n_corpus(docs: list[str], n: int, tokenizer=tokenize) -> float:
    """Corpus-wide distinct n-grams / total n-grams; n-grams never cross
    document boundaries. Reported x100 at the presentation layer."""
    distinct: set[tuple[str, ...]] = set()
    total = 0
    for doc in docs:
        grams = ngrams(tokenizer(doc), n)
        distinct.update(grams)
        total += len(grams)
    if total == 0:
        raise ValueError(f"no {n}-grams in corpus")
    return len(distinct) / total


# --- strategy analyses -----------------------------------------------------------


def strategy_distribution(corpus: list[Dialogue]) -> dict[str, float]:
    """Proportion of each canonical strategy over labeled supporter turns."""
    counts = Counter()
    for d in corpus:
        counts.update(d.supporter_strategies())
    total = sum(counts.values())
    if total == 0:
        raise ValueError("corpus has no labeled supporter turns")
    return {name: counts.get(name, 0) / total for name in STRATEGIES}


def strategy_transition(corpus: list[Dialogue]) -> tuple[np.ndarray, list[int]]:
    """6 x 8 within-bucket strategy proportions (rows sum to 1; empty buckets
    are zero rows and returned as flags)."""
    counts = np.zeros((N_BUCKETS, len(STRATEGIES)), dtype=float)
    index = {name: i for i, name in enumerate(STRATEGIES)}
    for d in corpus:
        sequence = [u.strategy for u in d.utterances if u.speaker == SUPPORTER]
        total = len(sequence)
        for k, strategy in enumerate(sequence, start=1):
            if strategy is not None:
                counts[progress_bucket(k, total), index[strategy]] += 1
    matrix = np.zeros_like(counts)
    empty_buckets = []
    for b in range(N_BUCKETS):
        row_total = counts[b].sum()
        if row_total:
            matrix[b] = counts[b] / row_total
        else:
            empty_buckets.append(b)
    return matrix, empty_buckets


def unique_strategy_histogram(corpus: list[Dialogue]) -> dict[int, int]:
    """Histogram of per-dialogue distinct strategy counts."""
    histogram: dict[int, int] = {}
    for d in corpus:
        k = len(set(d.supporter_strategies()))
        histogram[k] = histogram.get(k, 0) + 1
    return dict(sorted(histogram.items()))
