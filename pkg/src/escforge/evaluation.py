"""Automatic evaluation: corpus BLEU, ROUGE-2/L, per-response distinct-n,
Fleiss' kappa, and the two interactive evaluation modes (reference context vs
generated context) over a reference corpus.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .corpus import SEEKER, SUPPORTER, Dialogue, Utterance
from .analysis import ngrams, tokenize

MODE_REFERENCE = "reference_context"
MODE_GENERATED = "generated_context"


def corpus_bleu(candidates: list[str], references: list[str], max_n: int, tokenizer=tokenize) -> float:
    """Corpus-level BLEU with uniform weights over 1..max_n gram precisions.

    Clipped n-gram counts are aggregated over the whole corpus before the
    geometric mean; standard brevity penalty; no smoothing (a zero aggregated
    precision zeroes the score). Reported x100.
    """
    if len(candidates) != len(references):
        raise ValueError("candidate/reference length mismatch")
    if not candidates:
        raise ValueError("empty corpus")
    cand_tokens = [tokenizer(c) for c in candidates]
    ref_tokens = [tokenizer(r) for r in references]
    matched = [0] * max_n
    total = [0] * max_n
    cand_length = 0
    ref_length = 0
    for cand, ref in zip(cand_tokens, ref_tokens):
        cand_length += len(cand)
        ref_length += len(ref)
        for n in range(1, max_n + 1):
            cand_counts = Counter(ngrams(cand, n))
            ref_counts = Counter(ngrams(ref, n))
            matched[n - 1] += sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
            total[n - 1] += sum(cand_counts.values())
    if any(t == 0 for t in total) or any(m == 0 for m in matched):
        return 0.0
    log_precision = sum(math.log(m / t) for m, t in zip(matched, total)) / max_n
    brevity = 1.0 if cand_length > ref_length else math.exp(1.0 - ref_length / cand_length)
    return 100.0 * brevity * math.exp(log_precision)


def _lcs_length(a: list, b: list) -> int:
    # single-row DP keeps memory at O(min side)
    if len(a) < len(b):
        a, b = b, a
    previous = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[-1]


def rouge(candidate: str, reference: str, variant: str, tokenizer=tokenize) -> float:
    """F1 of one candidate/reference pair; variant "rouge2" (clipped bigram
    overlap) or "rougeL" (LCS). Empty sequences score 0 with a warning."""
    cand = tokenizer(candidate)
    ref = tokenizer(reference)
    if not cand or not ref:
        warnings.warn("empty sequence in rouge; scoring 0", stacklevel=2)
        return 0.0
    if variant == "rouge2":
        cand_counts = Counter(ngrams(cand, 2))
        ref_counts = Counter(ngrams(ref, 2))
        overlap = sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
        cand_total = sum(cand_counts.values())
        ref_total = sum(ref_counts.values())
        if not cand_total or not ref_total or not overlap:
            return 0.0
        precision = overlap / cand_total
        recall = overlap / ref_total
    elif variant == "rougeL":
        lcs = _lcs_length(cand, ref)
        if not lcs:
            return 0.0
        precision = lcs / len(cand)
        recall = lcs / len(ref)
    else:
        raise ValueError(f"unknown rouge variant: {variant!r}")
    return 2 * precision * recall / (precision + recall)


def corpus_rouge(candidates: list[str], references: list[str], variant: str, tokenizer=tokenize) -> float:
    """Mean pairwise F1 over the corpus."""
    if len(candidates) != len(references):
        raise ValueError("candidate/reference length mismatch")
    if not candidates:
        raise ValueError("empty corpus")
    scores = [rouge(c, r, variant, tokenizer) for c, r in zip(candidates, references)]
    return sum(scores) / len(scores)


def distinct_n_responses(candidates: list[str], n: int, tokenizer=tokenize) -> float:
    """Per-response distinct-n ratio, macro-averaged, x100. Responses shorter
    than n tokens are skipped with a warning."""
    ratios = []
    for candidate in candidates:
        grams = ngrams(tokenizer(candidate), n)
        if not grams:
            warnings.warn(f"response shorter than {n} tokens skipped in distinct-{n}", stacklevel=2)
            continue
        ratios.append(len(set(grams)) / len(grams))
    if not ratios:
        raise ValueError(f"no response has >= {n} tokens")
    return 100.0 * sum(ratios) / len(ratios)


def fleiss_kappa(ratings: list[list[str]]) -> float:
    """Fleiss' kappa over an item x rater matrix of categorical labels.

    Degenerate case (every rating in one category, expected agreement 1)
    returns 1.0 with a warning flag.
    """
    if not ratings:
        raise ValueError("no rating items")
    n_raters = len(ratings[0])
    if n_raters < 2:
        raise ValueError("need at least 2 raters")
    if any(len(row) != n_raters for row in ratings):
        raise ValueError("every item must be rated by the same number of raters")
    categories = sorted({label for row in ratings for label in row})
    n_items = len(ratings)
    category_totals = Counter()
    agreement_sum = 0.0
    for row in ratings:
        counts = Counter(row)
        category_totals.update(counts)
        agreement_sum += (sum(c * c for c in counts.values()) - n_raters) / (n_raters * (n_raters - 1))
    p_bar = agreement_sum / n_items
    p_j = [category_totals[c] / (n_items * n_raters) for c in categories]
    p_e = sum(p * p for p in p_j)
    if p_e >= 1.0:
        warnings.warn("all ratings in one category; kappa undefined, returning 1.0", stacklevel=2)
        return 1.0
    return (p_bar - p_e) / (1.0 - p_e)


def load_ratings_csv(path: str | Path) -> list[list[str]]:
    """Read (item_id, rater_id, label) rows into an item x rater matrix.
    Raters are ordered by id within each item; items by first appearance."""
    by_item: dict[str, list[tuple[str, str]]] = {}
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        for row in reader:
            by_item.setdefault(row["item_id"], []).append((row["rater_id"], row["label"]))
    return [[label for _, label in sorted(pairs)] for pairs in by_item.values()]


# --- interactive evaluation -----------------------------------------------------


class EchoModel:
    """Returns the last seeker utterance text."""

    def respond(self, history: list[Utterance]) -> str:
        for u in reversed(history):
            if u.speaker == SEEKER:
                return u.text
        return ""


class CannedModel:
    """Returns scripted responses in call order (deterministic)."""

    def __init__(self, responses: list[str]):
        self._responses = list(responses)
        self._next = 0

    @classmethod
    def gold(cls, corpus: list[Dialogue]) -> CannedModel:
        """Canned model that replays the corpus' own supporter turns in
        evaluation order."""
        responses = [u.text for d in corpus for u in d.utterances if u.speaker == SUPPORTER]
        return cls(responses)

    def respond(self, history: list[Utterance]) -> str:
        if self._next >= len(self._responses):
            raise RuntimeError("canned model exhausted")
        text = self._responses[self._next]
        self._next += 1
        return text


class GatewayModel:
    """Adapter that turns gateway completions into supporter responses."""

    def __init__(self, backend, prompts, *, window: int = 6, temperature: float = 0.7, max_tokens: int = 256):
        from .supporter import render_history
        from .gateway import ChatRequest

        self._backend = backend
        self._prompts = prompts
        self._window = window
        self._temperature = temperature
        self._max_tokens = max_tokens
        self._render_history = render_history
        self._request_cls = ChatRequest

    def respond(self, history: list[Utterance]) -> str:
        prompt = self._prompts.render(
            "supporter",
            strategy="Others",
            example_dialogue="(none)",
            history=self._render_history(history, window=self._window),
        )
        req = self._request_cls(
            system_prompt="You are a supportive conversation partner.",
            messages=(("user", prompt),),
            role_tag=SUPPORTER,
            temperature=self._temperature,
            max_tokens=self._max_tokens,
        )
        return self._backend.complete(req)


@dataclass(frozen=True, slots=True)
class EvalPosition:
    dialogue_id: str
    position: int
    history: tuple[Utterance, ...]
    candidate: str
    reference: str


@dataclass(frozen=True, slots=True)
class EvalReport:
    mode: str
    n_responses: int
    n_skipped: int
    bleu2: float
    bleu4: float
    rouge2_f1: float
    rougeL_f1: float
    distinct2: float
    distinct3: float

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")


def iter_eval_positions(model, corpus: list[Dialogue], mode: str):
    """Yield one EvalPosition per supporter turn, dialogue by dialogue.

    reference_context: the history at position j is the gold prefix.
    generated_context: gold seeker turns, but the model's own earlier
    responses stand in for gold supporter turns. A model failure at a
    position is yielded with candidate None and the gold text fills the
    generated history so later positions stay well-formed.
    """
    if mode not in (MODE_REFERENCE, MODE_GENERATED):
        raise ValueError(f"unknown eval mode: {mode!r}")
    for d in corpus:
        generated_prefix: list[Utterance] = []
        for j, gold in enumerate(d.utterances):
            if gold.speaker != SUPPORTER:
                generated_prefix.append(gold)
                continue
            history = d.utterances[:j] if mode == MODE_REFERENCE else tuple(generated_prefix)
            try:
                candidate = model.respond(list(history))
            except Exception:
                candidate = None
            generated_prefix.append(
                gold if candidate is None else Utterance(SUPPORTER, candidate, gold.strategy)
            )
            yield EvalPosition(
                dialogue_id=d.id,
                position=j,
                history=tuple(history),
                candidate=candidate,
                reference=gold.text,
            )


def run_eval(model, corpus: list[Dialogue], mode: str, tokenizer=tokenize) -> EvalReport:
    if not corpus:
        raise ValueError("empty test corpus")
    candidates: list[str] = []
    references: list[str] = []
    skipped = 0
    for position in iter_eval_positions(model, corpus, mode):
        if position.candidate is None:
            skipped += 1
            continue
        candidates.append(position.candidate)
        references.append(position.reference)
    if not candidates:
        raise ValueError("model produced no responses")
    return EvalReport(
        mode=mode,
        n_responses=len(candidates),
        n_skipped=skipped,
        bleu2=corpus_bleu(candidates, references, 2, tokenizer),
        bleu4=corpus_bleu(candidates, references, 4, tokenizer),
        rouge2_f1=100.0 * corpus_rouge(candidates, references, "rouge2", tokenizer),
        rougeL_f1=100.0 * corpus_rouge(candidates, references, "rougeL", tokenizer),
        distinct2=distinct_n_responses(candidates, 2, tokenizer),
        distinct3=distinct_n_responses(candidates, 3, tokenizer),
    )
