"""Support-strategy selection: a tolerant label normalizer, a statistical
transition-model counselor fit from labeled corpora, and a prompted-LLM
counselor, behind one interface so backends can be swapped.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import SUPPORTER, STRATEGIES, STRATEGY_ALIASES, Dialogue
from .gateway import ChatRequest, GatewayError
from .prompts import PromptLibrary
from .supporter import render_history

N_BUCKETS = 6
N_STRATEGIES = len(STRATEGIES)

_LIST_MARKER = re.compile(r"^\s*(?:[-*•]\s*|\(?\d{1,2}[.):]\s*)")
_QUOTES = "\"'“”‘’`"


def normalize_strategy_label(text: str) -> str:
    """Map free-form LLM output to a canonical strategy label (total function).

    Trims, strips list markers/quotes/trailing punctuation, matches
    case-insensitively against canonical names and the alias table; a bare
    choice number maps through the canonical ordering; anything else is
    Others.
    """
    cleaned = _LIST_MARKER.sub("", text.strip())
    cleaned = cleaned.strip().strip(_QUOTES).strip()
    cleaned = cleaned.rstrip(".!?,;:").strip()
    if cleaned.isdigit():
        index = int(cleaned) - 1
        if 0 <= index < N_STRATEGIES:
            return STRATEGIES[index]
        return "Others"
    key = cleaned.lower()
    for name in STRATEGIES:
        if key == name.lower():
            return name
    return STRATEGY_ALIASES.get(key, "Others")


def progress_bucket(turn_index: int, total: int) -> int:
    """Bucket of the k-th supporter turn (1-based) out of `total`:
    floor(6*(k-1)/total), clamped to 5."""
    if turn_index < 1 or total < 1:
        raise ValueError("turn_index and total must be >= 1")
    return min(N_BUCKETS * (turn_index - 1) // total, N_BUCKETS - 1)


@dataclass
class TransitionModel:
    """Empirical strategy-transition probabilities.

    prior[j]            -- P(first supporter strategy = j)
    transitions[b,i,j]  -- P(next = j | previous = i, progress bucket b)
    counts / prior_counts are the raw observation tensors, kept for
    inspection; fallback_rows lists the (bucket, prev) rows that had zero
    observations and were filled with the global marginal.
    """

    labels: tuple[str, ...]
    prior: np.ndarray
    transitions: np.ndarray
    counts: np.ndarray
    prior_counts: np.ndarray
    fallback_rows: list[tuple[int, int]] = field(default_factory=list)

    def row(self, prev: str | None, bucket: int) -> np.ndarray:
        if prev is None:
            return self.prior
        return self.transitions[bucket, self.labels.index(prev)]

    def argmax_next(self, prev: str | None, bucket: int) -> str:
        # np.argmax returns the first maximum, i.e. canonical-order tie break
        return self.labels[int(np.argmax(self.row(prev, bucket)))]

    def sample_next(self, prev: str | None, bucket: int, rng: random.Random) -> str:
        weights = self.row(prev, bucket)
        return rng.choices(self.labels, weights=weights.tolist(), k=1)[0]

    def to_json(self) -> dict:
        return {
            "prior": self.prior.tolist(),
            "transitions": self.transitions.tolist(),
            "labels": list(self.labels),
            "counts": self.counts.tolist(),
            "prior_counts": self.prior_counts.tolist(),
            "fallback_rows": [list(r) for r in self.fallback_rows],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def from_json(cls, payload: dict) -> TransitionModel:
        labels = tuple(payload["labels"])
        prior = np.asarray(payload["prior"], dtype=float)
        transitions = np.asarray(payload["transitions"], dtype=float)
        if prior.shape != (len(labels),) or transitions.shape != (N_BUCKETS, len(labels), len(labels)):
            raise ValueError("transition model arrays have wrong shapes")
        _check_rows(prior[None, :])
        _check_rows(transitions.reshape(-1, len(labels)))
        counts = np.asarray(payload.get("counts", np.zeros_like(transitions)), dtype=int)
        prior_counts = np.asarray(payload.get("prior_counts", np.zeros_like(prior)), dtype=int)
        fallback = [tuple(r) for r in payload.get("fallback_rows", [])]
        return cls(labels, prior, transitions, counts, prior_counts, fallback)

    @classmethod
    def load(cls, path: str | Path) -> TransitionModel:
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _check_rows(rows: np.ndarray, tol: float = 1e-9) -> None:
    if (rows < -tol).any():
        raise ValueError("negative probability in transition model")
    sums = rows.sum(axis=1)
    if not np.allclose(sums, 1.0, atol=1e-6):
        raise ValueError("transition model row does not sum to 1")


def _labeled_strategy_sequence(d: Dialogue) -> list[str | None]:
    return [u.strategy for u in d.utterances if u.speaker == SUPPORTER]


def fit_transition_model(corpus: list[Dialogue]) -> TransitionModel:
    """Maximum-likelihood estimates of prior and per-bucket transitions.

    The bucket of a transition is the bucket of its target turn. Pairs with an
    unlabeled endpoint are skipped; rows never observed fall back to the
    global marginal over next strategies and are flagged.
    """
    counts = np.zeros((N_BUCKETS, N_STRATEGIES, N_STRATEGIES), dtype=int)
    prior_counts = np.zeros(N_STRATEGIES, dtype=int)
    index = {name: i for i, name in enumerate(STRATEGIES)}
    labeled_turns = 0
    for d in corpus:
        sequence = _labeled_strategy_sequence(d)
        total = len(sequence)
        if not total:
            continue
        labeled_turns += sum(1 for s in sequence if s is not None)
        if sequence[0] is not None:
            prior_counts[index[sequence[0]]] += 1
        for k in range(2, total + 1):
            prev, nxt = sequence[k - 2], sequence[k - 1]
            if prev is None or nxt is None:
                continue
            counts[progress_bucket(k, total), index[prev], index[nxt]] += 1
    if labeled_turns == 0:
        raise ValueError("corpus has no labeled supporter turns")

    marginal_counts = counts.sum(axis=(0, 1))
    if marginal_counts.sum() > 0:
        marginal = marginal_counts / marginal_counts.sum()
    elif prior_counts.sum() > 0:
        marginal = prior_counts / prior_counts.sum()
    else:
        marginal = np.full(N_STRATEGIES, 1.0 / N_STRATEGIES)

    transitions = np.empty_like(counts, dtype=float)
    fallback_rows: list[tuple[int, int]] = []
    for b in range(N_BUCKETS):
        for i in range(N_STRATEGIES):
            row_total = counts[b, i].sum()
            if row_total:
                transitions[b, i] = counts[b, i] / row_total
            else:
                transitions[b, i] = marginal
                fallback_rows.append((b, i))
    prior = prior_counts / prior_counts.sum() if prior_counts.sum() else marginal.copy()
    return TransitionModel(
        labels=STRATEGIES,
        prior=prior,
        transitions=transitions,
        counts=counts,
        prior_counts=prior_counts,
        fallback_rows=fallback_rows,
    )


@dataclass(frozen=True, slots=True)
class Decision:
    """One counselor decision, kept for the engine's provenance log."""

    strategy: str
    mode: str
    prompt: str | None = None
    raw_completion: str | None = None
    fell_back: bool = False


@dataclass
class Counselor:
    """Strategy selector, in prompted, statistical or hybrid mode.

    expected_length is the assumed total number of supporter turns used for
    live progress-bucket computation (true length is unknown mid-dialogue).
    """

    mode: str = "statistical"
    model: TransitionModel | None = None
    backend: object | None = None
    prompts: PromptLibrary | None = None
    expected_length: int = 12
    sample: bool = False
    history_window: int = 6
    temperature: float = 0.3
    max_tokens: int = 16

    def __post_init__(self):
        if self.mode not in ("prompted", "statistical", "hybrid"):
            raise ValueError(f"unknown counselor mode: {self.mode!r}")
        if self.mode == "statistical" and self.model is None:
            raise ValueError("statistical counselor needs a transition model")
        if self.mode in ("prompted", "hybrid") and (self.backend is None or self.prompts is None):
            raise ValueError("prompted counselor needs a backend and prompts")
        if self.mode == "hybrid" and self.model is None:
            raise ValueError("hybrid counselor needs a transition model to fall back on")

    def decide(self, history, rng: random.Random) -> Decision:
        history = list(history)
        if not history or history[-1].speaker == SUPPORTER:
            raise ValueError("history must end with a seeker utterance")
        if self.mode in ("prompted", "hybrid"):
            try:
                return self._decide_prompted(history)
            except GatewayError:
                if self.model is None:
                    raise
                decision = self._decide_statistical(history, rng)
                return Decision(decision.strategy, "statistical", fell_back=True)
        return self._decide_statistical(history, rng)

    def _decide_prompted(self, history) -> Decision:
        numbered = "\n".join(f"{i + 1}. {name}" for i, name in enumerate(STRATEGIES))
        prompt = self.prompts.render(
            "counselor",
            history=render_history(history, window=self.history_window),
            strategies=numbered,
        )
        req = ChatRequest(
            system_prompt="You select counseling strategies.",
            messages=(("user", prompt),),
            role_tag="counselor",
            temperature=self.temperature,
            max_tokens=self.max_tokens,
        )
        raw = self.backend.complete(req)
        return Decision(normalize_strategy_label(raw), "prompted", prompt=prompt, raw_completion=raw)

    def _decide_statistical(self, history, rng: random.Random) -> Decision:
        completed = sum(1 for u in history if u.speaker == SUPPORTER)
        prev = next((u.strategy for u in reversed(history) if u.speaker == SUPPORTER and u.strategy), None)
        bucket = min(N_BUCKETS * completed // self.expected_length, N_BUCKETS - 1)
        if self.sample:
            strategy = self.model.sample_next(prev, bucket, rng)
        else:
            strategy = self.model.argmax_next(prev, bucket)
        return Decision(strategy, "statistical")


def select_strategy(counselor: Counselor, history, rng: random.Random) -> str:
    """Pick the next support strategy for a history ending in a seeker turn."""
    return counselor.decide(history, rng).strategy
