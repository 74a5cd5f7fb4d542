"""Strategy-conditioned supporter replies and utterance hygiene.

The sentence splitter is deliberately rule-based (terminators . ! ? followed
by whitespace or end of text, no abbreviation handling) so that truncation is
deterministic and documented.
"""

from __future__ import annotations

import re
from pathlib import Path

from .corpus import SUPPORTER, Dialogue, Utterance, data_path

_SENTENCE_END = re.compile(r"[.!?]+(?=\s|$)")
_NON_WORD = re.compile(r"[^0-9a-z]+")

SENTENCE_CAP = 3
FAREWELL_MAX_WORDS = 8


def split_sentences(text: str) -> list[str]:
    """Split on sentence terminators, keeping them. "Dr. Smith" splits; that
    is accepted, dialogue text rarely abbreviates."""
    sentences = []
    start = 0
    for m in _SENTENCE_END.finditer(text):
        segment = text[start : m.end()].strip()
        if segment:
            sentences.append(segment)
        start = m.end()
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def truncate_sentences(text: str, cap: int = SENTENCE_CAP) -> str:
    """First `cap` sentences joined by single spaces; shorter text unchanged."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    sentences = split_sentences(text)
    if len(sentences) <= cap:
        return text
    return " ".join(sentences[:cap])


def load_farewell_lexicon(path: str | Path | None = None) -> tuple[str, ...]:
    path = Path(path) if path else data_path("farewell_lexicon.txt")
    phrases = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            phrases.append(line.lower())
    return tuple(phrases)


_DEFAULT_LEXICON: tuple[str, ...] | None = None


def _default_lexicon() -> tuple[str, ...]:
    global _DEFAULT_LEXICON
    if _DEFAULT_LEXICON is None:
        _DEFAULT_LEXICON = load_farewell_lexicon()
    return _DEFAULT_LEXICON


def is_farewell(text: str, lexicon: tuple[str, ...] | None = None) -> bool:
    """True iff the punctuation-stripped text is short (<= 8 words) and
    contains a lexicon phrase on word boundaries."""
    lexicon = lexicon if lexicon is not None else _default_lexicon()
    normalized = _NON_WORD.sub(" ", text.lower()).strip()
    words = normalized.split()
    if not words or len(words) > FAREWELL_MAX_WORDS:
        return False
    padded = f" {' '.join(words)} "
    return any(f" {phrase} " in padded for phrase in lexicon)


def render_history(utterances, window: int = 6) -> str:
    """Render the last `window` utterances as Seeker:/Supporter: lines."""
    tail = list(utterances)[-window:]
    if not tail:
        return "(the conversation has not started yet)"
    return "\n".join(f"{u.speaker.capitalize()}: {u.text}" for u in tail)


def supporter_turn(
    strategy: str,
    history,
    exemplar: Dialogue | None,
    backend,
    prompts,
    *,
    window: int = 6,
    sentence_cap: int = SENTENCE_CAP,
    temperature: float = 0.7,
    max_tokens: int = 256,
) -> tuple[Utterance, str]:
    """Generate one supporter reply under the chosen strategy.

    Returns (utterance, rendered_prompt). The strategy tag records intent,
    not verified compliance.
    """
    from .gateway import ChatRequest  # circular-import avoidance

    example = (
        render_history(exemplar.utterances, window=len(exemplar.utterances))
        if exemplar is not None and exemplar.utterances
        else "(no example available)"
    )
    prompt = prompts.render(
        "supporter",
        strategy=strategy,
        example_dialogue=example,
        history=render_history(history, window=window),
    )
    req = ChatRequest(
        system_prompt="You are a supportive conversation partner in a role-play.",
        messages=(("user", prompt),),
        role_tag=SUPPORTER,
        temperature=temperature,
        max_tokens=max_tokens,
    )
    text = backend.complete(req)
    utterance = Utterance(speaker=SUPPORTER, text=truncate_sentences(text.strip(), sentence_cap), strategy=strategy)
    return utterance, prompt
