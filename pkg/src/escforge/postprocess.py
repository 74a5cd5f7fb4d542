"""Quality filters over generated corpora: redundant-greeting trimming,
seeker role-inconsistency detection, and dialogue-length regulation.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from pathlib import Path

from .corpus import SEEKER, Dialogue
from .supporter import is_farewell

# (reason, regex) applied to the start of seeker utterances, case-insensitive.
DEFAULT_PATTERNS: tuple[tuple[str, re.Pattern], ...] = tuple(
    (reason, re.compile(expr, re.IGNORECASE))
    for reason, expr in (
        ("supporter-empathy", r"^i understand how you feel"),
        ("supporter-empathy", r"^it sounds like you"),
        ("advice-opener", r"^have you considered"),
        ("advice-opener", r"^i recommend"),
        ("advice-opener", r"^you should"),
        ("advice-opener", r"^you could try"),
    )
)


@dataclass(frozen=True, slots=True)
class FilterPolicy:
    min_utterances: int = 8
    max_utterances: int = 30
    max_flags: int = 0


def load_patterns(path: str | Path) -> tuple[tuple[str, re.Pattern], ...]:
    """Load extra inconsistency regexes (one per line, # comments). File
    patterns carry the generic reason "custom-pattern"."""
    patterns = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            patterns.append(("custom-pattern", re.compile(line, re.IGNORECASE)))
    return tuple(patterns)


def trim_redundant_greetings(d: Dialogue, lexicon=None) -> Dialogue:
    """Reduce the trailing farewell run to at most one closing per speaker.

    Scanning back from the end, the maximal run of farewell utterances keeps
    only its first utterance per speaker (in dialogue order); interior
    utterances are never touched or edited.
    """
    utterances = list(d.utterances)
    start = len(utterances)
    while start > 0 and is_farewell(utterances[start - 1].text, lexicon):
        start -= 1
    if start == len(utterances):
        return d
    kept_speakers: set[str] = set()
    tail = []
    for u in utterances[start:]:
        if u.speaker not in kept_speakers:
            kept_speakers.add(u.speaker)
            tail.append(u)
    return replace(d, utterances=tuple(utterances[:start] + tail))


def detect_role_inconsistency(d: Dialogue, patterns=None) -> list[tuple[int, str]]:
    """Flag seeker utterances that read like supporter turns. Returns
    (utterance index, reason) pairs; supporter utterances are never flagged."""
    patterns = patterns if patterns is not None else DEFAULT_PATTERNS
    flags = []
    for i, u in enumerate(d.utterances):
        if u.speaker != SEEKER:
            continue
        for reason, pattern in patterns:
            if pattern.search(u.text):
                flags.append((i, reason))
                break
    return flags


def filter_corpus(
    corpus: list[Dialogue],
    policy: FilterPolicy = FilterPolicy(),
    *,
    patterns=None,
    lexicon=None,
) -> tuple[list[Dialogue], list[tuple[Dialogue, str]]]:
    """Trim greetings, then drop aborted / out-of-bounds / flagged dialogues.

    Returns (kept, dropped) with kept dialogues already trimmed; kept and
    dropped partition the input and every drop carries a reason.
    """
    kept: list[Dialogue] = []
    dropped: list[tuple[Dialogue, str]] = []
    for d in corpus:
        ok, trimmed, reason = _evaluate(d, policy, patterns, lexicon)
        if ok:
            kept.append(trimmed)
        else:
            dropped.append((trimmed, reason))
    return kept, dropped


def accepts(d: Dialogue, policy: FilterPolicy = FilterPolicy(), patterns=None, lexicon=None) -> tuple[bool, Dialogue]:
    """Single-dialogue acceptance check used for self-iteration gating."""
    ok, trimmed, _reason = _evaluate(d, policy, patterns, lexicon)
    return ok, trimmed


def _evaluate(d: Dialogue, policy: FilterPolicy, patterns, lexicon) -> tuple[bool, Dialogue, str]:
    trimmed = trim_redundant_greetings(d, lexicon)
    if trimmed.aborted:
        return False, trimmed, "aborted"
    n = len(trimmed.utterances)
    if n < policy.min_utterances:
        return False, trimmed, "too_short"
    if n > policy.max_utterances:
        return False, trimmed, "too_long"
    if len(detect_role_inconsistency(trimmed, patterns)) > policy.max_flags:
        return False, trimmed, "role_inconsistent"
    return True, trimmed, ""


def write_drop_report(dropped: list[tuple[Dialogue, str]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for d, reason in dropped:
            f.write(json.dumps({"id": d.id, "reason": reason}) + "\n")
