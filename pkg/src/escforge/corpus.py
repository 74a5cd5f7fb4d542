"""Canonical dialogue corpus model: types, JSONL (de)serialization, validation.

Everything downstream (generation, filtering, analysis, evaluation, serving)
goes through the types in this module. All types are immutable values after
construction and all operations are pure functions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

SEEKER = "seeker"
SUPPORTER = "supporter"

# Canonical support strategies, in the order used everywhere a fixed label
# order matters (tie breaking, serialized model rows, numbered prompt choices).
STRATEGIES: tuple[str, ...] = (
    "Question",
    "Others",
    "Providing Suggestions",
    "Affirmation and Reassurance",
    "Self-disclosure",
    "Reflection of Feelings",
    "Information",
    "Restatement or Paraphrasing",
)

STRATEGY_INDEX: dict[str, int] = {name: i for i, name in enumerate(STRATEGIES)}

# Lowercased alias -> canonical label. Case-insensitive exact matches are
# handled before this table is consulted, so only true variants live here.
STRATEGY_ALIASES: dict[str, str] = {
    "affirmation & reassurance": "Affirmation and Reassurance",
    "reassurance": "Affirmation and Reassurance",
    "providing suggestion": "Providing Suggestions",
    "suggestion": "Providing Suggestions",
    "suggestions": "Providing Suggestions",
    "provide suggestions": "Providing Suggestions",
    "self disclosure": "Self-disclosure",
    "reflection of feeling": "Reflection of Feelings",
    "reflections of feelings": "Reflection of Feelings",
    "restatement": "Restatement or Paraphrasing",
    "paraphrasing": "Restatement or Paraphrasing",
    "restatement or paraphrase": "Restatement or Paraphrasing",
    "information sharing": "Information",
    "providing information": "Information",
    "other": "Others",
}

VIOLATION_CODES = (
    "too_short",
    "too_long",
    "missing_strategy",
    "non_alternating",
    "empty_utterance",
    "short_scenario",
)

MIN_SCENARIO_WORDS = 20


class CorpusFormatError(ValueError):
    """Raised when a corpus or pool file violates the record schema."""


def data_path(*parts: str) -> Path:
    """Path to a file shipped in the package data directory."""
    return Path(str(resources.files("escforge").joinpath("data", *parts)))


def word_count(text: str) -> int:
    """Number of maximal non-whitespace runs."""
    return len(text.split())


def canonicalize_strategy(text: str) -> str:
    """Strict strategy normalization used by loaders: trim + case-insensitive
    match against canonical names and the alias table. Raises on no match."""
    key = text.strip().lower()
    for name in STRATEGIES:
        if key == name.lower():
            return name
    if key in STRATEGY_ALIASES:
        return STRATEGY_ALIASES[key]
    raise CorpusFormatError(f"unknown strategy label: {text!r}")


@dataclass(frozen=True, slots=True)
class ProblemType:
    category: str
    name: str


@dataclass(frozen=True, slots=True)
class SeekerProfile:
    name: str
    gender: str
    address: str
    occupation: str
    personality: str
    hobbies: str

    FIELDS = ("name", "gender", "address", "occupation", "personality", "hobbies")

    def to_dict(self) -> dict[str, str]:
        return {k: getattr(self, k) for k in self.FIELDS}

    @classmethod
    def from_dict(cls, payload: dict) -> SeekerProfile:
        return cls(**{k: str(payload.get(k, "")) for k in cls.FIELDS})

    def is_complete(self) -> bool:
        return all(getattr(self, k).strip() for k in self.FIELDS)

    def render(self) -> str:
        return "\n".join(f"{k.capitalize()}: {getattr(self, k)}" for k in self.FIELDS)


@dataclass(frozen=True, slots=True)
class Utterance:
    speaker: str
    text: str
    strategy: str | None = None

    def to_dict(self) -> dict:
        return {"speaker": self.speaker, "text": self.text, "strategy": self.strategy}


@dataclass(frozen=True, slots=True)
class Dialogue:
    id: str
    problem_type: ProblemType
    scenario: str
    profile: SeekerProfile
    utterances: tuple[Utterance, ...]
    meta: dict = field(default_factory=dict)

    @property
    def aborted(self) -> bool:
        return bool(self.meta.get("aborted"))

    def supporter_strategies(self) -> list[str]:
        return [u.strategy for u in self.utterances if u.speaker == SUPPORTER and u.strategy]

    def text(self) -> str:
        """Full dialogue text without speaker tags (analysis document unit)."""
        return " ".join(u.text for u in self.utterances)


@dataclass(frozen=True, slots=True)
class ValidationPolicy:
    min_utterances: int = 8
    max_utterances: int = 30
    min_scenario_words: int = MIN_SCENARIO_WORDS


def dialogue_to_record(d: Dialogue) -> dict:
    return {
        "id": d.id,
        "problem_type": d.problem_type.name,
        "category": d.problem_type.category,
        "scenario": d.scenario,
        "profile": d.profile.to_dict(),
        "utterances": [u.to_dict() for u in d.utterances],
        "meta": d.meta,
    }


_KNOWN_KEYS = {"id", "problem_type", "category", "scenario", "profile", "utterances", "meta"}


def dialogue_from_record(record: dict, *, where: str = "record") -> Dialogue:
    """Build a Dialogue from one JSONL record, normalizing strategy labels.

    Unknown top-level keys are preserved under meta so that save/load
    round-trips keep them. Schema violations raise CorpusFormatError
    naming `where` (typically "line N").
    """
    if not isinstance(record, dict):
        raise CorpusFormatError(f"record is not an object at {where}")
    utterances = []
    for u in record.get("utterances", []):
        speaker = u.get("speaker")
        if speaker not in (SEEKER, SUPPORTER):
            raise CorpusFormatError(f"unknown speaker at {where}: {speaker!r}")
        text = u.get("text", "")
        if not isinstance(text, str) or not text.strip():
            raise CorpusFormatError(f"empty utterance text at {where}")
        strategy = u.get("strategy")
        if strategy is not None:
            if speaker == SEEKER:
                raise CorpusFormatError(f"strategy on a seeker utterance at {where}")
            try:
                strategy = canonicalize_strategy(strategy)
            except CorpusFormatError as exc:
                raise CorpusFormatError(f"{exc} at {where}") from None
        utterances.append(Utterance(speaker=speaker, text=text, strategy=strategy))
    meta = dict(record.get("meta") or {})
    for key, value in record.items():
        if key not in _KNOWN_KEYS:
            meta[key] = value
    return Dialogue(
        id=str(record.get("id", "")),
        problem_type=ProblemType(category=str(record.get("category", "")), name=str(record.get("problem_type", ""))),
        scenario=str(record.get("scenario", "")),
        profile=SeekerProfile.from_dict(record.get("profile") or {}),
        utterances=tuple(utterances),
        meta=meta,
    )


def load_corpus(path: str | Path) -> list[Dialogue]:
    """Load a JSONL corpus, strictly: malformed lines, unknown speakers and
    unnormalizable strategy strings all raise with the offending line number."""
    dialogues = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"malformed JSON at line {lineno}: {exc.msg}") from None
            dialogues.append(dialogue_from_record(record, where=f"line {lineno}"))
    return dialogues


def save_corpus(corpus: list[Dialogue], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for d in corpus:
            f.write(json.dumps(dialogue_to_record(d), ensure_ascii=False) + "\n")


def merge_consecutive(d: Dialogue) -> Dialogue:
    """Concatenate adjacent same-speaker utterances with a single space.

    A merged supporter utterance keeps the strategy of its first constituent
    that has one. Idempotent; preserves total text content.
    """
    merged: list[Utterance] = []
    for u in d.utterances:
        if merged and merged[-1].speaker == u.speaker:
            prev = merged[-1]
            merged[-1] = Utterance(
                speaker=prev.speaker,
                text=f"{prev.text} {u.text}",
                strategy=prev.strategy if prev.strategy is not None else u.strategy,
            )
        else:
            merged.append(u)
    return replace(d, utterances=tuple(merged))


def validate_dialogue(d: Dialogue, policy: ValidationPolicy = ValidationPolicy()) -> list[str]:
    """Return violation codes (empty list means valid under the policy)."""
    violations: list[str] = []
    n = len(d.utterances)
    if n < policy.min_utterances:
        violations.append("too_short")
    if n > policy.max_utterances:
        violations.append("too_long")
    if any(u.speaker == SUPPORTER and u.strategy is None for u in d.utterances):
        violations.append("missing_strategy")
    alternates = all(a.speaker != b.speaker for a, b in zip(d.utterances, d.utterances[1:]))
    if n and (d.utterances[0].speaker != SEEKER or not alternates):
        violations.append("non_alternating")
    if any(not u.text.strip() for u in d.utterances):
        violations.append("empty_utterance")
    if word_count(d.scenario) < policy.min_scenario_words:
        violations.append("short_scenario")
    return violations


# --- problem-type taxonomy -------------------------------------------------


class Taxonomy:
    """The fixed problem-type taxonomy: (category, name) pairs."""

    def __init__(self, entries: list[ProblemType]):
        if not entries:
            raise ValueError("empty taxonomy")
        names = [e.name for e in entries]
        if len(set(n.lower() for n in names)) != len(names):
            raise ValueError("duplicate problem type name in taxonomy")
        self.entries = tuple(entries)
        self._by_name = {e.name.lower(): e for e in entries}

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def categories(self) -> list[str]:
        seen: dict[str, None] = {}
        for e in self.entries:
            seen.setdefault(e.category)
        return list(seen)

    def find(self, name: str) -> ProblemType | None:
        return self._by_name.get(name.strip().lower())


def load_taxonomy(path: str | Path | None = None) -> Taxonomy:
    """Load the taxonomy TSV (category<TAB>name per line, # comments)."""
    path = Path(path) if path else data_path("taxonomy.tsv")
    entries = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise CorpusFormatError(f"bad taxonomy line {lineno}: expected category<TAB>name")
        entries.append(ProblemType(category=parts[0].strip(), name=parts[1].strip()))
    return Taxonomy(entries)


# --- seed pools -------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class ScenarioSeed:
    problem_type: ProblemType
    scenario: str
    dialogue: Dialogue


@dataclass(frozen=True, slots=True)
class ProfileSeed:
    problem_type: ProblemType
    scenario: str
    profile: SeekerProfile


class SeedPools:
    """Scenario pool S of (p, s, D) and profile pool C of (p, s, c).

    Append-only within a run; every stored scenario has at least
    MIN_SCENARIO_WORDS whitespace-delimited words.
    """

    def __init__(self, scenarios: list[ScenarioSeed] | None = None, profiles: list[ProfileSeed] | None = None):
        self.scenarios: list[ScenarioSeed] = []
        self.profiles: list[ProfileSeed] = []
        for seed in scenarios or []:
            self.add_scenario(seed.problem_type, seed.scenario, seed.dialogue)
        for seed in profiles or []:
            self.add_profile(seed.problem_type, seed.scenario, seed.profile)

    def add_scenario(self, problem_type: ProblemType, scenario: str, dialogue: Dialogue) -> None:
        if word_count(scenario) < MIN_SCENARIO_WORDS:
            raise ValueError(f"scenario under {MIN_SCENARIO_WORDS} words cannot enter the pool")
        self.scenarios.append(ScenarioSeed(problem_type, scenario, dialogue))

    def add_profile(self, problem_type: ProblemType, scenario: str, profile: SeekerProfile) -> None:
        if word_count(scenario) < MIN_SCENARIO_WORDS:
            raise ValueError(f"scenario under {MIN_SCENARIO_WORDS} words cannot enter the pool")
        if not profile.is_complete():
            raise ValueError("profile with empty attribute fields cannot enter the pool")
        self.profiles.append(ProfileSeed(problem_type, scenario, profile))

    def save(self, scenario_path: str | Path, profile_path: str | Path) -> None:
        with open(scenario_path, "w", encoding="utf-8") as f:
            for seed in self.scenarios:
                record = dialogue_to_record(seed.dialogue)
                record["pool_role"] = "scenario"
                record["problem_type"] = seed.problem_type.name
                record["category"] = seed.problem_type.category
                record["scenario"] = seed.scenario
                f.write(json.dumps(record, ensure_ascii=False) + "\n")
        with open(profile_path, "w", encoding="utf-8") as f:
            for seed in self.profiles:
                record = {
                    "id": "",
                    "pool_role": "profile",
                    "problem_type": seed.problem_type.name,
                    "category": seed.problem_type.category,
                    "scenario": seed.scenario,
                    "profile": seed.profile.to_dict(),
                    "utterances": [],
                    "meta": {},
                }
                f.write(json.dumps(record, ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, scenario_path: str | Path, profile_path: str | Path) -> SeedPools:
        pools = cls()
        for d in load_corpus(scenario_path):
            pools.add_scenario(d.problem_type, d.scenario, d)
        for d in load_corpus(profile_path):
            pools.add_profile(d.problem_type, d.scenario, d.profile)
        return pools

    @classmethod
    def load_starter(cls) -> SeedPools:
        """The small implementer-authored starter pools shipped with the package."""
        return cls.load(data_path("seed_scenarios.jsonl"), data_path("seed_profiles.jsonl"))


# --- ESConv ingestion (plumbing) --------------------------------------------

_ESCONV_SPEAKERS = {"seeker": SEEKER, "usr": SEEKER, "supporter": SUPPORTER, "sys": SUPPORTER}

_PLACEHOLDER_PROFILE = SeekerProfile(
    name="unspecified", gender="unspecified", address="unspecified",
    occupation="unspecified", personality="unspecified", hobbies="unspecified",
)


def esconv_to_corpus(path: str | Path, taxonomy: Taxonomy | None = None) -> list[Dialogue]:
    """Convert the public ESConv release (JSON array or JSONL) to our schema.

    Tolerant by design: unannotated supporter turns keep strategy None and
    unknown strategy strings are dropped rather than rejected, since this is
    ingestion of third-party data, not a load of our own corpus.
    """
    raw = Path(path).read_text(encoding="utf-8")
    try:
        entries = json.loads(raw)
    except json.JSONDecodeError:
        entries = [json.loads(line) for line in raw.splitlines() if line.strip()]
    dialogues = []
    for i, entry in enumerate(entries):
        type_name = str(entry.get("problem_type", ""))
        problem_type = (taxonomy.find(type_name) if taxonomy else None) or ProblemType(
            category="ESConv", name=type_name
        )
        utterances = []
        for turn in entry.get("dialog", []):
            speaker = _ESCONV_SPEAKERS.get(str(turn.get("speaker", "")).lower())
            text = str(turn.get("content") or turn.get("text") or "").strip()
            if speaker is None or not text:
                continue
            strategy = None
            if speaker == SUPPORTER:
                label = (turn.get("annotation") or {}).get("strategy") or turn.get("strategy")
                if label:
                    try:
                        strategy = canonicalize_strategy(str(label))
                    except CorpusFormatError:
                        strategy = None
            utterances.append(Utterance(speaker=speaker, text=text, strategy=strategy))
        dialogues.append(
            Dialogue(
                id=f"esconv-{i:04d}",
                problem_type=problem_type,
                scenario=str(entry.get("situation", "")),
                profile=_PLACEHOLDER_PROFILE,
                utterances=tuple(utterances),
                meta={"generator_tag": "esconv-import", "rng_seed": 0, "created_at": "1970-01-01T00:00:00+00:00"},
            )
        )
    return dialogues


def drop_leading_greetings(d: Dialogue) -> Dialogue:
    """Drop utterances before the first seeker utterance (ESConv-style prep)."""
    utterances = list(d.utterances)
    while utterances and utterances[0].speaker != SEEKER:
        utterances.pop(0)
    return replace(d, utterances=tuple(utterances))
