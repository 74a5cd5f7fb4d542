"""Seeker-side persona forging: problem-type sampling, scenario and profile
generation from seed pools, and the seeker's conversational turns.
"""

from __future__ import annotations

import random
import re

from .corpus import (
    MIN_SCENARIO_WORDS,
    SEEKER,
    ProblemType,
    ProfileSeed,
    ScenarioSeed,
    SeedPools,
    SeekerProfile,
    Taxonomy,
    Utterance,
    word_count,
)
from .gateway import ChatRequest
from .prompts import PromptLibrary
from .supporter import render_history, truncate_sentences

GENERATION_ATTEMPTS = 3


class ScenarioTooShortError(RuntimeError):
    pass


class ProfileParseError(RuntimeError):
    pass


def sample_problem_type(taxonomy: Taxonomy, rng: random.Random) -> ProblemType:
    if not len(taxonomy):
        raise ValueError("empty taxonomy")
    return taxonomy.entries[rng.randrange(len(taxonomy))]


def pick_scenario_seed(pools: SeedPools, problem_type: ProblemType, rng: random.Random) -> ScenarioSeed:
    """Uniform over pool entries matching the problem type, falling back to
    the whole pool when none match."""
    if not pools.scenarios:
        raise ValueError("empty scenario pool")
    matching = [s for s in pools.scenarios if s.problem_type.name == problem_type.name]
    candidates = matching or pools.scenarios
    return candidates[rng.randrange(len(candidates))]


def pick_profile_seed(pools: SeedPools, problem_type: ProblemType, rng: random.Random) -> ProfileSeed:
    if not pools.profiles:
        raise ValueError("empty profile pool")
    matching = [s for s in pools.profiles if s.problem_type.name == problem_type.name]
    candidates = matching or pools.profiles
    return candidates[rng.randrange(len(candidates))]


def generate_scenario(
    problem_type: ProblemType,
    seed: ScenarioSeed,
    backend,
    prompts: PromptLibrary,
    *,
    attempts: int = GENERATION_ATTEMPTS,
    min_words: int = MIN_SCENARIO_WORDS,
    temperature: float = 0.7,
    max_tokens: int = 256,
) -> str:
    """Generate a new scenario from a seed triple, re-prompting (same seed)
    until the minimum word count holds."""
    prompt = prompts.render(
        "scenario",
        problem_type=problem_type.name,
        example_scenario=seed.scenario,
        example_dialogue=render_history(seed.dialogue.utterances, window=len(seed.dialogue.utterances)),
    )
    req = ChatRequest(
        system_prompt="You write grounded, specific counseling scenarios.",
        messages=(("user", prompt),),
        role_tag="scenario",
        temperature=temperature,
        max_tokens=max_tokens,
    )
    for _ in range(attempts):
        text = backend.complete(req).strip()
        if word_count(text) >= min_words:
            return text
    raise ScenarioTooShortError(
        f"no scenario of >= {min_words} words after {attempts} attempts for {problem_type.name!r}"
    )


_PROFILE_LINE = re.compile(r"^\s*[-*]?\s*(?P<key>[A-Za-z ]+?)\s*:\s*(?P<value>.+?)\s*$")


def parse_profile(text: str) -> SeekerProfile | None:
    """Line-oriented "Key: value" extraction with case-insensitive keys.
    Returns None unless all six attribute fields are present and non-empty."""
    values: dict[str, str] = {}
    for line in text.splitlines():
        m = _PROFILE_LINE.match(line)
        if not m:
            continue
        key = m.group("key").strip().lower()
        if key in SeekerProfile.FIELDS:
            values.setdefault(key, m.group("value"))
    if set(values) != set(SeekerProfile.FIELDS):
        return None
    profile = SeekerProfile.from_dict(values)
    return profile if profile.is_complete() else None


def generate_profile(
    problem_type: ProblemType,
    scenario: str,
    seed_profile: ProfileSeed,
    pools: SeedPools,
    backend,
    prompts: PromptLibrary,
    *,
    attempts: int = GENERATION_ATTEMPTS,
    temperature: float = 0.7,
    max_tokens: int = 256,
) -> SeekerProfile:
    """Generate a seeker profile and append the new (p, s, c') triple to the
    profile pool."""
    prompt = prompts.render(
        "profile",
        problem_type=problem_type.name,
        scenario=scenario,
        example_profile=seed_profile.profile.render(),
    )
    req = ChatRequest(
        system_prompt="You invent concise fictional personas.",
        messages=(("user", prompt),),
        role_tag="profile",
        temperature=temperature,
        max_tokens=max_tokens,
    )
    for _ in range(attempts):
        profile = parse_profile(backend.complete(req))
        if profile is not None:
            pools.add_profile(problem_type, scenario, profile)
            return profile
    raise ProfileParseError(f"unparseable profile after {attempts} attempts for {problem_type.name!r}")


def seeker_turn(
    profile: SeekerProfile,
    scenario: str,
    history,
    backend,
    prompts: PromptLibrary,
    *,
    window: int = 6,
    sentence_cap: int = 3,
    temperature: float = 0.7,
    max_tokens: int = 256,
) -> tuple[Utterance, str]:
    """Produce the seeker's next utterance from the last-`window` history.

    Returns (utterance, rendered_prompt) so callers can log and assert on the
    prompt window.
    """
    tail = list(history)[-window:]
    prompt = prompts.render(
        "seeker",
        profile=profile.render(),
        scenario=scenario,
        history=render_history(tail, window=window),
    )
    req = ChatRequest(
        system_prompt="You are role-playing a person seeking emotional support.",
        messages=(("user", prompt),),
        role_tag=SEEKER,
        temperature=temperature,
        max_tokens=max_tokens,
    )
    text = backend.complete(req).strip()
    return Utterance(speaker=SEEKER, text=truncate_sentences(text, sentence_cap)), prompt
