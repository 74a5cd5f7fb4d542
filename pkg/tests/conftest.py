from __future__ import annotations

import json

import pytest

from escforge.corpus import SEEKER, SUPPORTER, Dialogue, ProblemType, SeekerProfile, Utterance

PROFILE = SeekerProfile(
    name="Casey",
    gender="female",
    address="Springfield",
    occupation="teacher",
    personality="anxious, caring",
    hobbies="running",
)

PROBLEM = ProblemType(category="Interpersonal Relationships", name="Problems with Friends")

SCENARIO = (
    "I have been fighting with my best friend about money that I lent them last spring "
    "and now they will not answer any of my calls or messages."
)


def utt(speaker: str, text: str, strategy: str | None = None) -> Utterance:
    return Utterance(speaker=speaker, text=text, strategy=strategy)


def make_dialogue(pairs, *, id="d-1", scenario=SCENARIO, meta=None) -> Dialogue:
    """Build a dialogue from (speaker, text[, strategy]) tuples."""
    utterances = []
    for pair in pairs:
        speaker, text = pair[0], pair[1]
        strategy = pair[2] if len(pair) > 2 else None
        utterances.append(Utterance(speaker=speaker, text=text, strategy=strategy))
    return Dialogue(
        id=id,
        problem_type=PROBLEM,
        scenario=scenario,
        profile=PROFILE,
        utterances=tuple(utterances),
        meta=meta or {"generator_tag": "test", "rng_seed": 0, "created_at": "2000-01-01T00:00:00+00:00"},
    )


def alternating_dialogue(rounds: int, *, id="d-1", strategy="Question") -> Dialogue:
    pairs = []
    for r in range(1, rounds + 1):
        pairs.append((SEEKER, f"I keep worrying about round {r}."))
        pairs.append((SUPPORTER, f"What happened in round {r}?", strategy))
    return make_dialogue(pairs, id=id)


def write_fixture(path, entries) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for role_tag, text in entries:
            f.write(json.dumps({"role_tag": role_tag, "text": text}) + "\n")


def generation_entries(index: int, rounds: int = 5) -> list[tuple[str, str]]:
    """Fixture entries driving one full engine dialogue of `rounds` rounds,
    closing with a farewell exchange in the final round."""
    strategies = [
        "Question",
        "3. providing suggestions",
        "Reflection of feelings",
        "Affirmation and Reassurance.",
        "Others",
        "Information",
    ]
    entries = [
        (
            "scenario",
            f"Ever since argument number {index} with my closest friend about unpaid rent money "
            "I have been losing sleep every night and I cannot stop replaying every word we said.",
        ),
        (
            "profile",
            f"Name: Casey {index}\nGender: female\nAddress: Springfield\nOccupation: teacher\n"
            "Personality: anxious, caring\nHobbies: running",
        ),
    ]
    for r in range(1, rounds + 1):
        if r < rounds:
            entries.append((SEEKER, f"Dialogue {index}: I feel awful about round {r}."))
            entries.append(("counselor", strategies[(index + r) % len(strategies)]))
            entries.append((SUPPORTER, f"Dialogue {index}: tell me more about round {r}."))
        else:
            entries.append((SEEKER, "Thanks for your help, goodbye!"))
            entries.append(("counselor", "Others"))
            entries.append((SUPPORTER, "Take care, goodbye!"))
    return entries


@pytest.fixture
def gen_fixture_path(tmp_path):
    """A scripted fixture that drives a 5-dialogue batch end to end."""
    path = tmp_path / "generation_fixture.jsonl"
    entries = []
    for index in range(5):
        entries.extend(generation_entries(index))
    write_fixture(path, entries)
    return path
