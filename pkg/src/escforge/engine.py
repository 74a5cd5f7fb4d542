"""Dialogue orchestration: one seeker/counselor/supporter loop per dialogue,
and batch generation with self-iterating seed pools under reproducible
seeding.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

from .corpus import SEEKER, SUPPORTER, Dialogue, ProblemType, SeedPools, SeekerProfile, Taxonomy
from .counselor import Counselor, Decision
from .gateway import GatewayError
from .prompts import PromptLibrary
from .postprocess import FilterPolicy, accepts
from .seeker import (
    generate_profile,
    generate_scenario,
    pick_profile_seed,
    pick_scenario_seed,
    sample_problem_type,
    seeker_turn,
)
from .supporter import is_farewell, supporter_turn

HISTORY_WINDOW = 6
SENTENCE_CAP = 3

# Fixed base time: generated corpora must be fully determined by
# (fixtures, seed, config), so created_at cannot be wall clock.
BATCH_EPOCH = datetime(2000, 1, 1, tzinfo=timezone.utc)


@dataclass
class RoleBackends:
    seeker: object
    supporter: object
    counselor: object | None = None
    scenario: object | None = None
    profile: object | None = None

    @classmethod
    def shared(cls, backend) -> RoleBackends:
        """One backend serving every role (scripted fixtures work this way:
        each role consumes its own tag queue)."""
        return cls(seeker=backend, supporter=backend, counselor=backend, scenario=backend, profile=backend)


@dataclass
class EngineConfig:
    max_rounds: int = 12
    min_rounds_for_acceptance: int = 4
    history_window: int = HISTORY_WINDOW
    sentence_cap: int = SENTENCE_CAP
    counselor_mode: str = "prompted"
    rng_seed: int = 0
    self_iterate: bool = True
    generator_tag: str = "escforge"
    temperature: float = 0.7
    max_tokens: int = 256

    def __post_init__(self):
        if self.min_rounds_for_acceptance > self.max_rounds:
            raise ValueError("min_rounds_for_acceptance must be <= max_rounds")


@dataclass(frozen=True, slots=True)
class PromptLogEntry:
    role: str
    round: int
    n_history: int
    prompt: str


@dataclass
class DialogueTrace:
    """Per-dialogue provenance: every rendered prompt plus one counselor
    decision per supporter turn."""

    prompts: list[PromptLogEntry] = field(default_factory=list)
    decisions: list[Decision] = field(default_factory=list)


@dataclass
class RunReport:
    requested: int
    accepted: int = 0
    rejected: int = 0
    aborted: int = 0
    pool_growth: int = 0
    master_seed: int = 0
    failures: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "requested": self.requested,
            "accepted": self.accepted,
            "rejected": self.rejected,
            "aborted": self.aborted,
            "pool_growth": self.pool_growth,
            "master_seed": self.master_seed,
            "failures": self.failures,
        }


def child_seed(master_seed: int, index: int) -> int:
    """Deterministic per-dialogue RNG seed derived from the master seed."""
    return (master_seed * 1_000_003 + index) % 2**63


class Engine:
    """Owns the seed pools during a batch (single writer) and serializes the
    role calls within a dialogue. Dialogues are generated sequentially:
    scripted fixtures are shared per-role FIFO queues, so cross-dialogue
    parallelism would make outputs scheduling-dependent. Remote parallelism
    is governed by the gateway's max_concurrent instead."""

    def __init__(
        self,
        config: EngineConfig,
        backends: RoleBackends,
        counselor: Counselor,
        prompts: PromptLibrary | None = None,
        filter_policy: FilterPolicy | None = None,
    ):
        self.config = config
        self.backends = backends
        self.counselor = counselor
        self.prompts = prompts or PromptLibrary()
        self.filter_policy = filter_policy or FilterPolicy()

    def run_dialogue(
        self,
        persona: tuple[ProblemType, str, SeekerProfile],
        *,
        rng: random.Random,
        rng_seed: int,
        dialogue_id: str,
        exemplar: Dialogue,
        created_at: datetime | None = None,
    ) -> tuple[Dialogue, DialogueTrace]:
        """Run one seeker -> counselor -> supporter loop.

        Terminates when both closing utterances of a round are farewells, at
        max_rounds, or on a role backend failure (dialogue marked aborted,
        never dropped here)."""
        problem_type, scenario, profile = persona
        cfg = self.config
        utterances: list = []
        trace = DialogueTrace()
        meta = {
            "generator_tag": cfg.generator_tag,
            "rng_seed": rng_seed,
            "created_at": (created_at or BATCH_EPOCH).isoformat(),
        }
        try:
            for round_index in range(1, cfg.max_rounds + 1):
                utterance, prompt = seeker_turn(
                    profile,
                    scenario,
                    utterances,
                    self.backends.seeker,
                    self.prompts,
                    window=cfg.history_window,
                    sentence_cap=cfg.sentence_cap,
                    temperature=cfg.temperature,
                    max_tokens=cfg.max_tokens,
                )
                trace.prompts.append(
                    PromptLogEntry(SEEKER, round_index, min(len(utterances), cfg.history_window), prompt)
                )
                utterances.append(utterance)

                decision = self.counselor.decide(utterances, rng)
                trace.decisions.append(decision)
                if decision.prompt is not None:
                    trace.prompts.append(
                        PromptLogEntry("counselor", round_index, min(len(utterances), cfg.history_window), decision.prompt)
                    )

                utterance, prompt = supporter_turn(
                    decision.strategy,
                    utterances,
                    exemplar,
                    self.backends.supporter,
                    self.prompts,
                    window=cfg.history_window,
                    sentence_cap=cfg.sentence_cap,
                    temperature=cfg.temperature,
                    max_tokens=cfg.max_tokens,
                )
                trace.prompts.append(
                    PromptLogEntry(SUPPORTER, round_index, min(len(utterances), cfg.history_window), prompt)
                )
                utterances.append(utterance)

                if is_farewell(utterances[-2].text) and is_farewell(utterances[-1].text):
                    meta["terminated_by"] = "farewell"
                    break
            else:
                meta["terminated_by"] = "max_rounds"
        except GatewayError as exc:
            meta["aborted"] = True
            meta["abort_reason"] = str(exc)
            meta["terminated_by"] = "backend_failure"
        dialogue = Dialogue(
            id=dialogue_id,
            problem_type=problem_type,
            scenario=scenario,
            profile=profile,
            utterances=tuple(utterances),
            meta=meta,
        )
        return dialogue, trace

    def run_batch(
        self,
        n: int,
        taxonomy: Taxonomy,
        pools: SeedPools,
    ) -> tuple[list[Dialogue], SeedPools, RunReport]:
        """Generate n dialogues; when self-iteration is on, every accepted
        dialogue's (problem type, scenario, dialogue) triple is appended to
        the scenario pool."""
        if not pools.scenarios or not pools.profiles:
            raise ValueError("seed pools must be non-empty")
        cfg = self.config
        report = RunReport(requested=n, master_seed=cfg.rng_seed)
        corpus: list[Dialogue] = []
        for index in range(n):
            seed = child_seed(cfg.rng_seed, index)
            rng = random.Random(seed)
            dialogue_id = f"{cfg.generator_tag}-{cfg.rng_seed}-{index:05d}"
            try:
                problem_type = sample_problem_type(taxonomy, rng)
                scenario_seed = pick_scenario_seed(pools, problem_type, rng)
                scenario = generate_scenario(
                    problem_type,
                    scenario_seed,
                    self.backends.scenario or self.backends.seeker,
                    self.prompts,
                    temperature=cfg.temperature,
                    max_tokens=cfg.max_tokens,
                )
                profile_seed = pick_profile_seed(pools, problem_type, rng)
                profile = generate_profile(
                    problem_type,
                    scenario,
                    profile_seed,
                    pools,
                    self.backends.profile or self.backends.seeker,
                    self.prompts,
                    temperature=cfg.temperature,
                    max_tokens=cfg.max_tokens,
                )
            except Exception as exc:
                report.failures.append(f"{dialogue_id}: persona generation failed: {exc}")
                report.rejected += 1
                continue
            dialogue, _trace = self.run_dialogue(
                (problem_type, scenario, profile),
                rng=rng,
                rng_seed=seed,
                dialogue_id=dialogue_id,
                exemplar=scenario_seed.dialogue,
                created_at=BATCH_EPOCH + timedelta(seconds=index),
            )
            corpus.append(dialogue)
            if dialogue.aborted:
                report.aborted += 1
                continue
            accepted, trimmed = accepts(dialogue, self.filter_policy)
            if accepted:
                report.accepted += 1
                if cfg.self_iterate:
                    pools.add_scenario(problem_type, scenario, trimmed)
                    report.pool_growth += 1
            else:
                report.rejected += 1
        return corpus, pools, report
