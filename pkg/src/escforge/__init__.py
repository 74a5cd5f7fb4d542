"""escforge: synthesize, filter, analyze and evaluate emotional support
conversations with a three-role (seeker / counselor / supporter) pipeline."""

__version__ = "0.1.0"

from .corpus import (  # noqa: F401
    STRATEGIES,
    Dialogue,
    ProblemType,
    SeedPools,
    SeekerProfile,
    Utterance,
    load_corpus,
    load_taxonomy,
    merge_consecutive,
    save_corpus,
    validate_dialogue,
)
