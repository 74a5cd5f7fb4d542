"""One structured JSON config file drives every subcommand; flags override."""

from __future__ import annotations

import json
from copy import deepcopy
from pathlib import Path

DEFAULT_CONFIG: dict = {
    "backends": {
        # role name -> backend config dict (kind/endpoint_url/model_name/...);
        # "default" is used for roles without their own entry.
        "default": None,
    },
    "engine": {
        "max_rounds": 12,
        "min_rounds_for_acceptance": 4,
        "history_window": 6,
        "sentence_cap": 3,
        "counselor_mode": "prompted",
        "rng_seed": 0,
        "self_iterate": True,
        "generator_tag": "escforge",
        "temperature": 0.7,
        "max_tokens": 256,
    },
    "counselor": {
        "expected_length": 12,
        "sample": False,
        "model_path": None,
    },
    "paths": {
        "prompts_dir": None,
        "taxonomy": None,
        "scenario_pool": None,
        "profile_pool": None,
        "farewell_lexicon": None,
        "patterns": None,
    },
    "postprocess": {
        "min_utterances": 8,
        "max_utterances": 30,
        "max_flags": 0,
    },
    "service": {
        "host": "127.0.0.1",
        "port": 8765,
        "rng_seed": 0,
        "log_path": None,
        "static_dir": None,
        "cors_origins": ["*"],
        # model ref -> {"backend": role-or-name, "counselor_mode": ...,
        #               "counselor_model": path, "expected_length": int}
        "models": {},
    },
}


def _merge(base: dict, override: dict) -> dict:
    merged = deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = deepcopy(value)
    return merged


def load_config(path: str | Path | None) -> dict:
    if path is None:
        return deepcopy(DEFAULT_CONFIG)
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(payload, dict):
        raise ValueError("config file must hold a JSON object")
    return _merge(DEFAULT_CONFIG, payload)
