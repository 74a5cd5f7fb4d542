"""Chat-completion backends: a remote OpenAI-compatible HTTP client with
retry/backoff/bounded concurrency, and a deterministic scripted replay backend
for offline tests and reproducible fixtures.
"""

from __future__ import annotations

import json
import os
import random
import threading
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import httpx

BACKOFF_BASE_SECONDS = 0.5
RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})

ROLE_TAGS = ("seeker", "counselor", "supporter", "scenario", "profile")


class GatewayError(Exception):
    pass


class TransportError(GatewayError):
    pass


class ProtocolError(GatewayError):
    pass


class FixtureUnderrunError(GatewayError):
    pass


@dataclass(frozen=True, slots=True)
class ChatRequest:
    system_prompt: str
    messages: tuple[tuple[str, str], ...]
    role_tag: str = ""
    temperature: float = 0.7
    max_tokens: int = 256

    def __post_init__(self):
        if not self.messages:
            raise ValueError("messages must be non-empty")
        for role, _ in self.messages:
            if role not in ("user", "assistant"):
                raise ValueError(f"bad message role: {role!r}")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be within [0, 2]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")


@dataclass(frozen=True, slots=True)
class BackendConfig:
    kind: str
    endpoint_url: str = ""
    model_name: str = ""
    api_key_env_var: str = ""
    timeout: float = 30.0
    max_retries: int = 3
    max_concurrent: int = 4
    fixture_path: str = ""

    def __post_init__(self):
        if self.kind == "http":
            if not self.endpoint_url or not self.model_name:
                raise ValueError("http backend requires endpoint_url and model_name")
        elif self.kind == "scripted":
            if not self.fixture_path:
                raise ValueError("scripted backend requires fixture_path")
        else:
            raise ValueError(f"unknown backend kind: {self.kind!r}")
        if self.max_concurrent < 1:
            raise ValueError("max_concurrent must be positive")


class ScriptedBackend:
    """Replays fixture responses; per-role-tag FIFO queues, fully deterministic.

    Fixture format: JSONL of {"role_tag": str, "text": str}. One fixture can
    drive a whole multi-role dialogue because each role consumes its own queue.
    """

    def __init__(self, entries: list[dict]):
        self._queues: dict[str, deque[str]] = {}
        for i, entry in enumerate(entries):
            tag = entry.get("role_tag")
            text = entry.get("text")
            if not tag or not isinstance(text, str):
                raise ValueError(f"bad fixture entry at index {i}")
            self._queues.setdefault(tag, deque()).append(text)
        self._lock = threading.Lock()

    @classmethod
    def from_path(cls, path: str | Path) -> ScriptedBackend:
        entries = []
        with open(path, encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    entries.append(json.loads(line))
        return cls(entries)

    def complete(self, req: ChatRequest) -> str:
        with self._lock:
            queue = self._queues.get(req.role_tag)
            if not queue:
                raise FixtureUnderrunError(f"fixture exhausted for role tag {req.role_tag!r}")
            text = queue.popleft()
        if not text.strip():
            raise ProtocolError("empty completion in fixture")
        return text

    def remaining(self, role_tag: str) -> int:
        with self._lock:
            return len(self._queues.get(role_tag, ()))


class HttpBackend:
    """OpenAI-compatible chat completions over HTTP POST.

    Retries transient failures (429/5xx, timeouts) with exponential backoff
    (base 500 ms, doubling, full jitter); at most max_concurrent requests are
    in flight at any time.
    """

    def __init__(self, config: BackendConfig, *, sleep=time.sleep, rng: random.Random | None = None):
        if config.kind != "http":
            raise ValueError("HttpBackend requires an http config")
        self.config = config
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._semaphore = threading.BoundedSemaphore(config.max_concurrent)
        self._client = httpx.Client(timeout=config.timeout)

    def close(self) -> None:
        self._client.close()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.config.api_key_env_var:
            key = os.environ.get(self.config.api_key_env_var, "")
            if key:
                headers["Authorization"] = f"Bearer {key}"
        return headers

    def _payload(self, req: ChatRequest) -> dict:
        messages = [{"role": "system", "content": req.system_prompt}]
        messages.extend({"role": role, "content": text} for role, text in req.messages)
        return {
            "model": self.config.model_name,
            "messages": messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }

    def complete(self, req: ChatRequest) -> str:
        payload = self._payload(req)
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                self._sleep(self._rng.uniform(0.0, BACKOFF_BASE_SECONDS * 2 ** (attempt - 1)))
            try:
                with self._semaphore:
                    response = self._client.post(self.config.endpoint_url, json=payload, headers=self._headers())
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if response.status_code in RETRYABLE_STATUS:
                last_error = TransportError(f"HTTP {response.status_code}")
                continue
            if response.status_code != 200:
                raise TransportError(f"HTTP {response.status_code}: {response.text[:200]}")
            try:
                content = response.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, ValueError) as exc:
                raise ProtocolError(f"malformed completion response: {exc}") from None
            if not isinstance(content, str) or not content.strip():
                raise ProtocolError("empty completion")
            return content
        raise TransportError(
            f"exhausted {self.config.max_retries} retries against {self.config.endpoint_url}"
        ) from last_error


def make_backend(config: BackendConfig, **kwargs):
    if config.kind == "scripted":
        return ScriptedBackend.from_path(config.fixture_path)
    return HttpBackend(config, **kwargs)


_INSTANCES: dict[BackendConfig, object] = {}
_INSTANCES_LOCK = threading.Lock()


def complete(config: BackendConfig, req: ChatRequest) -> str:
    """One-shot completion against a config. Backend instances are cached per
    config so scripted fixtures are consumed in sequence across calls."""
    with _INSTANCES_LOCK:
        backend = _INSTANCES.get(config)
        if backend is None:
            backend = _INSTANCES.setdefault(config, make_backend(config))
    return backend.complete(req)
