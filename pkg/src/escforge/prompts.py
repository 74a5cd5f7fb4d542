"""Prompt templates stored as text files with named {placeholders}."""

from __future__ import annotations

from pathlib import Path

from .corpus import data_path

TEMPLATE_NAMES = ("scenario", "profile", "seeker", "counselor", "supporter")


class PromptLibrary:
    """Loads and renders the per-role prompt templates.

    Templates live one per file (<name>.txt) in a directory; the packaged
    defaults are used unless a directory is configured.
    """

    def __init__(self, directory: str | Path | None = None):
        self.directory = Path(directory) if directory else data_path("prompts")
        self._cache: dict[str, str] = {}

    def template(self, name: str) -> str:
        if name not in self._cache:
            path = self.directory / f"{name}.txt"
            self._cache[name] = path.read_text(encoding="utf-8")
        return self._cache[name]

    def render(self, name: str, **values: str) -> str:
        try:
            return self.template(name).format(**values)
        except KeyError as exc:
            raise KeyError(f"template {name!r} needs placeholder {exc}") from None
