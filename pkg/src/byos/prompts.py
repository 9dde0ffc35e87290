"""Prompt template loading and byte-stable rendering."""

from __future__ import annotations

import os

_PLACEHOLDERS = ("{TARGET}", "{KNOWLEDGE}", "{CONFIGS}", "{DIRECTORIES}")
_DEFAULT_DIR = os.path.join(os.path.dirname(__file__), "templates")


class TemplateSet:
    """Versioned directory of prompt templates.

    Rendering is plain placeholder substitution (no format-string parsing),
    so identical (version, inputs) always produce identical prompt bytes.
    """

    def __init__(self, directory: str | None = None):
        self.directory = directory or _DEFAULT_DIR
        version_path = os.path.join(self.directory, "VERSION")
        with open(version_path, "r", encoding="utf-8") as fh:
            self.version = fh.read().strip()
        self._cache: dict[str, str] = {}

    def raw(self, name: str) -> str:
        if name not in self._cache:
            path = os.path.join(self.directory, name + ".txt")
            with open(path, "r", encoding="utf-8") as fh:
                self._cache[name] = fh.read()
        return self._cache[name]

    def render(self, name: str, **values: str) -> str:
        text = self.raw(name)
        for placeholder in _PLACEHOLDERS:
            key = placeholder[1:-1]
            if key in values:
                text = text.replace(placeholder, values[key])
        unknown = set(values) - {p[1:-1] for p in _PLACEHOLDERS}
        if unknown:
            raise KeyError(f"unknown placeholders: {sorted(unknown)}")
        return text
