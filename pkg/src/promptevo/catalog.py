"""Meta-prompt catalog.

Each entry is a ``str.format`` template stored under ``promptevo/prompts``.
A directory with files of the same names can be supplied to override them.
"""
from __future__ import annotations

import string
from functools import lru_cache
from importlib import resources
from pathlib import Path

CATALOG_VERSION = "1"

ENTRIES = (
    "component_values",
    "subtask1",
    "subtask2_choice",
    "subsolution1_discrete",
    "subsolution1_continuous",
    "subsolution2_discrete",
    "subsolution2_continuous",
)


@lru_cache(maxsize=None)
def _builtin(name: str) -> str:
    return resources.files("promptevo").joinpath("prompts").joinpath(f"{name}.txt").read_text("utf-8")


class Catalog:
    def __init__(self, directory: str | Path | None = None):
        self.directory = Path(directory) if directory else None

    def text(self, name: str) -> str:
        if name not in ENTRIES:
            raise KeyError(f"unknown meta-prompt {name!r}")
        if self.directory is not None:
            path = self.directory / f"{name}.txt"
            if path.exists():
                return path.read_text(encoding="utf-8")
        return _builtin(name)

    def fields(self, name: str) -> set[str]:
        return {f for _, f, _, _ in string.Formatter().parse(self.text(name)) if f}

    def render(self, entry: str, /, **values) -> str:
        missing = self.fields(entry) - values.keys()
        if missing:
            raise KeyError(f"meta-prompt {entry!r} needs {sorted(missing)}")
        return self.text(entry).format(**values)
