"""Component types, prompt genomes and the markup template engine.

A prompt is held in two forms. The *discrete* form is a :class:`Genome`, one
text value per registered component type. The *continuous* form is the text
produced by injecting those values into a :class:`PromptTemplate`, with every
value enclosed in a markup pair such as ``<role>Sentence Simplifier</role>``.
"""
from __future__ import annotations

import hashlib
import json
import math
import re
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Union

import numpy as np

from .errors import EmptyPool, MalformedMarkup, MissingSlotValue, TemplateError

CATEGORIES = (
    "Role and Expertise",
    "Task Content",
    "Constraints and Norms",
    "Process and Behavior",
    "Context and Examples",
)

# Tag names used by the meta-prompt protocol and the task prompt; a component
# may not shadow them.
RESERVED_NAMES = frozenset({"ans", "think", "crossover", "mutation_1", "mutation_2"})

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_\-]*$")


@dataclass(frozen=True)
class ComponentType:
    name: str
    category: str
    description: str = ""

    def __post_init__(self):
        if not self.name or not _NAME_RE.match(self.name):
            raise ValueError(f"invalid component name {self.name!r}")
        if self.name in RESERVED_NAMES:
            raise ValueError(f"component name {self.name!r} is reserved")
        if self.category not in CATEGORIES:
            raise ValueError(
                f"category {self.category!r} is not one of {', '.join(CATEGORIES)}"
            )

    @property
    def open_tag(self) -> str:
        return f"<{self.name}>"

    @property
    def close_tag(self) -> str:
        return f"</{self.name}>"


class Registry:
    """Ordered, name-unique collection of component types."""

    def __init__(self, types: Iterable[ComponentType]):
        self.types = tuple(types)
        names = [t.name for t in self.types]
        if not names:
            raise ValueError("registry needs at least one component type")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate component names in {names}")
        self._by_name = {t.name: t for t in self.types}

    @classmethod
    def default(cls) -> Registry:
        return cls(DEFAULT_TYPES)

    @classmethod
    def from_config(cls, entries: Iterable[Mapping[str, Any]]) -> Registry:
        return cls(
            ComponentType(e["name"], e["category"], e.get("description", ""))
            for e in entries
        )

    def to_config(self) -> list[dict]:
        return [
            {"name": t.name, "category": t.category, "description": t.description}
            for t in self.types
        ]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.types)

    def __getitem__(self, name: str) -> ComponentType:
        return self._by_name[name]

    def __contains__(self, name) -> bool:
        if isinstance(name, ComponentType):
            return self._by_name.get(name.name) == name
        return name in self._by_name

    def __iter__(self) -> Iterator[ComponentType]:
        return iter(self.types)

    def __len__(self) -> int:
        return len(self.types)

    def __eq__(self, other) -> bool:
        return isinstance(other, Registry) and self.types == other.types

    def __hash__(self) -> int:
        return hash(self.types)

    def __repr__(self) -> str:
        return f"Registry({list(self.names)})"

    def find_tag(self, text: str) -> str | None:
        """Return the first registered open/close tag occurring in ``text``."""
        for t in self.types:
            for tag in (t.open_tag, t.close_tag):
                if tag in text:
                    return tag
        return None


DEFAULT_TYPES = (
    ComponentType(
        "role",
        "Role and Expertise",
        "The persona or expert identity the model should adopt.",
    ),
    ComponentType(
        "task_description",
        "Task Content",
        "A statement of what the model has to do with the input.",
    ),
    ComponentType(
        "output_format",
        "Constraints and Norms",
        "How the answer must be formatted and what it may contain.",
    ),
    ComponentType(
        "workflow",
        "Process and Behavior",
        "The steps the model should follow to reach the answer.",
    ),
    ComponentType(
        "examples",
        "Context and Examples",
        "Demonstrations or guidance that illustrate the expected behaviour.",
    ),
)


class Genome(Mapping[str, str]):
    """Immutable mapping from component name to value, ordered by registry.

    Values are stored trimmed. An empty value is the "null" option and is
    omitted when rendered.
    """

    __slots__ = ("_items", "_index", "registry")

    def __init__(self, values: Mapping[str, str], registry: Registry):
        missing = [n for n in registry.names if n not in values]
        if missing:
            raise MissingSlotValue(f"no value for component(s) {missing}")
        extra = [n for n in values if n not in registry]
        if extra:
            raise MissingSlotValue(f"unregistered component(s) {extra}")
        items = []
        for name in registry.names:
            value = values[name]
            if not isinstance(value, str):
                raise TypeError(f"value for {name!r} must be str, got {type(value)}")
            value = value.strip()
            tag = registry.find_tag(value)
            if tag is not None:
                raise MalformedMarkup(f"value for {name!r} contains markup {tag!r}")
            items.append((name, value))
        self._items = tuple(items)
        self._index = {n: i for i, (n, _) in enumerate(items)}
        self.registry = registry

    def __getitem__(self, name: str) -> str:
        return self._items[self._index[name]][1]

    def __iter__(self) -> Iterator[str]:
        return (n for n, _ in self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __eq__(self, other) -> bool:
        if isinstance(other, Genome):
            return self._items == other._items
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self._items)

    def __repr__(self) -> str:
        return f"Genome({dict(self._items)!r})"

    def items_tuple(self) -> tuple[tuple[str, str], ...]:
        return self._items

    def replace(self, changes: Mapping[str, str]) -> Genome:
        values = dict(self._items)
        for name, value in changes.items():
            if name not in values:
                raise KeyError(name)
            values[name] = value
        return Genome(values, self.registry)

    def to_dict(self) -> dict[str, str]:
        return dict(self._items)

    def key(self) -> str:
        """Content hash, stable across processes."""
        payload = json.dumps(self._items, ensure_ascii=False, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def tagged(self, names: Iterable[str] | None = None) -> str:
        """One ``<name>value</name>`` line per component."""
        wanted = list(self) if names is None else list(names)
        return "\n".join(f"<{n}>{self[n]}</{n}>" for n in wanted)


# -- templates ---------------------------------------------------------------


@dataclass(frozen=True)
class Slot:
    """A component slot with optional descriptive wrapper text.

    ``before`` and ``after`` are emitted only when the value is non-empty.
    """

    name: str
    before: str = ""
    after: str = ""


Segment = Union[str, Slot]

_TOKEN_RE = re.compile(r"\{\{\s*([#/]?)\s*([A-Za-z_][A-Za-z0-9_\-]*)\s*\}\}")


@dataclass(frozen=True)
class PromptTemplate:
    segments: tuple[Segment, ...]
    source: str = field(default="", compare=False)

    @classmethod
    def parse(cls, text: str) -> PromptTemplate:
        """Parse ``{{name}}`` slots and ``{{#name}}..{{name}}..{{/name}}`` wrappers."""
        segments: list[Segment] = []
        pos = 0
        tokens = list(_TOKEN_RE.finditer(text))
        i = 0
        while i < len(tokens):
            tok = tokens[i]
            if tok.start() > pos:
                segments.append(text[pos : tok.start()])
            kind, name = tok.group(1), tok.group(2)
            if kind == "":
                segments.append(Slot(name))
                pos = tok.end()
                i += 1
                continue
            if kind == "/":
                raise TemplateError(f"closing wrapper {{{{/{name}}}}} without opening")
            # wrapper: expect {{name}} then {{/name}}
            if i + 2 >= len(tokens):
                raise TemplateError(f"unterminated wrapper for {name!r}")
            mid, end = tokens[i + 1], tokens[i + 2]
            if (mid.group(1), mid.group(2)) != ("", name) or (
                end.group(1),
                end.group(2),
            ) != ("/", name):
                raise TemplateError(
                    f"wrapper for {name!r} must contain exactly {{{{{name}}}}} "
                    f"followed by {{{{/{name}}}}}"
                )
            segments.append(
                Slot(
                    name,
                    before=text[tok.end() : mid.start()],
                    after=text[mid.end() : end.start()],
                )
            )
            pos = end.end()
            i += 3
        if pos < len(text):
            segments.append(text[pos:])
        return cls(tuple(segments), source=text)

    @classmethod
    def from_file(cls, path: str | Path) -> PromptTemplate:
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def default(cls) -> PromptTemplate:
        return cls.parse(DEFAULT_TEMPLATE)

    def to_text(self) -> str:
        """Inverse of :meth:`parse`."""
        out = []
        for s in self.segments:
            if not isinstance(s, Slot):
                out.append(s)
            elif s.before or s.after:
                out.append(f"{{{{#{s.name}}}}}{s.before}{{{{{s.name}}}}}{s.after}{{{{/{s.name}}}}}")
            else:
                out.append(f"{{{{{s.name}}}}}")
        return "".join(out)

    @property
    def slot_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.segments if isinstance(s, Slot))

    def literals(self) -> list[str]:
        out = []
        for s in self.segments:
            if isinstance(s, Slot):
                out.extend([s.before, s.after])
            else:
                out.append(s)
        return [t for t in out if t]

    def validate(self, registry: Registry) -> None:
        names = self.slot_names
        for n in registry.names:
            count = names.count(n)
            if count != 1:
                raise TemplateError(f"component {n!r} appears in {count} slots, need 1")
        unknown = sorted(set(names) - set(registry.names))
        if unknown:
            raise TemplateError(f"template slots {unknown} are not registered")
        for lit in self.literals():
            tag = registry.find_tag(lit)
            if tag is not None:
                raise TemplateError(f"literal template text contains markup {tag!r}")

    def render(self, genome: Mapping[str, str]) -> str:
        return render(genome, self)


def render(genome: Mapping[str, str], template: PromptTemplate) -> str:
    """Inject a genome into a template, wrapping each value in its tag pair."""
    parts = []
    for seg in template.segments:
        if not isinstance(seg, Slot):
            parts.append(seg)
            continue
        if seg.name not in genome:
            raise MissingSlotValue(f"no value for component {seg.name!r}")
        value = genome[seg.name]
        if value:
            parts.append(f"{seg.before}<{seg.name}>{value}</{seg.name}>{seg.after}")
    return "".join(parts)


def find_tag(text: str, name: str) -> str | None:
    """Content of the first ``<name>...</name>`` pair, trimmed; ``None`` if absent."""
    open_tag, close_tag = f"<{name}>", f"</{name}>"
    start = text.find(open_tag)
    if start < 0:
        return None
    end = text.find(close_tag, start + len(open_tag))
    if end < 0:
        raise MalformedMarkup(f"{open_tag} has no matching {close_tag}")
    # a bare mention such as "mutate <role> to: <role>x</role>" pairs innermost
    start = text.rfind(open_tag, start, end) + len(open_tag)
    return text[start:end].strip()


def _pair_pattern(name: str) -> re.Pattern:
    o, c = re.escape(f"<{name}>"), re.escape(f"</{name}>")
    return re.compile(rf"{o}((?:(?!{o}).)*?){c}", re.S)


def find_all_tags(text: str, name: str) -> list[str]:
    """Every complete ``<name>...</name>`` pair in order; unclosed tails are ignored."""
    return [m.group(1).strip() for m in _pair_pattern(name).finditer(text)]


def parse(text: str, registry: Registry) -> Genome:
    """Read a genome back out of tagged text; absent components become empty."""
    return Genome({n: find_tag(text, n) or "" for n in registry.names}, registry)


def random_genome(
    pools: Mapping[str, list[str]], rng: np.random.Generator, registry: Registry
) -> Genome:
    """Draw one value per component uniformly from its pool."""
    values = {}
    for name in registry.names:
        pool = pools.get(name) or []
        if not pool:
            raise EmptyPool(f"pool for {name!r} is empty")
        values[name] = pool[int(rng.integers(len(pool)))]
    return Genome(values, registry)


@dataclass(frozen=True)
class ScoredPrompt:
    genome: Genome
    rendered: str
    score: float
    lineage: Mapping[str, Any] | None = None

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise ValueError(f"score must be finite, got {self.score}")

    @classmethod
    def build(cls, genome: Genome, template: PromptTemplate, score: float, lineage=None):
        return cls(genome, render(genome, template), float(score), lineage)

    @property
    def uid(self) -> int | None:
        return None if self.lineage is None else self.lineage.get("id")


DEFAULT_TEMPLATE = """\
Read the instructions below carefully and then complete the task for the given input.
{{#role}}You are a {{role}}.
{{/role}}{{#task_description}}Your task: {{task_description}}
{{/task_description}}{{#workflow}}Work through the following steps: {{workflow}}
{{/workflow}}{{#examples}}Guidance and examples: {{examples}}
{{/examples}}{{#output_format}}Output requirements: {{output_format}}
{{/output_format}}"""
