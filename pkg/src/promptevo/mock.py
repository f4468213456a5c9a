"""Deterministic offline backend and scripted responders.

A :class:`MockBackend` answers a request from, in order: an exact table keyed
by the SHA-256 of the user text, regex rules, a Python responder, then the
fallback (echo or :class:`UnmatchedPattern`). Randomised answers draw from a
generator seeded with ``(seed, call_index, request fingerprint)``, where the
call index counts earlier identical requests. Replays are therefore
independent of thread interleaving and of unrelated calls.
"""
from __future__ import annotations

import hashlib
import math
import re
from collections import defaultdict
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .errors import UnmatchedPattern
from .gateway import ChatRequest, ChatResponse
from .genome import find_all_tags

Responder = Callable[[ChatRequest, np.random.Generator], "str | None"]


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


@dataclass(frozen=True)
class Rule:
    pattern: re.Pattern
    response: str | None = None
    choices: tuple[tuple[float, str], ...] = ()

    def __post_init__(self):
        if (self.response is None) == (not self.choices):
            raise ValueError("a rule needs exactly one of response or choices")

    def respond(self, rng: np.random.Generator) -> str:
        if self.response is not None:
            return self.response
        weights = np.array([w for w, _ in self.choices], dtype=float)
        idx = int(rng.choice(len(weights), p=weights / weights.sum()))
        return self.choices[idx][1]


class MockBackend:
    def __init__(
        self,
        rules: Sequence[Rule] = (),
        seed: int = 0,
        fallback: str = "error",
        responder: Responder | None = None,
        by_hash: Mapping[str, str] | None = None,
    ):
        if fallback not in ("error", "echo"):
            raise ValueError("fallback must be 'error' or 'echo'")
        self.rules = list(rules)
        self.seed = seed
        self.fallback = fallback
        self.responder = responder
        self.by_hash = dict(by_hash or {})
        self._counts: dict[str, int] = defaultdict(int)
        self.requests: list[ChatRequest] = []

    @classmethod
    def from_fixture(cls, path: str | Path, seed: int = 0, **kwargs) -> MockBackend:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        return cls.from_dict(data, seed=seed, **kwargs)

    @classmethod
    def from_dict(cls, data: Mapping, seed: int = 0, **kwargs) -> MockBackend:
        rules = []
        for r in data.get("rules", []):
            choices = tuple((float(c["weight"]), c["response"]) for c in r.get("choices", []))
            rules.append(Rule(re.compile(r["pattern"], re.S), r.get("response"), choices))
        responder = kwargs.pop("responder", None)
        builtin = data.get("responder")
        if responder is None and builtin:
            responder = BUILTIN_RESPONDERS[builtin]
        return cls(
            rules,
            seed=seed,
            fallback=data.get("fallback", "error"),
            responder=responder,
            by_hash=data.get("hashes"),
            **kwargs,
        )

    def _rng(self, request: ChatRequest) -> np.random.Generator:
        key = request.fingerprint()
        idx = self._counts[key]
        self._counts[key] += 1
        return np.random.default_rng([self.seed, idx, int(key[:16], 16)])

    def complete(self, request: ChatRequest) -> ChatResponse:
        self.requests.append(request)
        rng = self._rng(request)
        text = self._answer(request, rng)
        prompt_text = request.system + request.user
        return ChatResponse(text, estimate_tokens(prompt_text), estimate_tokens(text), 0)

    def _answer(self, request: ChatRequest, rng: np.random.Generator) -> str:
        digest = hashlib.sha256(request.user.encode("utf-8")).hexdigest()
        if digest in self.by_hash:
            return self.by_hash[digest]
        haystack = f"{request.system}\n{request.user}" if request.system else request.user
        for rule in self.rules:
            if rule.pattern.search(haystack):
                return rule.respond(rng)
        if self.responder is not None:
            out = self.responder(request, rng)
            if out is not None:
                return out
        if self.fallback == "echo":
            return request.user
        raise UnmatchedPattern(f"no mock rule matches request: {request.user[:80]!r}")

    def state_dict(self) -> dict:
        return {"counts": dict(sorted(self._counts.items()))}

    def load_state_dict(self, state: Mapping) -> None:
        self._counts = defaultdict(int, state.get("counts", {}))


def mock_policy(seed: int, script: Mapping | str | Path, **kwargs) -> MockBackend:
    """Build a mock backend from a script mapping or fixture file."""
    if isinstance(script, (str, Path)):
        return MockBackend.from_fixture(script, seed=seed, **kwargs)
    return MockBackend.from_dict(script, seed=seed, **kwargs)


# -- reading meta-prompts -----------------------------------------------------

_KIND_BY_HEADING = {
    "Component value generation": "component_values",
    "Evolution direction for one prompt": "subtask1",
    "Crossover value selection": "subtask2_choice",
    "Mutation with prompt memory (discrete form)": "subsolution1_discrete",
    "Mutation with prompt memory (continuous form)": "subsolution1_continuous",
    "Mutation and crossover with prompt memory (discrete form)": "subsolution2_discrete",
    "Mutation and crossover with prompt memory (continuous form)": "subsolution2_continuous",
}


def meta_kind(text: str) -> str | None:
    """Catalog entry a meta-prompt was rendered from, by its heading line."""
    m = re.match(r"\s*### (.+)", text)
    return _KIND_BY_HEADING.get(m.group(1).strip()) if m else None


def section(text: str, heading: str) -> str:
    """Body of a ``## heading`` section, up to the next ``## `` heading."""
    m = re.search(rf"^## {re.escape(heading)}\n(.*?)(?=^## |\Z)", text, re.S | re.M)
    return m.group(1) if m else ""


def tag_names(line: str) -> list[str]:
    return re.findall(r"<([A-Za-z_][A-Za-z0-9_\-]*)>", line)


def requested_types(text: str) -> list[str]:
    """Component names a meta-prompt asks about."""
    kind = meta_kind(text)
    if kind == "component_values":
        m = re.search(r"^Component type: (.+)$", text, re.M)
    elif kind == "subtask1":
        m = re.search(r"components from: (.+)$", text, re.M)
    elif kind == "subtask2_choice":
        body = section(text, "Candidate pairs")
        return re.findall(r"^([A-Za-z_][A-Za-z0-9_\-]*):\s*$", body, re.M)
    else:
        m = re.search(r"^Components to mutate: (.+)$", text, re.M)
    return tag_names(m.group(1)) if m else []


def tagged_values(block: str, names: Sequence[str]) -> dict[str, str]:
    out = {}
    for n in names:
        found = find_all_tags(block, n)
        if found:
            out[n] = found[0]
    return out


def current_values(text: str, names: Sequence[str]) -> dict[str, str]:
    """Values of ``names`` in the single prompt under evolution."""
    kind = meta_kind(text)
    if kind == "subtask1":
        block = section(text, "Current prompt")
    elif kind == "subsolution1_discrete":
        block = section(text, "Components to rewrite")
    elif kind == "subsolution1_continuous":
        block = section(text, "Current prompt")
    else:
        block = text
    return tagged_values(block, names)


def parent_values(text: str, names: Sequence[str]) -> tuple[dict[str, str], dict[str, str]]:
    """Values of ``names`` in prompt 1 and prompt 2 of a two-parent meta-prompt."""
    kind = meta_kind(text)
    if kind == "subtask2_choice":
        body = section(text, "Candidate pairs")
        p1 = dict(re.findall(r"prompt 1: <([\w\-]+)>(.*?)</\1>\n", body + "\n", re.S))
        p2 = dict(re.findall(r"prompt 2: <([\w\-]+)>(.*?)</\1>\n", body + "\n", re.S))
        return ({n: p1[n].strip() for n in names if n in p1},
                {n: p2[n].strip() for n in names if n in p2})
    body = section(text, "Parent values") or section(text, "Parent prompts")
    parts = re.split(r"^Prompt 2 \(score[^\n]*\n", body, maxsplit=1, flags=re.M)
    first = parts[0]
    second = parts[1] if len(parts) > 1 else ""
    return tagged_values(first, names), tagged_values(second, names)


def wrap(values: Mapping[str, str]) -> str:
    return "\n".join(f"<{n}>{v}</{n}>" for n, v in values.items())


# -- built-in synthetic responders ---------------------------------------------

_VARIANT_RE = re.compile(r"\s*\(variant \d+\)$")


def _variant(value: str, rng: np.random.Generator) -> str:
    base = _VARIANT_RE.sub("", value) or "unspecified"
    return f"{base} (variant {int(rng.integers(1, 1000))})"


def synthetic_optimizer(request: ChatRequest, rng: np.random.Generator) -> str | None:
    """Well-formed, content-free answers to every catalog meta-prompt."""
    text = request.user
    kind = meta_kind(text)
    names = requested_types(text)
    if kind == "component_values":
        m = re.search(r"Write (\d+) different", text)
        count = int(m.group(1)) if m else 10
        name = names[0]
        label = name.replace("_", " ")
        return "\n".join(f"<{name}>{label} candidate {i + 1}</{name}>" for i in range(count))
    if kind == "subtask1":
        m = re.search(r"Choose between 1 and (\d+)", text)
        limit = min(int(m.group(1)) if m else 1, len(names))
        k = int(rng.integers(1, limit + 1))
        picks = [names[i] for i in sorted(rng.choice(len(names), size=k, replace=False))]
        return "mutate: " + ", ".join(f"<{n}>" for n in picks)
    if kind == "subtask2_choice":
        return "\n".join(f"{n}: from prompt {int(rng.integers(1, 3))}" for n in names)
    if kind in ("subsolution1_discrete", "subsolution1_continuous"):
        cur = current_values(text, names)
        return wrap({n: _variant(cur.get(n, ""), rng) for n in names})
    if kind in ("subsolution2_discrete", "subsolution2_continuous"):
        v1, v2 = parent_values(text, names)
        m1 = {n: _variant(v1.get(n, ""), rng) for n in names}
        m2 = {n: _variant(v2.get(n, ""), rng) for n in names}
        final = {n: (m1 if rng.random() < 0.5 else m2)[n] for n in names}
        return (f"<mutation_1>\n{wrap(m1)}\n</mutation_1>\n<mutation_2>\n{wrap(m2)}\n"
                f"</mutation_2>\n<crossover>\n{wrap(final)}\n</crossover>")
    return None


def synthetic_target(request: ChatRequest, rng: np.random.Generator) -> str | None:
    """Answers a task prompt with a random valid label, or the start of the input."""
    m = re.search(r"^Valid answers: (.+)$", request.user, re.M)
    if m:
        labels = [s.strip() for s in m.group(1).split(",") if s.strip()]
        return f"<ans>{labels[int(rng.integers(len(labels)))]}</ans>"
    m = re.search(r"^Input:\n(.*?)(?:\n\n|\Z)", request.user, re.S | re.M)
    if m:
        words = m.group(1).split()
        return f"<ans>{' '.join(words[: max(1, len(words) // 3)])}</ans>"
    return None


BUILTIN_RESPONDERS: dict[str, Responder] = {
    "optimizer": synthetic_optimizer,
    "target": synthetic_target,
}
