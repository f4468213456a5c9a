"""The two working memories that steer evolution.

``ComponentMemory`` keeps, per component type, the value pairs observed before
and after a mutation, ordered so the better value comes first. It feeds the
direction-finding meta-prompts. ``PromptMemory`` is a score-descending ledger
of evaluated prompts and feeds the mutation/crossover meta-prompts.
"""
from __future__ import annotations

import bisect
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

from .errors import TypeMismatch
from .genome import ComponentType, Genome, PromptTemplate, Registry, ScoredPrompt

NO_COMPONENT_HISTORY = "No component evolution history is available yet."
NO_PROMPT_HISTORY = "No evaluated prompts have been recorded yet."
MEMORY_DISABLED = "Memory guidance is not available for this run."

DISCRETE = "discrete"
CONTINUOUS = "continuous"
FORMS = (DISCRETE, CONTINUOUS)


@dataclass(frozen=True)
class ValuePair:
    better: str
    worse: str
    margin: float
    better_score: float
    worse_score: float

    def to_dict(self) -> dict:
        return {
            "better": self.better,
            "worse": self.worse,
            "margin": self.margin,
            "better_score": self.better_score,
            "worse_score": self.worse_score,
        }


class ComponentMemory:
    def __init__(self, registry: Registry, capacity_per_type: int = 20):
        if capacity_per_type < 1:
            raise ValueError("capacity_per_type must be positive")
        self.registry = registry
        self.capacity_per_type = capacity_per_type
        self.entries: dict[str, list[ValuePair]] = {n: [] for n in registry.names}

    def record_pair(
        self,
        ctype: str | ComponentType,
        value_before: str,
        value_after: str,
        score_before: float,
        score_after: float,
    ) -> ComponentMemory:
        """Store the before/after values of one mutated component, better first.

        Equal scores favour the post-evolution value. The newest pair goes to
        the head of the list and the oldest one is evicted past capacity.
        """
        if ctype not in self.registry:
            raise TypeMismatch(f"{ctype!r} is not a registered component type")
        name = ctype.name if isinstance(ctype, ComponentType) else ctype
        for v in (value_before, value_after):
            if not isinstance(v, str) or self.registry.find_tag(v) is not None:
                raise TypeMismatch(f"{v!r} is not a valid value for {name!r}")
        if not (math.isfinite(score_before) and math.isfinite(score_after)):
            raise ValueError("scores must be finite")
        if score_after >= score_before:
            pair = ValuePair(value_after, value_before, score_after - score_before,
                             score_after, score_before)
        else:
            pair = ValuePair(value_before, value_after, score_before - score_after,
                             score_before, score_after)
        pairs = self.entries[name]
        pairs.insert(0, pair)
        del pairs[self.capacity_per_type:]
        return self

    def __len__(self) -> int:
        return sum(len(v) for v in self.entries.values())

    def to_dict(self) -> dict:
        return {
            "capacity_per_type": self.capacity_per_type,
            "entries": {n: [p.to_dict() for p in ps] for n, ps in self.entries.items()},
        }

    @classmethod
    def from_dict(cls, data: Mapping, registry: Registry) -> ComponentMemory:
        mem = cls(registry, data["capacity_per_type"])
        for name, pairs in data["entries"].items():
            mem.entries[name] = [ValuePair(**p) for p in pairs]
        return mem


class PromptMemory:
    def __init__(self, capacity: int = 10, form: str = DISCRETE):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        if form not in FORMS:
            raise ValueError(f"form must be one of {FORMS}")
        self.capacity = capacity
        self.form = form
        self.ledger: list[ScoredPrompt] = []

    def insert_prompt(self, sp: ScoredPrompt) -> PromptMemory:
        """Insert keeping scores descending; on ties the newcomer goes first.

        A genome already in the ledger is not stored twice.
        """
        if not math.isfinite(sp.score):
            raise ValueError("score must be finite")
        if any(e.genome == sp.genome for e in self.ledger):
            return self
        keys = [-e.score for e in self.ledger]
        pos = bisect.bisect_left(keys, -sp.score)
        self.ledger.insert(pos, sp)
        del self.ledger[self.capacity:]
        return self

    def extend(self, prompts: Iterable[ScoredPrompt]) -> PromptMemory:
        for sp in prompts:
            self.insert_prompt(sp)
        return self

    @property
    def scores(self) -> list[float]:
        return [e.score for e in self.ledger]

    def __len__(self) -> int:
        return len(self.ledger)

    def to_dict(self) -> dict:
        # continuous text is re-rendered from the template on load
        return {
            "capacity": self.capacity,
            "form": self.form,
            "ledger": [
                {"genome": e.genome.to_dict(), "score": e.score,
                 "lineage": dict(e.lineage) if e.lineage else None}
                for e in self.ledger
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping, registry: Registry, template: PromptTemplate):
        mem = cls(data["capacity"], data["form"])
        mem.ledger = [
            ScoredPrompt.build(Genome(e["genome"], registry), template, e["score"],
                               e.get("lineage"))
            for e in data["ledger"]
        ]
        return mem


def component_context(
    mem: ComponentMemory | None, types: Iterable[str], k: int = 5
) -> str:
    """Text block with up to ``k`` better/worse pairs for each requested type."""
    if mem is None:
        return MEMORY_DISABLED
    lines = []
    for name in types:
        pairs = mem.entries.get(name, [])[:k]
        if not pairs:
            continue
        lines.append(f"[{name}]")
        for p in pairs:
            lines.append(
                f"better: <{name}>{p.better}</{name}>  "
                f"worse: <{name}>{p.worse}</{name}>  Δ={p.margin:.4f}"
            )
    return "\n".join(lines) if lines else NO_COMPONENT_HISTORY


def prompt_context(mem: PromptMemory | None, form: str | None = None, k: int = 5) -> str:
    """Serialise the top-``k`` prompts, best first, in discrete or continuous form."""
    if mem is None:
        return MEMORY_DISABLED
    form = form or mem.form
    if form not in FORMS:
        raise ValueError(f"form must be one of {FORMS}")
    if not mem.ledger:
        return NO_PROMPT_HISTORY
    blocks = []
    for rank, e in enumerate(mem.ledger[:k], start=1):
        body = e.genome.tagged() if form == DISCRETE else e.rendered
        blocks.append(f"Prompt {rank} (score {e.score:.4f}):\n{body}")
    return "\n\n".join(blocks)
