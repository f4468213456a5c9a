"""Memory-guided evolution of component genomes.

One iteration samples one or two parents by roulette wheel, asks the
optimizer LLM which components to change (task evolution), asks it for the
new values (solution evolution), scores the child and feeds the outcome back
into both memories (memory evolution). Children accumulate per epoch and the
population is replaced by the top-N of old and new at each epoch end.
"""
from __future__ import annotations

import json
import logging
import math
import os
import re
import tempfile
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from .catalog import Catalog
from .errors import ContentEmpty, MalformedMarkup, PopulationTooSmall
from .gateway import OPTIMIZER, ChatRequest, Gateway
from .genome import (
    Genome,
    PromptTemplate,
    Registry,
    ScoredPrompt,
    find_tag,
    random_genome,
)
from .memory import (
    DISCRETE,
    FORMS,
    ComponentMemory,
    PromptMemory,
    component_context,
    prompt_context,
)

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 1

EvalFn = Callable[[Genome], float]


@dataclass
class EvolutionConfig:
    population_size: int = 10
    epochs: int = 10
    iterations: int = 10
    memory_form: str = DISCRETE
    pair_probability: float = 0.5
    max_mutations: int = 2
    component_memory_capacity: int = 20
    prompt_memory_capacity: int = 10
    context_k: int = 5
    use_component_memory: bool = True
    use_prompt_memory: bool = True
    batched_choice: bool = True
    # total attempts at getting a parseable answer before falling back
    reasks: int = 3
    temperature: float = 0.5
    max_output_tokens: int = 1024

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not 0.0 <= self.pair_probability <= 1.0:
            raise ValueError("pair_probability must lie in [0, 1]")
        if self.memory_form not in FORMS:
            raise ValueError(f"memory_form must be one of {FORMS}")
        if self.max_mutations < 1 or self.reasks < 1 or self.context_k < 1:
            raise ValueError("max_mutations, reasks and context_k must be >= 1")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> EvolutionConfig:
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})

    @property
    def label(self) -> str:
        if self.use_component_memory and self.use_prompt_memory:
            return "guided"
        if self.use_component_memory:
            return "no-prompt-memory"
        if self.use_prompt_memory:
            return "no-component-memory"
        return "unguided"


@dataclass(frozen=True)
class Direction1:
    mutate_types: tuple[str, ...]


@dataclass(frozen=True)
class Direction2:
    mutate_types: tuple[str, ...]
    # component name -> 1 or 2 (which parent supplies the value)
    sources: Mapping[str, int]
    fixed_values: Mapping[str, str]


def seed_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent generators for evolution and for evaluation subsampling."""
    evo, ev = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(evo), np.random.default_rng(ev)


# -- selection and update -----------------------------------------------------


def selection_weights(scores: Sequence[float]) -> np.ndarray:
    """Roulette weights.

    Strictly positive scores are used as-is. Otherwise scores are shifted by
    the minimum and floored with ``1e-6 * (max - min + 1)`` so nobody gets
    zero probability. Equal scores give a uniform wheel.
    """
    s = np.asarray(scores, dtype=float)
    lo, hi = s.min(), s.max()
    if hi == lo:
        return np.ones_like(s)
    if lo > 0:
        return s.copy()
    return (s - lo) + 1e-6 * (hi - lo + 1.0)


def roulette_select(
    population: Sequence[ScoredPrompt], k: int, rng: np.random.Generator
) -> list[ScoredPrompt]:
    """Fitness-proportional sampling of ``k`` distinct individuals."""
    if not population or k > len(population) or k < 1:
        raise PopulationTooSmall(f"cannot select {k} from {len(population)} individuals")
    weights = selection_weights([p.score for p in population])
    chosen = []
    for _ in range(k):
        cdf = np.cumsum(weights)
        idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        idx = min(idx, len(weights) - 1)
        while weights[idx] == 0:
            idx -= 1
        chosen.append(population[idx])
        weights[idx] = 0.0
    return chosen


def partition_directions(
    c1: Iterable[str], c2: Iterable[str], registry: Sequence[str], rng: np.random.Generator
) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Split the registry into types to mutate (C1 ∩ C2) and types to fix.

    An empty intersection falls back to one type drawn uniformly from C1 ∪ C2.
    """
    s1, s2 = set(c1), set(c2)
    hat = [n for n in registry if n in s1 and n in s2]
    if not hat:
        union = [n for n in registry if n in s1 or n in s2]
        if union:
            hat = [union[int(rng.integers(len(union)))]]
    tilde = tuple(n for n in registry if n not in hat)
    return tuple(hat), tilde


def update_population(
    current: Sequence[ScoredPrompt], evolved: Sequence[ScoredPrompt], n: int
) -> list[ScoredPrompt]:
    """Top-``n`` of the union by score; ties go to the newest individual."""
    # newest first, then a stable sort keeps that order within equal scores
    merged = list(reversed(evolved)) + list(current)
    merged.sort(key=lambda p: -p.score)
    return merged[:n]


# -- reply parsing --------------------------------------------------------------

_TAG_NAME = re.compile(r"<\s*/?\s*([A-Za-z_][A-Za-z0-9_\-]*)\s*/?\s*>")


def parse_direction(text: str, names: Sequence[str], max_mutations: int) -> list[str]:
    """Component names chosen in a direction reply, known names only.

    The last ``mutate:`` line wins; without one, any tag mention counts.
    """
    lines = [ln for ln in text.splitlines() if re.match(r"\W*mutate\s*:", ln, re.I)]
    if lines:
        line = lines[-1].split(":", 1)[1]
        found = _TAG_NAME.findall(line)
        if not found:
            found = [w.strip(" <>*`'\".") for w in re.split(r"[,;\s]+", line)]
    else:
        found = _TAG_NAME.findall(text)
    out: list[str] = []
    for n in found:
        if n in names and n not in out:
            out.append(n)
    return out[:max_mutations]


_CHOICE_LINE = re.compile(r"^\W*([A-Za-z_][A-Za-z0-9_\-]*)\W*\s*:\s*(.*)$")


def parse_choices(text: str, names: Sequence[str]) -> dict[str, int]:
    """``{name: 1|2}`` from lines such as ``workflow: from prompt 2``."""
    out: dict[str, int] = {}
    for line in text.splitlines():
        m = _CHOICE_LINE.match(line.strip())
        if not m or m.group(1) not in names:
            continue
        pick = re.search(r"prompt\s*#?\s*([12])\b", m.group(2), re.I) or re.search(
            r"\b([12])\b", m.group(2)
        )
        if pick:
            out[m.group(1)] = int(pick.group(1))
    return out


def _extract(text: str, name: str, registry: Registry) -> str | None:
    """A usable non-empty value for ``name`` or ``None``."""
    try:
        value = find_tag(text, name)
    except MalformedMarkup:
        return None
    if not value or registry.find_tag(value) is not None:
        return None
    return value


def _final_block(reply: str) -> str:
    """Region holding crossover results: the crossover block, else the reply
    with mutation blocks removed."""
    try:
        block = find_tag(reply, "crossover")
    except MalformedMarkup:
        return reply.split("<crossover>", 1)[1]
    if block is not None:
        return block
    return re.sub(r"<(mutation_[12])>.*?</\1>", "", reply, flags=re.S)


class Evolver:
    """Task and solution evolution for one run, driven by the optimizer LLM."""

    def __init__(
        self,
        registry: Registry,
        template: PromptTemplate,
        gateway: Gateway,
        task_description: str,
        config: EvolutionConfig,
        rng: np.random.Generator,
        component_memory: ComponentMemory | None = None,
        prompt_memory: PromptMemory | None = None,
        catalog: Catalog | None = None,
    ):
        self.registry = registry
        self.template = template
        self.gateway = gateway
        self.task_description = task_description
        self.config = config
        self.rng = rng
        self.cmem = component_memory or ComponentMemory(registry, config.component_memory_capacity)
        self.pmem = prompt_memory or PromptMemory(config.prompt_memory_capacity, config.memory_form)
        self.catalog = catalog or Catalog()
        self.events: list[dict] = []

    # plumbing

    def _ask(self, prompt: str) -> str:
        req = ChatRequest(
            user=prompt,
            temperature=self.config.temperature,
            max_output_tokens=self.config.max_output_tokens,
        )
        try:
            return self.gateway.generate(req, OPTIMIZER).text
        except ContentEmpty:
            return ""

    def _event(self, kind: str, **info) -> None:
        info["event"] = kind
        log.info("evolution event: %s", info)
        self.events.append(info)

    def drain_events(self) -> list[dict]:
        out, self.events = self.events, []
        return out

    def _cmem_context(self, types: Iterable[str]) -> str:
        mem = self.cmem if self.config.use_component_memory else None
        return component_context(mem, types, self.config.context_k)

    def _pmem_context(self) -> str:
        mem = self.pmem if self.config.use_prompt_memory else None
        return prompt_context(mem, self.pmem.form, self.config.context_k)

    @staticmethod
    def _tags(names: Iterable[str]) -> str:
        return ", ".join(f"<{n}>" for n in names)

    def _example_output(self, names: Sequence[str]) -> str:
        return "\n".join(f"<{n}>new value</{n}>" for n in names)

    # task evolution

    def subtask1(self, p: ScoredPrompt) -> Direction1:
        names = self.registry.names
        component_list = "\n".join(
            f"- <{t.name}> ({t.category}): {t.description}" for t in self.registry
        )
        prompt = self.catalog.render(
            "subtask1",
            task_description=self.task_description,
            component_list=component_list,
            current_prompt=p.genome.tagged(),
            score=f"{p.score:.4f}",
            component_memory=self._cmem_context(names),
            max_mutations=self.config.max_mutations,
            type_tags=self._tags(names),
        )
        for _ in range(self.config.reasks):
            chosen = parse_direction(self._ask(prompt), names, self.config.max_mutations)
            if chosen:
                return Direction1(tuple(chosen))
        pick = names[int(self.rng.integers(len(names)))]
        self._event("direction_fallback", parent=p.uid, chosen=pick)
        return Direction1((pick,))

    def subtask2(self, p1: ScoredPrompt, p2: ScoredPrompt) -> Direction2:
        d1, d2 = self.subtask1(p1), self.subtask1(p2)
        hat, tilde = partition_directions(
            d1.mutate_types, d2.mutate_types, self.registry.names, self.rng
        )
        preferred = 1 if p1.score >= p2.score else 2
        sources: dict[str, int] = {}
        differing = []
        for n in tilde:
            if p1.genome[n] == p2.genome[n]:
                sources[n] = 1
            else:
                differing.append(n)
        if differing:
            choices: dict[str, int] = {}
            groups = [differing] if self.config.batched_choice else [[n] for n in differing]
            for group in groups:
                choices.update(parse_choices(self._ask(self._choice_prompt(p1, p2, group)), group))
            for n in differing:
                if n not in choices:
                    self._event("choice_fallback", component=n, source=preferred)
                sources[n] = choices.get(n, preferred)
        fixed = {
            n: (p1.genome[n] if sources[n] == 1 else p2.genome[n]) for n in tilde
        }
        return Direction2(hat, {n: sources[n] for n in tilde}, fixed)

    def _choice_prompt(self, p1: ScoredPrompt, p2: ScoredPrompt, names: Sequence[str]) -> str:
        pairs = "\n".join(
            f"{n}:\n  prompt 1: <{n}>{p1.genome[n]}</{n}>\n  prompt 2: <{n}>{p2.genome[n]}</{n}>"
            for n in names
        )
        return self.catalog.render(
            "subtask2_choice",
            task_description=self.task_description,
            component_memory=self._cmem_context(names),
            score_1=f"{p1.score:.4f}",
            score_2=f"{p2.score:.4f}",
            pairs=pairs,
        )

    # solution evolution

    def _collect(self, build_prompt, names: Sequence[str], final_only: bool) -> dict[str, str]:
        pending = list(names)
        values: dict[str, str] = {}
        for _ in range(self.config.reasks):
            reply = self._ask(build_prompt(pending))
            region = _final_block(reply) if final_only else reply
            for n in list(pending):
                v = _extract(region, n, self.registry)
                if v is not None:
                    values[n] = v
                    pending.remove(n)
            if not pending:
                break
        return values

    def subsolution1(self, p: ScoredPrompt, d: Direction1) -> Genome:
        form = self.pmem.form
        memory = self._pmem_context()

        def build(names):
            common = dict(
                task_description=self.task_description,
                prompt_memory=memory,
                type_tags=self._tags(names),
                example_output=self._example_output(names),
            )
            if form == DISCRETE:
                return self.catalog.render(
                    "subsolution1_discrete", current_values=p.genome.tagged(names), **common
                )
            return self.catalog.render(
                "subsolution1_continuous", current_prompt=p.rendered, **common
            )

        values = self._collect(build, d.mutate_types, final_only=False)
        failed = [n for n in d.mutate_types if n not in values]
        if failed:
            self._event("mutation_fallback", parent=p.uid, components=failed)
        return p.genome.replace(values)

    def subsolution2(self, p1: ScoredPrompt, p2: ScoredPrompt, d: Direction2) -> Genome:
        form = self.pmem.form
        memory = self._pmem_context()
        better = p1 if p1.score >= p2.score else p2

        def build(names):
            common = dict(
                task_description=self.task_description,
                prompt_memory=memory,
                type_tags=self._tags(names),
                score_1=f"{p1.score:.4f}",
                score_2=f"{p2.score:.4f}",
                example_output=self._example_output(names),
            )
            if form == DISCRETE:
                return self.catalog.render(
                    "subsolution2_discrete",
                    values_1=p1.genome.tagged(names),
                    values_2=p2.genome.tagged(names),
                    **common,
                )
            return self.catalog.render(
                "subsolution2_continuous", prompt_1=p1.rendered, prompt_2=p2.rendered, **common
            )

        values = self._collect(build, d.mutate_types, final_only=True)
        failed = [n for n in d.mutate_types if n not in values]
        if failed:
            self._event("crossover_fallback", parents=[p1.uid, p2.uid], components=failed)
        merged = dict(d.fixed_values)
        for n in d.mutate_types:
            merged[n] = values.get(n, better.genome[n])
        return Genome(merged, self.registry)


# -- the run --------------------------------------------------------------------


def _sp_to_dict(sp: ScoredPrompt) -> dict:
    return {"genome": sp.genome.to_dict(), "score": sp.score,
            "lineage": dict(sp.lineage) if sp.lineage else None}


def _population_summary(pop: Sequence[ScoredPrompt]) -> dict:
    scores = [p.score for p in pop]
    return {
        "best": max(scores),
        "mean": float(np.mean(scores)),
        "members": [{"id": p.uid, "score": p.score} for p in pop],
    }


def write_json_atomic(path: str | Path, data: Any) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(data, indent=1, sort_keys=True, ensure_ascii=False)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class RunResult:
    best: ScoredPrompt
    population: list[ScoredPrompt]
    report: dict


@dataclass
class _State:
    epoch: int = 0
    step: int = 0
    next_id: int = 0
    finished: bool = False
    population: list[ScoredPrompt] = field(default_factory=list)
    evolved: list[ScoredPrompt] = field(default_factory=list)
    cache: dict[str, float] = field(default_factory=dict)


class EvolutionRun:
    """A resumable optimisation run.

    ``eval_fn`` maps a genome to its development-set score. When
    ``checkpoint_path`` is set the full run state is written there after
    initialisation and after every iteration.
    """

    def __init__(
        self,
        *,
        registry: Registry,
        template: PromptTemplate,
        pools: Mapping[str, Sequence[str]],
        gateway: Gateway,
        eval_fn: EvalFn,
        task_description: str,
        config: EvolutionConfig,
        seed: int,
        catalog: Catalog | None = None,
        checkpoint_path: str | Path | None = None,
        extra: Mapping[str, Any] | None = None,
        rng: np.random.Generator | None = None,
    ):
        template.validate(registry)
        self.registry = registry
        self.template = template
        self.pools = {n: list(pools[n]) for n in registry.names}
        self.gateway = gateway
        self.eval_fn = eval_fn
        self.task_description = task_description
        self.config = config
        self.seed = seed
        self.checkpoint_path = Path(checkpoint_path) if checkpoint_path else None
        self.extra = dict(extra or {})
        self.rng = rng if rng is not None else seed_streams(seed)[0]
        self.evolver = Evolver(registry, template, gateway, task_description, config,
                               self.rng, catalog=catalog)
        self.state = _State()
        self.report: dict = {
            "seed": seed,
            "label": config.label,
            "config": asdict(config),
            "initial": None,
            "iterations": [],
            "epochs": [],
            "best": None,
            "usage": None,
        }
        self.evaluations = 0

    @property
    def cmem(self) -> ComponentMemory:
        return self.evolver.cmem

    @property
    def pmem(self) -> PromptMemory:
        return self.evolver.pmem

    @property
    def population(self) -> list[ScoredPrompt]:
        return self.state.population

    # evaluation

    def evaluate(self, genome: Genome) -> float:
        key = genome.key()
        cached = self.state.cache.get(key)
        if cached is not None:
            return cached
        score = float(self.eval_fn(genome))
        if not math.isfinite(score):
            raise ValueError(f"eval_fn returned non-finite score {score}")
        self.evaluations += 1
        self.state.cache[key] = score
        return score

    def _new_prompt(self, genome: Genome, score: float, kind: str, parents=()) -> ScoredPrompt:
        uid = self.state.next_id
        self.state.next_id += 1
        lineage = {"id": uid, "kind": kind, "parents": list(parents)}
        return ScoredPrompt.build(genome, self.template, score, lineage)

    # lifecycle

    def initialize(self) -> None:
        st = self.state
        seen: set[Genome] = set()
        for _ in range(self.config.population_size):
            genome = random_genome(self.pools, self.rng, self.registry)
            for _ in range(100):
                if genome not in seen:
                    break
                genome = random_genome(self.pools, self.rng, self.registry)
            seen.add(genome)
            st.population.append(self._new_prompt(genome, self.evaluate(genome), "init"))
        st.population.sort(key=lambda p: -p.score)
        self.pmem.extend(st.population)
        self.report["initial"] = _population_summary(st.population)
        self.save_checkpoint()

    def iterate(self) -> dict:
        """One selection → task → solution → evaluation → memory step."""
        st, cfg, rng = self.state, self.config, self.rng
        before = self.gateway.ledger.snapshot()
        pair = len(st.population) >= 2 and rng.random() < cfg.pair_probability
        parents = roulette_select(st.population, 2 if pair else 1, rng)
        if pair and parents[0].genome == parents[1].genome:
            parents = parents[:1]
        record: dict[str, Any] = {"epoch": st.epoch, "step": st.step,
                                  "parents": [p.uid for p in parents]}
        if len(parents) == 1:
            p = parents[0]
            d1 = self.evolver.subtask1(p)
            child = self.evolver.subsolution1(p, d1)
            mutate_types, reference, kind = d1.mutate_types, p, "mutation"
            record["direction"] = {"mutate": list(d1.mutate_types)}
        else:
            p1, p2 = parents
            d2 = self.evolver.subtask2(p1, p2)
            child = self.evolver.subsolution2(p1, p2, d2)
            mutate_types, kind = d2.mutate_types, "crossover"
            reference = p1 if p1.score >= p2.score else p2
            record["direction"] = {"mutate": list(d2.mutate_types), "sources": dict(d2.sources)}
        record["kind"] = kind
        score = self.evaluate(child)
        child_sp = self._new_prompt(child, score, kind, record["parents"])
        stagnant = any(child == p.genome for p in parents)
        changed = [n for n in mutate_types if child[n] != reference.genome[n]]
        added = False
        if not stagnant:
            for n in changed:
                self.cmem.record_pair(n, reference.genome[n], child[n], reference.score, score)
            self.pmem.insert_prompt(child_sp)
            known = {p.genome for p in st.population} | {p.genome for p in st.evolved}
            if child not in known:
                st.evolved.append(child_sp)
                added = True
        else:
            log.info("stagnant step: epoch %d step %d", st.epoch, st.step)
        after = self.gateway.ledger.snapshot()
        record.update(
            child_id=child_sp.uid,
            child=child.to_dict(),
            score=score,
            reference_score=reference.score,
            recorded_pairs=[] if stagnant else changed,
            stagnant=stagnant,
            added=added,
            events=self.evolver.drain_events(),
            usage={r: [a - b for a, b in zip(after[r], before.get(r, (0, 0, 0)))] for r in after},
        )
        self.report["iterations"].append(record)
        st.step += 1
        return record

    def end_epoch(self) -> None:
        st = self.state
        st.population = update_population(st.population, st.evolved, self.config.population_size)
        summary = _population_summary(st.population)
        summary["epoch"] = st.epoch
        summary["evolved"] = len(st.evolved)
        self.report["epochs"].append(summary)
        st.evolved = []
        st.epoch += 1
        st.step = 0
        if st.epoch >= self.config.epochs:
            st.finished = True
            self._finalize_report()

    def _finalize_report(self) -> None:
        best = self.best()
        self.report["best"] = {**_sp_to_dict(best), "rendered": best.rendered}
        self.report["usage"] = self.gateway.ledger.totals()

    def best(self) -> ScoredPrompt:
        return max(self.state.population, key=lambda p: p.score)

    def advance(self) -> None:
        """Run one iteration, or close the epoch when its iterations are done."""
        if self.state.step < self.config.iterations:
            self.iterate()
        if self.state.step >= self.config.iterations:
            self.end_epoch()
        self.save_checkpoint()

    def run(self, callback: Callable[[EvolutionRun], None] | None = None) -> RunResult:
        if not self.state.population:
            self.initialize()
        while not self.state.finished:
            self.advance()
            if callback is not None:
                callback(self)
        return self.result()

    def result(self) -> RunResult:
        return RunResult(self.best(), list(self.state.population), self.report)

    # checkpointing

    def state_dict(self) -> dict:
        st = self.state
        return {
            "format": CHECKPOINT_FORMAT,
            "seed": self.seed,
            "task_description": self.task_description,
            "registry": self.registry.to_config(),
            "template": self.template.to_text(),
            "pools": self.pools,
            "config": asdict(self.config),
            "rng": self.rng.bit_generator.state,
            "state": {
                "epoch": st.epoch,
                "step": st.step,
                "next_id": st.next_id,
                "finished": st.finished,
                "population": [_sp_to_dict(p) for p in st.population],
                "evolved": [_sp_to_dict(p) for p in st.evolved],
                "cache": dict(sorted(st.cache.items())),
            },
            "component_memory": self.cmem.to_dict(),
            "prompt_memory": self.pmem.to_dict(),
            "gateway": self.gateway.state_dict(),
            "report": self.report,
            "extra": self.extra,
        }

    def save_checkpoint(self) -> None:
        if self.checkpoint_path is not None:
            write_json_atomic(self.checkpoint_path, self.state_dict())

    @classmethod
    def from_checkpoint(
        cls,
        data: Mapping[str, Any] | str | Path,
        *,
        gateway: Gateway,
        eval_fn: EvalFn,
        catalog: Catalog | None = None,
        checkpoint_path: str | Path | None = None,
    ) -> EvolutionRun:
        if not isinstance(data, Mapping):
            checkpoint_path = checkpoint_path or data
            data = json.loads(Path(data).read_text(encoding="utf-8"))
        if data.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint format {data.get('format')!r}")
        registry = Registry.from_config(data["registry"])
        template = PromptTemplate.parse(data["template"])
        rng = np.random.default_rng()
        rng.bit_generator.state = data["rng"]
        run = cls(
            registry=registry,
            template=template,
            pools=data["pools"],
            gateway=gateway,
            eval_fn=eval_fn,
            task_description=data["task_description"],
            config=EvolutionConfig.from_dict(data["config"]),
            seed=data["seed"],
            catalog=catalog,
            checkpoint_path=checkpoint_path,
            extra=data.get("extra"),
            rng=rng,
        )

        def load(items):
            return [ScoredPrompt.build(Genome(i["genome"], registry), template, i["score"],
                                       i["lineage"]) for i in items]

        s = data["state"]
        run.state = _State(
            epoch=s["epoch"], step=s["step"], next_id=s["next_id"], finished=s["finished"],
            population=load(s["population"]), evolved=load(s["evolved"]), cache=dict(s["cache"]),
        )
        run.evolver.cmem = ComponentMemory.from_dict(data["component_memory"], registry)
        run.evolver.pmem = PromptMemory.from_dict(data["prompt_memory"], registry, template)
        gateway.load_state_dict(data["gateway"])
        run.report = json.loads(json.dumps(data["report"]))
        return run


def run(
    config: EvolutionConfig,
    *,
    registry: Registry,
    template: PromptTemplate,
    pools: Mapping[str, Sequence[str]],
    gateway: Gateway,
    eval_fn: EvalFn,
    task_description: str,
    seed: int,
    **kwargs,
) -> RunResult:
    """Initialise and run a full optimisation; returns the best prompt and report."""
    return EvolutionRun(
        registry=registry, template=template, pools=pools, gateway=gateway, eval_fn=eval_fn,
        task_description=task_description, config=config, seed=seed, **kwargs,
    ).run()
