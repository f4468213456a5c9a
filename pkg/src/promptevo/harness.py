"""Datasets, task adapters and the prompt evaluation function."""
from __future__ import annotations

import csv
import json
import re
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ContentEmpty, MalformedPromptFile, NoAnswerFound
from .gateway import TARGET, ChatRequest, Gateway
from .genome import Genome, PromptTemplate, ScoredPrompt, find_all_tags, render
from .metrics import METRICS, mcc

CLASSIFICATION = "classification"
EXTRACTION = "extraction"
SUMMARIZATION = "summarization"
KINDS = (CLASSIFICATION, EXTRACTION, SUMMARIZATION)

COMPATIBLE = {
    CLASSIFICATION: ("accuracy", "mcc"),
    EXTRACTION: ("token_f1", "exact_match"),
    SUMMARIZATION: ("rouge_avg",),
}

DEFAULT_CUES = {
    CLASSIFICATION: "Reply with exactly one of the valid answers, wrapped as <{tag}>answer</{tag}>.",
    EXTRACTION: "Reply with the shortest answer supported by the input, wrapped as <{tag}>answer</{tag}>.",
    SUMMARIZATION: "Write a concise summary of the input, wrapped as <{tag}>summary</{tag}>.",
}
FORMAT_CUE = "Follow the output requirements above and put the final answer inside <{tag}></{tag}>."


@dataclass(frozen=True)
class Example:
    input: str
    answer: str
    aux: Mapping[str, Any] | None = None

    def __post_init__(self):
        if not isinstance(self.input, str) or not self.input.strip():
            raise ValueError("example input must be a non-empty string")
        if self.answer is None or str(self.answer) == "":
            raise ValueError("example answer is missing")


@dataclass(frozen=True)
class TaskAdapter:
    kind: str
    labels: tuple[str, ...] = ()
    metric: str = ""
    answer_tag: str = "ans"
    default_cue: str = ""
    format_component: str = "output_format"
    # class treated as positive by MCC; defaults to the last label
    positive_label: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"task kind must be one of {KINDS}")
        object.__setattr__(self, "labels", tuple(str(x).strip().lower() for x in self.labels))
        if not self.metric:
            object.__setattr__(self, "metric", COMPATIBLE[self.kind][0])
        if self.metric not in COMPATIBLE[self.kind]:
            raise ValueError(f"metric {self.metric!r} does not fit a {self.kind} task")
        if self.kind == CLASSIFICATION and len(self.labels) < 2:
            raise ValueError("classification needs at least two labels")
        if self.metric == "mcc" and len(self.labels) != 2:
            raise ValueError("mcc needs exactly two labels")
        if not self.default_cue:
            object.__setattr__(self, "default_cue",
                               DEFAULT_CUES[self.kind].format(tag=self.answer_tag))

    def canonical(self, answer: str) -> str:
        text = str(answer).strip()
        return text.lower() if self.kind == CLASSIFICATION else text

    def score(self, preds: Sequence[str | None], golds: Sequence[str]) -> float:
        golds = [self.canonical(g) for g in golds]
        if self.metric == "mcc":
            positive = self.positive_label or self.labels[-1]
            return mcc(preds, golds, positive=positive.lower())
        return METRICS[self.metric](preds, golds)


@dataclass(frozen=True)
class Split:
    dev: tuple[Example, ...]
    test: tuple[Example, ...]
    seed: int | None = None


def _example(row: Mapping[str, Any], columns: Mapping[str, str] | None) -> Example:
    cols = {"input": "input", "answer": "answer", **(columns or {})}
    missing = [c for c in (cols["input"], cols["answer"]) if c not in row]
    if missing:
        raise ValueError(f"row lacks columns {missing}: {dict(row)}")
    taken = {cols["input"], cols["answer"]}
    aux = {k: v for k, v in row.items() if k not in taken} or None
    return Example(str(row[cols["input"]]), str(row[cols["answer"]]), aux)


def load_examples(path: str | Path, columns: Mapping[str, str] | None = None) -> list[Example]:
    """Read JSON-lines, a JSON list, CSV or TSV. ``columns`` maps ``input``/``answer``
    to the file's own field names."""
    path = Path(path)
    suffix = path.suffix.lower()
    text = path.read_text(encoding="utf-8")
    if suffix in (".csv", ".tsv"):
        rows = csv.DictReader(text.splitlines(), delimiter="\t" if suffix == ".tsv" else ",")
    elif suffix == ".json":
        rows = json.loads(text)
    else:
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
    return [_example(r, columns) for r in rows]


def split_dataset(examples: Sequence[Example], test_size: int = 100, seed: int = 0) -> Split:
    """Random held-out test split of ``test_size`` examples; the rest is dev."""
    if not 0 < test_size < len(examples):
        raise ValueError(f"test_size {test_size} needs a dataset larger than {len(examples)}")
    order = np.random.default_rng(seed).permutation(len(examples))
    test_idx = set(order[:test_size].tolist())
    test = tuple(examples[i] for i in sorted(test_idx))
    dev = tuple(examples[i] for i in range(len(examples)) if i not in test_idx)
    return Split(dev, test, seed)


def task_prompt_text(rendered: str, genome: Mapping[str, str] | None, ex: Example,
                     adapter: TaskAdapter) -> str:
    parts = [rendered.rstrip(), f"Input:\n{ex.input.strip()}"]
    if adapter.kind == CLASSIFICATION:
        parts.append("Valid answers: " + ", ".join(adapter.labels))
    has_format = bool(genome and genome.get(adapter.format_component, "").strip())
    parts.append(FORMAT_CUE.format(tag=adapter.answer_tag) if has_format else adapter.default_cue)
    return "\n\n".join(p for p in parts if p)


def build_task_prompt(p: ScoredPrompt, ex: Example, adapter: TaskAdapter) -> str:
    """Instruction, input block and output cue for the target LLM."""
    return task_prompt_text(p.rendered, p.genome, ex, adapter)


def extract_answer(raw: str, adapter: TaskAdapter) -> str:
    """Canonical answer from the target LLM's reply, or :class:`NoAnswerFound`."""
    tagged = find_all_tags(raw, adapter.answer_tag)
    tag_value = tagged[-1].strip() if tagged else ""
    if adapter.kind == CLASSIFICATION:
        if tag_value.lower() in adapter.labels:
            return tag_value.lower()
        best, best_pos = None, -1
        for label in adapter.labels:
            for m in re.finditer(rf"(?<!\w){re.escape(label)}(?!\w)", raw, re.I):
                # prefer the longer label when two end at the same place
                if m.end() > best_pos or (m.end() == best_pos and len(label) > len(best)):
                    best, best_pos = label, m.end()
        if best is None:
            raise NoAnswerFound(f"no label found in {raw[:80]!r}")
        return best
    answer = tag_value or raw.strip()
    if not answer:
        raise NoAnswerFound("empty reply")
    return answer


class Evaluator:
    """Scores genomes on a fixed slice of a split.

    The subsample is drawn once, at construction, so every prompt of a run is
    compared on the same examples. ``subsample_size=None`` uses the whole part.
    """

    def __init__(
        self,
        examples: Sequence[Example],
        adapter: TaskAdapter,
        gateway: Gateway,
        template: PromptTemplate,
        subsample_size: int | None = 50,
        rng: np.random.Generator | None = None,
        temperature: float = 0.5,
        max_output_tokens: int = 512,
    ):
        if not examples:
            raise ValueError("cannot evaluate on an empty split")
        self.adapter = adapter
        self.gateway = gateway
        self.template = template
        self.temperature = temperature
        self.max_output_tokens = max_output_tokens
        if subsample_size is None or subsample_size >= len(examples):
            self.examples = tuple(examples)
        else:
            rng = rng if rng is not None else np.random.default_rng(0)
            idx = np.sort(rng.choice(len(examples), size=subsample_size, replace=False))
            self.examples = tuple(examples[i] for i in idx)
        self.calls = 0

    def _predict(self, rendered: str, genome: Genome | None, ex: Example) -> str | None:
        req = ChatRequest(
            user=task_prompt_text(rendered, genome, ex, self.adapter),
            temperature=self.temperature,
            max_output_tokens=self.max_output_tokens,
        )
        try:
            raw = self.gateway.generate(req, TARGET).text
        except ContentEmpty:
            return None
        try:
            return extract_answer(raw, self.adapter)
        except NoAnswerFound:
            return None

    def predictions(self, rendered: str, genome: Genome | None = None) -> list[str | None]:
        workers = max(1, min(self.gateway.max_in_flight, len(self.examples)))
        self.calls += len(self.examples)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            # map preserves example order regardless of completion order
            return list(pool.map(lambda ex: self._predict(rendered, genome, ex), self.examples))

    def score_rendered(self, rendered: str, genome: Genome | None = None) -> float:
        preds = self.predictions(rendered, genome)
        return self.adapter.score(preds, [ex.answer for ex in self.examples])

    def __call__(self, genome: Genome) -> float:
        return self.score_rendered(render(genome, self.template), genome)


@dataclass
class PromptFile:
    """Best-prompt document: continuous text plus the discrete genome."""

    text: str
    genome: dict[str, str] = field(default_factory=dict)
    score: float | None = None
    seed: int | None = None
    registry: list[dict] | None = None

    def to_dict(self) -> dict:
        return {"text": self.text, "genome": self.genome, "score": self.score,
                "seed": self.seed, "registry": self.registry}

    @classmethod
    def load(cls, path: str | Path) -> PromptFile:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
            if not isinstance(data, dict) or not isinstance(data.get("text"), str):
                raise ValueError("missing 'text'")
            genome = data.get("genome") or {}
            if not isinstance(genome, dict):
                raise ValueError("'genome' must be an object")
            return cls(data["text"], {str(k): str(v) for k, v in genome.items()},
                       data.get("score"), data.get("seed"), data.get("registry"))
        except (OSError, ValueError) as exc:
            raise MalformedPromptFile(f"cannot read prompt file {path}: {exc}") from exc
