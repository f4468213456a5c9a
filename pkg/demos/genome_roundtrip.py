"""A prompt as a genome: five typed components rendered into one instruction.

Run: python demos/genome_roundtrip.py
"""
from __future__ import annotations

from promptevo import Genome, PromptTemplate, Registry, parse, render

registry = Registry.default()
template = PromptTemplate.default()

genome = Genome(
    {
        "role": "You are a careful film critic.",
        "task_description": "Decide whether a review is positive or negative.",
        "output_format": "Answer with one word inside <ans></ans>.",
        "workflow": "Read the review, note the verdict words, then decide.",
        "examples": "",
    },
    registry,
)

print("component types:", ", ".join(registry.names))
print("\nrendered prompt:\n" + render(genome, template))
print("\ntagged form used in meta-prompts:\n" + genome.tagged())

# rendering is lossless: the template's tags let us recover every value
assert parse(render(genome, template), registry) == genome
print("\nparse(render(g)) == g holds")
