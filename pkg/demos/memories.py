"""What the two memories remember and how they are shown to the optimizer.

Run: python demos/memories.py
"""
from __future__ import annotations

from promptevo import ComponentMemory, Genome, PromptMemory, PromptTemplate, Registry, ScoredPrompt
from promptevo.memory import component_context, prompt_context

registry = Registry.default()
template = PromptTemplate.default()

# Component memory keeps before/after pairs per type, better value first.
cmem = ComponentMemory(registry, capacity_per_type=3)
cmem.record_pair("role", "You are a helper.", "You are a linguist.", 0.55, 0.71)
cmem.record_pair("role", "You are a linguist.", "You are a poet.", 0.71, 0.60)
cmem.record_pair("workflow", "Think step by step.", "Answer immediately.", 0.70, 0.70)
print("component memory context:\n" + component_context(cmem, ["role", "workflow"]))

# Prompt memory is a bounded leaderboard of whole prompts.
pmem = PromptMemory(capacity=2)
for i, score in enumerate([0.62, 0.80, 0.74]):
    values = {n: f"{n.replace('_', ' ')} v{i}" for n in registry.names}
    pmem.insert_prompt(ScoredPrompt.build(Genome(values, registry), template, score))
print("\nprompt memory keeps the top two:", pmem.scores)
print("\n" + prompt_context(pmem, k=1))
