"""Guided versus unguided evolution on a landscape where memory matters.

Each component value carries a hidden level. The scripted optimizer picks an
improving value more often when it can see memory context, which is what the
real method relies on an LLM to do.

Run: python demos/ablation.py
"""
from __future__ import annotations

import re
from dataclasses import replace

from promptevo import EvolutionConfig, Gateway, MockBackend, PromptTemplate, Registry, run
from promptevo.memory import MEMORY_DISABLED
from promptevo.mock import current_values, meta_kind, parent_values, requested_types, wrap

registry = Registry.default()
pools = {n: [f"level 0 {n} {i}" for i in range(3)] for n in registry.names}


def level(value: str) -> int:
    return int(re.match(r"level (\d+)", value).group(1))


def fitness(genome) -> float:
    return sum(level(v) for v in genome.values()) / len(genome)


def optimizer(request, rng):
    text, names = request.user, requested_types(request.user)
    p_up = 0.4 if MEMORY_DISABLED in text else 0.8
    kind = meta_kind(text)
    if kind == "subtask1":
        return "mutate: " + ", ".join(f"<{n}>" for n in names[:2])
    if kind == "subtask2_choice":
        return "\n".join(f"{n}: from prompt 1" for n in names)

    def step(value):
        lv = level(value) + (1 if rng.random() < p_up else -1)
        return f"level {max(lv, 0)} {int(rng.integers(1e6))}"

    if kind.startswith("subsolution1"):
        cur = current_values(text, names)
        return wrap({n: step(cur[n]) for n in names})
    v1, _ = parent_values(text, names)
    out = wrap({n: step(v1[n]) for n in names})
    return f"<crossover>\n{out}\n</crossover>"


base = EvolutionConfig(population_size=6, epochs=6, iterations=6)
for cfg in (base, replace(base, use_component_memory=False, use_prompt_memory=False)):
    finals = []
    for seed in (5, 10, 15):
        gw = Gateway({"optimizer": MockBackend(seed=seed, responder=optimizer)})
        res = run(cfg, registry=registry, template=PromptTemplate.default(), pools=pools,
                  gateway=gw, eval_fn=fitness, task_description="toy", seed=seed)
        finals.append(res.best.score)
    print(f"{cfg.label:<12} final best per seed: {[round(s, 2) for s in finals]}")
