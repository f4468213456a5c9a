"""A complete optimisation run against the offline mock optimizer.

The synthetic optimizer rewrites values into "... (variant N)" forms. The toy
fitness below prefers larger N, so the curve should climb epoch by epoch.

Run: python demos/mock_evolution.py
"""
from __future__ import annotations

import re

from promptevo import EvolutionConfig, Gateway, MockBackend, PromptTemplate, Registry, run
from promptevo.mock import synthetic_optimizer

registry = Registry.default()
pools = {n: [f"{n} seed value {i}" for i in range(5)] for n in registry.names}


def fitness(genome) -> float:
    nums = [re.search(r"variant (\d+)", v) for v in genome.values()]
    return sum(int(m.group(1)) for m in nums if m) / (1000 * len(nums))


gateway = Gateway({"optimizer": MockBackend(seed=1, responder=synthetic_optimizer)})
config = EvolutionConfig(population_size=6, epochs=5, iterations=4)
result = run(config, registry=registry, template=PromptTemplate.default(), pools=pools,
             gateway=gateway, eval_fn=fitness, task_description="toy task", seed=5)

print(f"initial best {result.report['initial']['best']:.3f}")
for e in result.report["epochs"]:
    print(f"epoch {e['epoch']}: best {e['best']:.3f}  mean {e['mean']:.3f}")
print("\nbest genome:\n" + result.best.genome.tagged())
print("\noptimizer calls:", gateway.ledger.totals()["optimizer"]["calls"])
