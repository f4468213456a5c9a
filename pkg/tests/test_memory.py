from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from promptevo.errors import TypeMismatch
from promptevo.genome import Genome, PromptTemplate, Registry, ScoredPrompt
from promptevo.memory import (
    CONTINUOUS,
    MEMORY_DISABLED,
    NO_COMPONENT_HISTORY,
    NO_PROMPT_HISTORY,
    ComponentMemory,
    PromptMemory,
    component_context,
    prompt_context,
)

REG = Registry.default()
TEMPLATE = PromptTemplate.default()


def sp(score, uid, tag=None):
    g = Genome({n: f"{n} {tag if tag is not None else uid}" for n in REG.names}, REG)
    return ScoredPrompt.build(g, TEMPLATE, score, {"id": uid})


def test_record_pair_orders_better_first():
    mem = ComponentMemory(REG)
    mem.record_pair("role", "Novice", "Expert Linguist", 0.42, 0.51)
    mem.record_pair("role", "Expert", "Beginner", 0.6, 0.3)
    newest, older = mem.entries["role"]
    assert (newest.better, newest.worse) == ("Expert", "Beginner")
    assert (older.better, older.worse) == ("Expert Linguist", "Novice")
    assert older.margin == pytest.approx(0.09)


def test_record_pair_tie_favours_post_value():
    mem = ComponentMemory(REG).record_pair("workflow", "before", "after", 0.5, 0.5)
    assert mem.entries["workflow"][0].better == "after"


def test_record_pair_evicts_oldest_past_capacity():
    mem = ComponentMemory(REG, capacity_per_type=3)
    for i in range(5):
        mem.record_pair("role", f"a{i}", f"b{i}", 0.0, 1.0)
    assert [p.better for p in mem.entries["role"]] == ["b4", "b3", "b2"]


def test_record_pair_rejects_unknown_type_and_tagged_values():
    mem = ComponentMemory(REG)
    with pytest.raises(TypeMismatch):
        mem.record_pair("tone", "a", "b", 0, 1)
    with pytest.raises(TypeMismatch):
        mem.record_pair("role", "<role>x</role>", "b", 0, 1)


def test_prompt_memory_orders_and_prefers_newcomer_on_tie():
    mem = PromptMemory(capacity=3)
    mem.extend([sp(0.5, 1), sp(0.7, 2), sp(0.5, 3)])
    assert [e.uid for e in mem.ledger] == [2, 3, 1]
    mem.insert_prompt(sp(0.1, 4))
    assert [e.uid for e in mem.ledger] == [2, 3, 1]
    mem.insert_prompt(sp(0.9, 5))
    assert [e.uid for e in mem.ledger] == [5, 2, 3]


def test_prompt_memory_skips_duplicate_genomes():
    mem = PromptMemory()
    mem.insert_prompt(sp(0.5, 1, tag="same"))
    mem.insert_prompt(sp(0.5, 2, tag="same"))
    assert len(mem) == 1


def test_contexts_sentinels_and_content():
    assert component_context(None, REG.names) == MEMORY_DISABLED
    assert prompt_context(None) == MEMORY_DISABLED
    assert component_context(ComponentMemory(REG), REG.names) == NO_COMPONENT_HISTORY
    assert prompt_context(PromptMemory()) == NO_PROMPT_HISTORY
    mem = ComponentMemory(REG).record_pair("role", "Novice", "Expert", 0.4, 0.5)
    text = component_context(mem, ["role", "workflow"])
    assert "[role]" in text and "<role>Expert</role>" in text and "[workflow]" not in text
    pm = PromptMemory().extend([sp(0.3, 1), sp(0.8, 2)])
    discrete = prompt_context(pm)
    assert discrete.index("score 0.8000") < discrete.index("score 0.3000")
    assert "<role>role 2</role>" in discrete
    continuous = prompt_context(pm, CONTINUOUS, k=1)
    assert continuous.startswith("Prompt 1 (score 0.8000):\n" + pm.ledger[0].rendered)
    assert "Prompt 2" not in continuous


def test_memories_serialise_roundtrip():
    cm = ComponentMemory(REG).record_pair("role", "a", "b", 0.1, 0.2)
    assert ComponentMemory.from_dict(cm.to_dict(), REG).to_dict() == cm.to_dict()
    pm = PromptMemory(capacity=4, form=CONTINUOUS).extend([sp(0.3, 1), sp(0.6, 2)])
    back = PromptMemory.from_dict(pm.to_dict(), REG, TEMPLATE)
    assert back.to_dict() == pm.to_dict()
    assert [e.rendered for e in back.ledger] == [e.rendered for e in pm.ledger]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1, 1, allow_nan=False), max_size=40), st.integers(1, 12))
def test_prompt_memory_invariants(scores, capacity):
    mem = PromptMemory(capacity=capacity)
    for i, s in enumerate(scores):
        mem.insert_prompt(sp(s, i))
    assert len(mem) == min(capacity, len(scores))
    assert mem.scores == sorted(mem.scores, reverse=True)
    assert mem.scores == sorted(scores, reverse=True)[: len(mem)]
