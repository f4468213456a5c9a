from __future__ import annotations

import json

import pytest
from helpers import make_gateway

from promptevo.errors import BackendUnavailable, MalformedPromptFile
from promptevo.genome import Registry
from promptevo.mock import meta_kind, synthetic_optimizer
from promptevo.pools import generate_pools, load_pools, parse_values, save_pools

REG = Registry.default()


def test_generates_requested_values_per_type():
    pools = generate_pools(REG, "classify", make_gateway(synthetic_optimizer))
    assert list(pools) == list(REG.names)
    assert all(len(v) == 10 and len(set(v)) == 10 for v in pools.values())
    bigger = generate_pools(REG, "classify", make_gateway(synthetic_optimizer), values_per_type=20)
    assert all(len(v) == 20 for v in bigger.values())
    with_null = generate_pools(REG, "classify", make_gateway(synthetic_optimizer), 3,
                               null_option=True)
    assert all(v[-1] == "" and len(v) == 4 for v in with_null.values())


def test_mock_pools_are_deterministic():
    a = generate_pools(REG, "t", make_gateway(synthetic_optimizer, seed=1), 5)
    b = generate_pools(REG, "t", make_gateway(synthetic_optimizer, seed=1), 5)
    assert a == b


def test_parse_values_filters_duplicates_and_markup():
    text = "<role>A</role><role>A</role><role></role><role>x <workflow>y</workflow></role><role>B</role>"
    assert parse_values(text, "role", REG) == ["A", "B"]


def test_short_replies_accumulate_across_attempts():
    counter = {"n": 0}

    def respond(request, rng):
        counter["n"] += 1
        name = request.user.split("Component type: <")[1].split(">")[0]
        return f"<{name}>value {counter['n']}</{name}>"

    pools = generate_pools(REG, "t", make_gateway(respond), values_per_type=2, attempts=3)
    assert all(len(v) == 2 for v in pools.values())


def test_failure_keeps_partial_file(tmp_path):
    path = tmp_path / "pools.json"

    def respond(request, rng):
        if "Component type: <workflow>" in request.user:
            return "no values"
        return synthetic_optimizer(request, rng)

    def keep(partial):
        save_pools(path, partial, REG, 4)

    with pytest.raises(BackendUnavailable):
        generate_pools(REG, "t", make_gateway(respond), 4, on_type_done=keep)
    saved = json.loads(path.read_text())["pools"]
    assert set(saved) == {"role", "task_description", "output_format"}
    resumed = generate_pools(REG, "t", make_gateway(synthetic_optimizer), 4, existing=saved)
    assert resumed["role"] == saved["role"]
    assert len(resumed["workflow"]) == 4


def test_load_pools_checks_registry(tmp_path):
    path = tmp_path / "p.json"
    save_pools(path, {"role": ["a"]}, REG, 1)
    assert load_pools(path) == {"role": ["a"]}
    with pytest.raises(MalformedPromptFile):
        load_pools(path, REG)
    path.write_text("[]")
    with pytest.raises(MalformedPromptFile):
        load_pools(path)
    assert meta_kind("### Component value generation\n") == "component_values"
