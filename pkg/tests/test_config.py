from __future__ import annotations

import pytest

from promptevo import config
from promptevo.errors import ConfigError


def test_defaults():
    cfg = config.load()
    assert cfg.seeds == [5, 10, 15]
    assert cfg.evolution.population_size == 10 and cfg.evolution.temperature == 0.5
    assert cfg.init.values_per_type == 10 and cfg.eval.test_size == 100
    assert [r["name"] for r in cfg.registry] == [
        "role", "task_description", "output_format", "workflow", "examples"]


def test_overrides_are_typed_and_checked():
    cfg = config.load(overrides=["evolution.epochs=3", "evolution.memory_form=continuous",
                                 "seeds=[1, 2]", "llm.prices.target=[0.1, 0.4]",
                                 "eval.subsample_size=null"])
    assert cfg.evolution.epochs == 3 and cfg.evolution.memory_form == "continuous"
    assert cfg.seeds == [1, 2] and cfg.llm.prices["target"] == [0.1, 0.4]
    assert cfg.eval.subsample_size is None
    for bad in ["evolution.nope=1", "nothing=1", "evolution.epochs", "llm.optimizer.x.y=1"]:
        with pytest.raises(ConfigError):
            config.load(overrides=[bad])
    with pytest.raises(ConfigError):
        config.load(overrides=["evolution.population_size=1"])


def test_file_loading_and_roundtrip(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("task:\n  description: classify\nevolution:\n  epochs: 2\n"
                    "eval:\n  dataset: data.jsonl\n")
    cfg = config.load(path)
    assert cfg.resolve(cfg.eval.dataset) == tmp_path / "data.jsonl"
    out = tmp_path / "sub"
    out.mkdir()
    cfg.absolutized().dump(out / "effective.yaml")
    again = config.load(out / "effective.yaml")
    assert again.resolve(again.eval.dataset) == tmp_path / "data.jsonl"
    assert again.to_dict() == cfg.absolutized().to_dict()
    (tmp_path / "bad.yaml").write_text("task:\n  colour: red\n")
    with pytest.raises(ConfigError):
        config.load(tmp_path / "bad.yaml")
    (tmp_path / "reg.yaml").write_text("registry:\n  - {name: ans, category: Role and Expertise}\n")
    with pytest.raises(ConfigError):
        config.load(tmp_path / "reg.yaml")
