"""Run configuration: one YAML/JSON document with nested sections.

Unknown keys are rejected both in files and in ``--set`` overrides, except
inside free-form mappings (prices, dataset columns, mock scripts).
"""
from __future__ import annotations

import json
from collections.abc import Iterable, Mapping
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError
from .evolution import EvolutionConfig
from .genome import DEFAULT_TYPES, ComponentType


@dataclass
class TaskSection:
    description: str = ""
    kind: str = "classification"
    labels: list[str] = field(default_factory=list)
    metric: str = ""
    answer_tag: str = "ans"
    positive_label: str | None = None


@dataclass
class EndpointSection:
    base_url: str = ""
    model: str = ""
    api_key_env: str = "DELVEPO_API_KEY"
    timeout: float = 120.0


@dataclass
class LLMSection:
    optimizer: EndpointSection = field(default_factory=EndpointSection)
    # an empty target endpoint reuses the optimizer one
    target: EndpointSection = field(default_factory=EndpointSection)
    retries: int = 3
    backoff_base: float = 1.0
    max_in_flight: int = 4
    reasoning_tag: str | None = "think"
    target_temperature: float = 0.5
    target_max_tokens: int = 512
    # role -> [usd per 1M input tokens, usd per 1M output tokens]
    prices: dict[str, list[float]] = field(default_factory=dict)
    # role -> fixture path, or "builtin" for the synthetic responders
    mock: dict[str, str] = field(default_factory=lambda: {"optimizer": "builtin",
                                                          "target": "builtin"})


@dataclass
class InitSection:
    values_per_type: int = 10
    null_option: bool = False
    attempts: int = 3
    pools_path: str = "pools.json"


@dataclass
class EvalSection:
    dataset: str = ""
    dev: str = ""
    test: str = ""
    columns: dict[str, str] = field(default_factory=dict)
    test_size: int = 100
    split_seed: int = 0
    # None evaluates on the whole dev split
    subsample_size: int | None = 50


@dataclass
class Config:
    task: TaskSection = field(default_factory=TaskSection)
    registry: list[dict] = field(
        default_factory=lambda: [
            {"name": t.name, "category": t.category, "description": t.description}
            for t in DEFAULT_TYPES
        ]
    )
    # path to a template file; empty means the built-in template
    template: str = ""
    catalog_dir: str = ""
    llm: LLMSection = field(default_factory=LLMSection)
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    init: InitSection = field(default_factory=InitSection)
    eval: EvalSection = field(default_factory=EvalSection)
    seeds: list[int] = field(default_factory=lambda: [5, 10, 15])
    # directory relative paths are resolved against; not serialised
    base_dir: str = field(default="", repr=False)

    def to_dict(self) -> dict:
        data = asdict(self)
        data.pop("base_dir")
        return data

    def resolve(self, path: str) -> Path:
        p = Path(path).expanduser()
        if not p.is_absolute() and self.base_dir:
            p = Path(self.base_dir) / p
        return p

    def absolutized(self) -> Config:
        """Copy with every file path made absolute, safe to reload from anywhere."""
        data = self.to_dict()

        def fix(value: str) -> str:
            return str(self.resolve(value).resolve()) if value else value

        data["template"] = fix(data["template"])
        data["catalog_dir"] = fix(data["catalog_dir"])
        data["init"]["pools_path"] = fix(data["init"]["pools_path"])
        for k in ("dataset", "dev", "test"):
            data["eval"][k] = fix(data["eval"][k])
        data["llm"]["mock"] = {r: v if v == "builtin" else fix(v)
                               for r, v in data["llm"]["mock"].items()}
        return from_dict(data)

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False), encoding="utf-8")


_FREE_FORM = {("llm", "prices"), ("llm", "mock"), ("eval", "columns")}


def _build(cls, data: Any, path: tuple[str, ...]):
    if not isinstance(data, Mapping):
        raise ConfigError(f"{'.'.join(path) or 'config'} must be a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known) - {"base_dir"}
    if unknown:
        raise ConfigError(f"unknown config keys at {'.'.join(path) or 'top level'}: {sorted(unknown)}")
    kwargs = {}
    defaults = cls()
    for name, value in data.items():
        if name == "base_dir":
            continue
        current = getattr(defaults, name)
        if is_dataclass(current):
            value = _build(type(current), value, path + (name,))
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {'.'.join(path) or 'config'}: {exc}") from exc


def from_dict(data: Mapping[str, Any], base_dir: str | Path = "") -> Config:
    cfg = _build(Config, data, ())
    cfg.base_dir = str(base_dir)
    try:
        for entry in cfg.registry:
            ComponentType(**entry)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid registry entry: {exc}") from exc
    return cfg


def load(path: str | Path | None = None, overrides: Iterable[str] = ()) -> Config:
    """Read a config file (or the defaults) and apply ``key.path=value`` overrides."""
    data: dict = {}
    base_dir: str | Path = ""
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        data = (json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)) or {}
        base_dir = path.parent.resolve()
    merged = from_dict(data, base_dir).to_dict()
    for item in overrides:
        apply_override(merged, item)
    return from_dict(merged, base_dir)


def apply_override(data: dict, item: str) -> None:
    """Set ``a.b.c=value`` in ``data``; the value is parsed as YAML."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    parts = key.strip().split(".")
    node = data
    for i, part in enumerate(parts[:-1]):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"unknown config key {'.'.join(parts[:i + 1])!r}")
        node = node[part]
    leaf = parts[-1]
    free = tuple(parts[:-1]) in _FREE_FORM
    if not isinstance(node, dict) or (leaf not in node and not free):
        raise ConfigError(f"unknown config key {key!r}")
    node[leaf] = yaml.safe_load(raw)
