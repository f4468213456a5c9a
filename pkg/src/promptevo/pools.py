"""Candidate value pools used to seed the initial population."""
from __future__ import annotations

import json
import logging
from collections.abc import Callable, Mapping
from pathlib import Path

from .catalog import Catalog
from .errors import BackendUnavailable, ContentEmpty, MalformedPromptFile
from .evolution import write_json_atomic
from .gateway import OPTIMIZER, ChatRequest, Gateway
from .genome import Registry, find_all_tags

log = logging.getLogger(__name__)


def parse_values(text: str, name: str, registry: Registry) -> list[str]:
    """Distinct non-empty ``<name>`` values in reply order, markup-free only."""
    out: list[str] = []
    for v in find_all_tags(text, name):
        if v and v not in out and registry.find_tag(v) is None:
            out.append(v)
    return out


def generate_pools(
    registry: Registry,
    task_description: str,
    gateway: Gateway,
    values_per_type: int = 10,
    null_option: bool = False,
    attempts: int = 3,
    catalog: Catalog | None = None,
    temperature: float = 0.5,
    max_output_tokens: int = 1024,
    existing: Mapping[str, list[str]] | None = None,
    on_type_done: Callable[[dict[str, list[str]]], None] | None = None,
) -> dict[str, list[str]]:
    """Ask the optimizer for ``values_per_type`` candidate values per type.

    Types already complete in ``existing`` are kept. Each type gets up to
    ``attempts`` calls, accumulating distinct values; if it still comes up
    short :class:`BackendUnavailable` is raised after ``on_type_done`` has seen
    every finished type, so callers can keep a partial file. ``null_option``
    appends the empty value, which drops the component from the rendering.
    """
    if values_per_type < 1:
        raise ValueError("values_per_type must be positive")
    catalog = catalog or Catalog()
    pools: dict[str, list[str]] = {}
    for ctype in registry:
        name = ctype.name
        have = [v for v in (existing or {}).get(name, []) if v]
        if len(have) >= values_per_type:
            pools[name] = list((existing or {})[name])
            continue
        prompt = catalog.render(
            "component_values",
            task_description=task_description,
            name=name,
            category=ctype.category,
            description=ctype.description,
            count=values_per_type,
        )
        values: list[str] = []
        for attempt in range(attempts):
            req = ChatRequest(user=prompt, temperature=temperature,
                              max_output_tokens=max_output_tokens)
            try:
                reply = gateway.generate(req, OPTIMIZER).text
            except ContentEmpty:
                reply = ""
            for v in parse_values(reply, name, registry):
                if v not in values:
                    values.append(v)
            if len(values) >= values_per_type:
                break
            log.warning("pool for %s has %d/%d values after attempt %d",
                        name, len(values), values_per_type, attempt + 1)
        if len(values) < values_per_type:
            raise BackendUnavailable(
                f"could not collect {values_per_type} values for {name!r} "
                f"(got {len(values)} after {attempts} attempts)"
            )
        pools[name] = values[:values_per_type] + ([""] if null_option else [])
        if on_type_done is not None:
            on_type_done(dict(pools))
    return pools


def save_pools(path: str | Path, pools: Mapping[str, list[str]], registry: Registry,
               values_per_type: int) -> None:
    write_json_atomic(path, {
        "registry": registry.to_config(),
        "values_per_type": values_per_type,
        "pools": {n: list(pools[n]) for n in registry.names if n in pools},
    })


def load_pools(path: str | Path, registry: Registry | None = None) -> dict[str, list[str]]:
    """Read a pools file; with ``registry`` every type must have a pool."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        pools = {str(k): [str(v) for v in vs] for k, vs in data["pools"].items()}
    except (OSError, ValueError, KeyError, TypeError, AttributeError) as exc:
        raise MalformedPromptFile(f"cannot read pools file {path}: {exc}") from exc
    if registry is not None:
        missing = [n for n in registry.names if not pools.get(n)]
        if missing:
            raise MalformedPromptFile(f"pools file {path} lacks values for {missing}")
    return pools
