"""Uniform access to the optimizer and target LLMs.

Backends implement ``complete(request) -> ChatResponse`` and signal retryable
failures with :class:`TransientBackendError`. :class:`Gateway` adds retries
with exponential backoff, reasoning-block stripping, an in-flight cap and the
usage ledger.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from collections.abc import Callable, Mapping
from dataclasses import asdict, dataclass, field
from typing import Protocol

import httpx

from .errors import BackendUnavailable, ContentEmpty, TransientBackendError

log = logging.getLogger(__name__)

OPTIMIZER = "optimizer"
TARGET = "target"
ROLES = (OPTIMIZER, TARGET)

API_KEY_ENV = "DELVEPO_API_KEY"


@dataclass(frozen=True)
class ChatRequest:
    user: str
    system: str = ""
    temperature: float = 0.5
    max_output_tokens: int = 1024
    model_id: str = ""

    def __post_init__(self):
        if not self.user:
            raise ValueError("user message must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must lie in [0, 2]")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be positive")

    def messages(self) -> list[dict]:
        msgs = []
        if self.system:
            msgs.append({"role": "system", "content": self.system})
        msgs.append({"role": "user", "content": self.user})
        return msgs

    def fingerprint(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ChatResponse:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency_ms: int = 0


class Backend(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...


@dataclass
class RoleUsage:
    calls: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens


@dataclass
class UsageLedger:
    """Cumulative per-role token usage.

    ``prices`` maps role to ``(usd_per_1m_input, usd_per_1m_output)``.
    """

    roles: dict[str, RoleUsage] = field(
        default_factory=lambda: {r: RoleUsage() for r in ROLES}
    )
    prices: dict[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        self._lock = threading.Lock()

    def add(self, role: str, response: ChatResponse) -> None:
        with self._lock:
            u = self.roles.setdefault(role, RoleUsage())
            u.calls += 1
            u.prompt_tokens += response.prompt_tokens
            u.completion_tokens += response.completion_tokens

    def cost(self, role: str) -> float:
        u = self.roles.get(role, RoleUsage())
        p_in, p_out = self.prices.get(role, (0.0, 0.0))
        return (u.prompt_tokens * p_in + u.completion_tokens * p_out) / 1e6

    def totals(self) -> dict:
        out = {}
        for role, u in self.roles.items():
            out[role] = {
                "calls": u.calls,
                "prompt_tokens": u.prompt_tokens,
                "completion_tokens": u.completion_tokens,
                "total_tokens": u.total_tokens,
                "cost_usd": self.cost(role),
            }
        return out

    def snapshot(self) -> dict[str, tuple[int, int, int]]:
        return {r: (u.calls, u.prompt_tokens, u.completion_tokens) for r, u in self.roles.items()}

    def to_dict(self) -> dict:
        return {
            "roles": {r: asdict(u) for r, u in self.roles.items()},
            "prices": {r: list(p) for r, p in self.prices.items()},
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> UsageLedger:
        return cls(
            roles={r: RoleUsage(**u) for r, u in data["roles"].items()},
            prices={r: tuple(p) for r, p in data.get("prices", {}).items()},
        )


class OpenAICompatibleBackend:
    """POST ``{base_url}/chat/completions`` with a bearer token."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        api_key_env: str = API_KEY_ENV,
        timeout: float = 120.0,
        client: httpx.Client | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(api_key_env, "")
        self.client = client or httpx.Client(timeout=timeout)

    def payload(self, request: ChatRequest) -> dict:
        return {
            "model": request.model_id or self.model,
            "messages": request.messages(),
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }

    def complete(self, request: ChatRequest) -> ChatResponse:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        started = time.monotonic()
        try:
            resp = self.client.post(
                f"{self.base_url}/chat/completions",
                json=self.payload(request),
                headers=headers,
            )
        except httpx.TransportError as exc:
            raise TransientBackendError(f"transport error: {exc}") from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientBackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        if resp.status_code >= 400:
            raise BackendUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            body = resp.json()
            text = body["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransientBackendError(f"malformed completion body: {exc}") from exc
        usage = body.get("usage") or {}
        return ChatResponse(
            text=text,
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
            latency_ms=int((time.monotonic() - started) * 1000),
        )


def strip_reasoning(text: str, tag: str | None = "think") -> str:
    """Drop ``<tag>...</tag>`` blocks, and everything before a stray closing tag."""
    if not tag:
        return text
    text = re.sub(rf"<{tag}>.*?</{tag}>", "", text, flags=re.S)
    close = f"</{tag}>"
    if close in text:
        text = text.rsplit(close, 1)[1]
    return text.strip()


class Gateway:
    """Routes requests per role with retry, backoff and usage accounting.

    ``retries`` is the total number of attempts. The delay before attempt
    ``i + 1`` is ``backoff_base * 2 ** (i - 1)`` seconds.
    """

    def __init__(
        self,
        backends: Mapping[str, Backend],
        retries: int = 3,
        backoff_base: float = 1.0,
        max_in_flight: int = 4,
        reasoning_tag: str | None = "think",
        ledger: UsageLedger | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if retries < 1:
            raise ValueError("retries must be >= 1")
        self.backends = dict(backends)
        if OPTIMIZER in self.backends and TARGET not in self.backends:
            self.backends[TARGET] = self.backends[OPTIMIZER]
        self.retries = retries
        self.backoff_base = backoff_base
        self.max_in_flight = max_in_flight
        self.reasoning_tag = reasoning_tag
        self.ledger = ledger or UsageLedger()
        self.sleep = sleep
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def generate(self, request: ChatRequest, role: str = OPTIMIZER) -> ChatResponse:
        backend = self.backends.get(role)
        if backend is None:
            raise BackendUnavailable(f"no backend configured for role {role!r}")
        last_exc: Exception | None = None
        for attempt in range(1, self.retries + 1):
            try:
                with self._slots:
                    response = backend.complete(request)
                break
            except TransientBackendError as exc:
                last_exc = exc
                log.warning("%s call failed (attempt %d/%d): %s", role, attempt, self.retries, exc)
                if attempt < self.retries:
                    self.sleep(self.backoff_base * 2 ** (attempt - 1))
        else:
            raise BackendUnavailable(
                f"{role} backend failed after {self.retries} attempts: {last_exc}"
            )
        self.ledger.add(role, response)
        text = strip_reasoning(response.text, self.reasoning_tag)
        if not text.strip():
            raise ContentEmpty(f"{role} backend returned no content")
        return ChatResponse(text, response.prompt_tokens, response.completion_tokens,
                            response.latency_ms)

    def state_dict(self) -> dict:
        backends = {}
        seen = set()
        for role, b in self.backends.items():
            if id(b) in seen or not hasattr(b, "state_dict"):
                continue
            seen.add(id(b))
            backends[role] = b.state_dict()
        return {"ledger": self.ledger.to_dict(), "backends": backends}

    def load_state_dict(self, state: Mapping) -> None:
        prices = self.ledger.prices
        self.ledger = UsageLedger.from_dict(state["ledger"])
        self.ledger.prices = prices or self.ledger.prices
        for role, s in state.get("backends", {}).items():
            b = self.backends.get(role)
            if b is not None and hasattr(b, "load_state_dict"):
                b.load_state_dict(s)
