"""Scripted optimizer responders and fitness functions shared by the tests."""
from __future__ import annotations

import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from promptevo.gateway import Gateway
from promptevo.genome import Registry
from promptevo.memory import MEMORY_DISABLED
from promptevo.mock import (
    MockBackend,
    current_values,
    meta_kind,
    parent_values,
    requested_types,
    synthetic_optimizer,
    wrap,
)

SOLUTION_KINDS = (
    "subsolution1_discrete",
    "subsolution1_continuous",
    "subsolution2_discrete",
    "subsolution2_continuous",
)


def make_gateway(responder, seed=0, **kwargs) -> Gateway:
    backend = MockBackend(seed=seed, responder=responder)
    return Gateway({"optimizer": backend}, sleep=lambda s: None, **kwargs)


def solution_reply(text: str, values: dict[str, str]) -> str:
    """Answer a solution meta-prompt, proposing ``values`` everywhere."""
    if meta_kind(text).startswith("subsolution2"):
        block = wrap(values)
        return (f"<mutation_1>\n{block}\n</mutation_1>\n<mutation_2>\n{block}\n</mutation_2>\n"
                f"<crossover>\n{block}\n</crossover>")
    return wrap(values)


# -- good/bad landscape -----------------------------------------------------------


def good_bad_pools(registry: Registry) -> dict[str, list[str]]:
    return {n: ["good", "bad"] for n in registry.names}


def good_fraction(genome) -> float:
    return sum(v == "good" for v in genome.values()) / len(genome)


def greedy_good_optimizer(request, rng):
    """Targets the slots that are still bad and always proposes "good"."""
    text = request.user
    kind = meta_kind(text)
    names = requested_types(text)
    if kind == "subtask1":
        limit = int(re.search(r"Choose between 1 and (\d+)", text).group(1))
        cur = current_values(text, names)
        bad = [n for n in names if cur.get(n) != "good"] or names[:1]
        return "mutate: " + ", ".join(f"<{n}>" for n in bad[:limit])
    if kind == "subtask2_choice":
        v1, v2 = parent_values(text, names)
        return "\n".join(
            f"{n}: from prompt {2 if v2.get(n) == 'good' and v1.get(n) != 'good' else 1}"
            for n in names
        )
    if kind in SOLUTION_KINDS:
        return solution_reply(text, {n: "good" for n in names})
    return None


# -- graded landscape for memory ablation ----------------------------------------------


def level_of(value: str) -> int:
    m = re.search(r"level (\d+)", value)
    return int(m.group(1)) if m else 0


def level_pools(registry: Registry, top: int = 2) -> dict[str, list[str]]:
    return {n: [f"{n} level {j}" for j in range(top + 1)] for n in registry.names}


def mean_level(genome) -> float:
    return sum(level_of(v) for v in genome.values()) / len(genome)


def memory_sensitive_optimizer(p_guided: float = 0.8, p_blind: float = 0.4):
    """Moves a value one level up with probability ``p_guided`` when memory text is
    present in the meta-prompt and ``p_blind`` when it was replaced by the
    disabled sentinel; otherwise one level down."""

    def respond(request, rng):
        text = request.user
        kind = meta_kind(text)
        if kind not in SOLUTION_KINDS:
            return synthetic_optimizer(request, rng)
        names = requested_types(text)
        if kind.startswith("subsolution2"):
            v1, v2 = parent_values(text, names)
            base = {n: max(level_of(v1.get(n, "")), level_of(v2.get(n, ""))) for n in names}
        else:
            cur = current_values(text, names)
            base = {n: level_of(cur.get(n, "")) for n in names}
        p = p_blind if MEMORY_DISABLED in text else p_guided
        values = {}
        for n in names:
            step = 1 if rng.random() < p else -1
            values[n] = f"{n} level {max(0, base[n] + step)}"
        return solution_reply(text, values)

    return respond


# -- chat-completions stub server ------------------------------------------------------

class StubServer:
    """Local chat-completions endpoint.

    ``script`` is a list of status codes consumed one per request; once it
    runs out every request succeeds. Successful replies carry usage counts
    derived from the request so totals can be checked.
    """

    def __init__(self, script=(), reply="<ans>positive</ans>"):
        self.script = list(script)
        self.reply = reply
        self.requests: list[dict] = []
        self.headers: list[dict] = []
        self.statuses: list[int] = []
        self.usage = {"prompt_tokens": 0, "completion_tokens": 0}
        self._lock = threading.Lock()
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                body = self.rfile.read(int(self.headers["Content-Length"]))
                with stub._lock:
                    stub.requests.append({"path": self.path, "raw": body})
                    stub.headers.append(dict(self.headers))
                    status = stub.script.pop(0) if stub.script else 200
                    stub.statuses.append(status)
                    if status == 200:
                        payload = json.loads(body)
                        prompt = sum(len(m["content"].split()) for m in payload["messages"])
                        completion = len(stub.reply.split()) + 1
                        stub.usage["prompt_tokens"] += prompt
                        stub.usage["completion_tokens"] += completion
                        out = {
                            "id": "cmpl-1",
                            "object": "chat.completion",
                            "choices": [{"index": 0, "finish_reason": "stop",
                                         "message": {"role": "assistant",
                                                     "content": stub.reply}}],
                            "usage": {"prompt_tokens": prompt, "completion_tokens": completion,
                                      "total_tokens": prompt + completion},
                        }
                    else:
                        out = {"error": {"message": f"scripted {status}"}}
                data = json.dumps(out).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    @property
    def base_url(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}/v1"

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.httpd.shutdown()
        self.httpd.server_close()
