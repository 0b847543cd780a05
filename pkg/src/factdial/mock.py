"""Deterministic offline mock backend.

A rule table (the "mock script", a JSON file) maps prompts to scripted
replies, so whole pipeline runs are reproducible with no model behind them.
Rules are keyed on the template that produced the prompt (recognized by a
distinctive phrase of each template body) plus a ``contains`` substring;
the first matching rule wins, then the template's default.

The same engine backs two transports: ``MockTransport`` for in-process
tests and the loopback HTTP server in ``mockserver`` for end-to-end runs.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import threading
from dataclasses import dataclass

from .errors import HttpStatusError
from .gateway import TransientFailure
from .prompts import TemplateName

# One unmistakable phrase per template body, used to recognize which template
# produced an incoming prompt.
TEMPLATE_SIGNATURES: dict[TemplateName, str] = {
    TemplateName.REFORMULATE: "resolving all pronouns and references",
    TemplateName.GENERATE: "ensure the response is fluent and fact-consistent",
    TemplateName.ATOMIC_SPLIT: "split it into atomic sentences",
    TemplateName.VERIFY: "Output true if the statement is directly supported",
    TemplateName.RELEVANCE: "Output Relevant or Irrelevant",
}

DEFAULT_EMBEDDING_DIM = 8
DEFAULT_TOKEN_LOGPROB = math.log(0.5)


def detect_template(prompt: str) -> TemplateName | None:
    for name, signature in TEMPLATE_SIGNATURES.items():
        if signature in prompt:
            return name
    return None


def hash_unit_vector(text: str, dim: int) -> list[float]:
    """Deterministic unit vector seeded from the text content."""
    seed = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")
    rng = random.Random(seed)
    v = [rng.gauss(0.0, 1.0) for _ in range(dim)]
    norm = math.sqrt(sum(x * x for x in v))
    if norm == 0.0:
        v[0], norm = 1.0, 1.0
    return [x / norm for x in v]


def _identity_reformulation(prompt: str) -> str:
    """Echo the dialogue back unchanged, wrapped in the expected output markers."""
    _, _, dialogue = prompt.rpartition("\nDialogue: ")
    return (
        "**Chain of Thought**: Every reference is already explicit; nothing to resolve.\n\n"
        "**Resolved Dialogue**:\n" + dialogue
    )


@dataclass
class _FailureRule:
    contains: str
    status: int
    remaining: int | None  # None = always


class MockEngine:
    """Scripted rule table shared by the in-process and HTTP mock transports."""

    def __init__(self, script: dict | None = None):
        script = script or {}
        self.embedding_dim = int(script.get("embedding_dim", DEFAULT_EMBEDDING_DIM))
        self.token_logprob = float(script.get("token_logprob", DEFAULT_TOKEN_LOGPROB))
        self.embedding_overrides: dict[str, list[float]] = {
            k: [float(x) for x in v]
            for k, v in script.get("embedding_overrides", {}).items()
        }
        self.rules: list[dict] = list(script.get("rules", []))
        self.defaults: dict[str, object] = dict(script.get("defaults", {}))
        self._failures = [
            _FailureRule(
                contains=f.get("contains", ""),
                status=int(f["status"]),
                remaining=(int(f["times"]) if "times" in f else None),
            )
            for f in script.get("failures", [])
        ]
        self._lock = threading.Lock()
        self.calls: list[dict] = []  # {"route", "template", "prompt"} per request

    @classmethod
    def from_file(cls, path) -> "MockEngine":
        with open(path, encoding="utf-8") as f:
            return cls(json.load(f))

    def _record(self, route: str, prompt: str, template: TemplateName | None):
        with self._lock:
            self.calls.append(
                {
                    "route": route,
                    "template": template.value if template else None,
                    "prompt": prompt,
                }
            )

    def _check_failure(self, text: str) -> int | None:
        with self._lock:
            for rule in self._failures:
                if rule.contains in text:
                    if rule.remaining is None:
                        return rule.status
                    if rule.remaining > 0:
                        rule.remaining -= 1
                        return rule.status
        return None

    def _reply_for(self, template: TemplateName | None, prompt: str) -> str:
        candidates = [
            r
            for r in self.rules
            if template is not None and r.get("template") == template.value
        ]
        for rule in candidates:
            if rule.get("contains", "") in prompt:
                return self._materialize(rule["response"], prompt)
        if template is not None and template.value in self.defaults:
            return self._materialize(self.defaults[template.value], prompt)
        return ""

    @staticmethod
    def _materialize(response, prompt: str) -> str:
        if isinstance(response, str):
            return response
        if isinstance(response, dict) and response.get("identity_reformulate"):
            return _identity_reformulation(prompt)
        raise ValueError(f"unusable mock response entry: {response!r}")

    # Routes. Each mirrors one wire endpoint and returns the JSON body the
    # HTTP server would serialize.

    def chat(self, payload: dict) -> dict:
        prompt = "\n".join(m.get("content", "") for m in payload.get("messages", []))
        template = detect_template(prompt)
        self._record("chat", prompt, template)
        status = self._check_failure(prompt)
        if status is not None:
            raise MockHttpFailure(status)
        text = self._reply_for(template, prompt)
        return {"choices": [{"message": {"role": "assistant", "content": text}}]}

    def embeddings(self, payload: dict) -> dict:
        texts = payload.get("input", [])
        self._record("embeddings", json.dumps(texts), None)
        data = []
        for t in texts:
            vec = self.embedding_overrides.get(t) or hash_unit_vector(t, self.embedding_dim)
            data.append({"embedding": vec})
        return {"data": data}

    def completions(self, payload: dict) -> dict:
        prompt = payload.get("prompt", "")
        self._record("completions", prompt, None)
        tokens = prompt.split()
        return {
            "choices": [
                {
                    "text": prompt,
                    "logprobs": {
                        "tokens": tokens,
                        "token_logprobs": [self.token_logprob] * len(tokens),
                    },
                }
            ]
        }

    def dispatch(self, route: str, payload: dict) -> dict:
        if route.endswith("/chat/completions"):
            return self.chat(payload)
        if route.endswith("/embeddings"):
            return self.embeddings(payload)
        if route.endswith("/completions"):
            return self.completions(payload)
        raise MockHttpFailure(404)


class MockHttpFailure(Exception):
    def __init__(self, status: int):
        super().__init__(f"mock HTTP {status}")
        self.status = status


class MockTransport:
    """Drives a MockEngine directly, with the same error semantics as HTTP."""

    def __init__(self, engine: MockEngine):
        self.engine = engine

    def post(self, route: str, payload: dict) -> dict:
        try:
            return self.engine.dispatch(route, payload)
        except MockHttpFailure as e:
            if e.status == 429 or e.status >= 500:
                raise TransientFailure(f"HTTP {e.status}", status=e.status) from None
            raise HttpStatusError(e.status) from None

    def probe(self) -> bool:
        return True
