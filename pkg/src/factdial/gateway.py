"""Uniform client for chat, embedding, and token-logprob calls.

Speaks the de-facto chat-completions JSON wire format:

    POST {base_url}/chat/completions   {model, messages, temperature, max_tokens}
        -> {"choices": [{"message": {"content": ...}}]}
    POST {base_url}/embeddings         {model, input: [text, ...]}
        -> {"data": [{"embedding": [...]}, ...]}
    POST {base_url}/completions        {model, prompt, echo: true, logprobs: true, max_tokens: 0}
        -> {"choices": [{"logprobs": {"tokens": [...], "token_logprobs": [...]}}]}

Transient failures (connection errors, timeouts, HTTP 429/5xx) are retried
with exponential backoff: base 0.5 s, doubling, plus jitter, up to
``max_retries`` extra attempts. The transport is pluggable so tests can run
against the in-process mock rule engine without sockets.
"""

from __future__ import annotations

import logging
import os
import random
import threading
import time
from dataclasses import dataclass

import requests

from .errors import (
    GatewayTimeout,
    HttpStatusError,
    MalformedResponse,
    Unsupported,
)

logger = logging.getLogger(__name__)

BACKOFF_BASE_S = 0.5


@dataclass
class GatewayConfig:
    base_url: str
    api_key_env: str = "FACTDIAL_API_KEY"
    model: str = "mock-chat"
    temperature: float = 0.0
    max_tokens: int = 512
    timeout: float = 30.0
    max_retries: int = 2
    parallelism: int = 4

    def __post_init__(self):
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


@dataclass(frozen=True)
class ChatResult:
    text: str
    token_logprobs: tuple[tuple[str, float], ...] | None = None


class TransientFailure(Exception):
    """Internal transport signal: worth retrying."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class HttpTransport:
    """requests-backed transport for a live (or loopback mock) endpoint."""

    def __init__(self, cfg: GatewayConfig):
        self.cfg = cfg
        self._session = requests.Session()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.cfg.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def post(self, route: str, payload: dict) -> dict:
        url = self.cfg.base_url.rstrip("/") + route
        try:
            resp = self._session.post(
                url, json=payload, headers=self._headers(), timeout=self.cfg.timeout
            )
        except requests.Timeout as e:
            raise TransientFailure(f"timeout: {e}") from None
        except requests.ConnectionError as e:
            raise TransientFailure(f"connection error: {e}") from None
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientFailure(f"HTTP {resp.status_code}", status=resp.status_code)
        if resp.status_code != 200:
            raise HttpStatusError(resp.status_code, resp.text[:200])
        try:
            return resp.json()
        except ValueError:
            raise MalformedResponse(f"non-JSON body from {url}") from None

    def probe(self) -> bool:
        """True when the endpoint answers HTTP at all (any status)."""
        try:
            self._session.get(self.cfg.base_url, timeout=min(self.cfg.timeout, 5.0))
            return True
        except requests.RequestException:
            return False


class Gateway:
    """Shareable client; at most ``cfg.parallelism`` requests are in flight."""

    def __init__(self, cfg: GatewayConfig, transport=None, rng: random.Random | None = None):
        self.cfg = cfg
        self.transport = transport if transport is not None else HttpTransport(cfg)
        self._rng = rng if rng is not None else random.Random(0)
        self._rng_lock = threading.Lock()
        self._slots = threading.BoundedSemaphore(cfg.parallelism)

    def _jitter(self) -> float:
        with self._rng_lock:
            return self._rng.uniform(0.0, 0.1)

    def _post_with_retries(self, route: str, payload: dict) -> dict:
        attempts = self.cfg.max_retries + 1
        last: TransientFailure | None = None
        for attempt in range(attempts):
            try:
                with self._slots:
                    return self.transport.post(route, payload)
            except TransientFailure as e:
                last = e
                if attempt + 1 < attempts:
                    delay = BACKOFF_BASE_S * (2**attempt) + self._jitter()
                    logger.warning("transient gateway failure (%s), retrying in %.2fs", e, delay)
                    time.sleep(delay)
        assert last is not None
        if last.status is not None:
            raise HttpStatusError(last.status, str(last))
        raise GatewayTimeout(str(last))

    def chat(self, messages: list[tuple[str, str]]) -> ChatResult:
        """One chat completion. ``messages`` is a non-empty list of (role, content)."""
        if not messages:
            raise ValueError("messages must be non-empty")
        payload = {
            "model": self.cfg.model,
            "messages": [{"role": r, "content": c} for r, c in messages],
            "temperature": self.cfg.temperature,
            "max_tokens": self.cfg.max_tokens,
        }
        body = self._post_with_retries("/chat/completions", payload)
        try:
            choice = body["choices"][0]
            text = choice["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise MalformedResponse(f"unexpected chat body: {str(body)[:200]}") from None
        if not isinstance(text, str):
            raise MalformedResponse("chat content is not a string")
        if text == "":
            logger.warning("backend returned empty chat content")
        logprobs = None
        lp = choice.get("logprobs")
        if isinstance(lp, dict) and "tokens" in lp and "token_logprobs" in lp:
            logprobs = tuple(zip(lp["tokens"], lp["token_logprobs"]))
        return ChatResult(text=text, token_logprobs=logprobs)

    def chat_text(self, prompt: str) -> str:
        return self.chat([("user", prompt)]).text

    def embed(self, texts: list[str]) -> list[list[float]]:
        """One embedding vector per input text; all vectors share a dimension."""
        if not texts:
            raise ValueError("texts must be non-empty")
        payload = {"model": self.cfg.model, "input": list(texts)}
        body = self._post_with_retries("/embeddings", payload)
        try:
            vectors = [list(map(float, item["embedding"])) for item in body["data"]]
        except (KeyError, TypeError, ValueError):
            raise MalformedResponse(f"unexpected embeddings body: {str(body)[:200]}") from None
        if len(vectors) != len(texts):
            raise MalformedResponse(
                f"asked for {len(texts)} embeddings, got {len(vectors)}"
            )
        dims = {len(v) for v in vectors}
        if len(dims) != 1:
            raise MalformedResponse(f"embedding dimensions differ: {sorted(dims)}")
        return vectors

    def logprobs(self, text: str) -> list[tuple[str, float]]:
        """Per-token log probabilities of ``text`` under the scoring model."""
        if not text:
            raise ValueError("text must be non-empty")
        payload = {
            "model": self.cfg.model,
            "prompt": text,
            "echo": True,
            "logprobs": True,
            "max_tokens": 0,
        }
        try:
            body = self._post_with_retries("/completions", payload)
        except HttpStatusError as e:
            if e.code == 404:
                raise Unsupported("backend has no scoring endpoint") from None
            raise
        try:
            lp = body["choices"][0]["logprobs"]
            tokens = lp["tokens"]
            values = lp["token_logprobs"]
        except (KeyError, IndexError, TypeError):
            raise Unsupported("backend returned no logprobs") from None
        if len(tokens) != len(values):
            raise MalformedResponse("token/logprob length mismatch")
        return [(t, float(v)) for t, v in zip(tokens, values)]

    def probe(self) -> bool:
        probe = getattr(self.transport, "probe", None)
        if probe is None:
            return True
        return probe()
