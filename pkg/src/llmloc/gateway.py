"""All model interaction goes through this gateway.

Backends: an HTTP chat-completions client, a deterministic replay backend
keyed by a stable request hash, and a recording wrapper that persists
(hash -> response) session files. A thread-safe ledger accumulates token
and cost accounting per pipeline stage.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path

SESSION_VERSION = 1


class GatewayError(Exception):
    """Model interaction failed after exhausting retries."""


class TransportError(GatewayError):
    """Retriable transport-level failure."""


class ReplayMissError(GatewayError):
    """Replay backend has no recording for the request hash."""


class SessionFormatError(GatewayError):
    """Malformed session file."""


@dataclass(frozen=True)
class ChatRequest:
    template_id: str
    rendered_prompt: str
    temperature: float = 0.0
    max_output_tokens: int = 1024
    tag: str = ""

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not self.rendered_prompt:
            raise ValueError("rendered prompt must be non-empty")


@dataclass(frozen=True)
class TokenUsage:
    input_tokens: int = 0
    output_tokens: int = 0
    estimated_cost: float = 0.0

    def __add__(self, other: "TokenUsage") -> "TokenUsage":
        return TokenUsage(
            self.input_tokens + other.input_tokens,
            self.output_tokens + other.output_tokens,
            self.estimated_cost + other.estimated_cost,
        )


@dataclass(frozen=True)
class ChatResponse:
    text: str
    usage: TokenUsage
    backend_id: str


def request_hash(req: ChatRequest) -> str:
    """Stable key for record/replay; template ids are versioned, so prompt
    template edits invalidate stale recordings."""
    return hashlib.sha256(f"{req.template_id}\n{req.rendered_prompt}".encode()).hexdigest()


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text.encode("utf-8")) / 4)


# ---------------------------------------------------------------------------
# Backends


@dataclass
class SessionEntry:
    text: str
    input_tokens: int
    output_tokens: int


class HttpBackend:
    """Chat-completions style endpoint; network use is confined to here."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key_env: str = "LLMLOC_API_KEY",
        max_context_tokens: int = 16000,
        timeout: float = 60.0,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.max_context_tokens = max_context_tokens
        self.timeout = timeout
        self.backend_id = f"http:{model}"

    def complete(self, req: ChatRequest) -> SessionEntry:
        import requests

        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        payload = {
            "model": self.model,
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
            "messages": [{"role": "user", "content": req.rendered_prompt}],
        }
        try:
            response = requests.post(
                f"{self.base_url}/chat/completions", json=payload, headers=headers, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise TransportError(f"chat endpoint unreachable: {exc}") from exc
        if response.status_code >= 500:
            raise TransportError(f"chat endpoint returned {response.status_code}")
        if response.status_code != 200:
            raise GatewayError(f"chat endpoint returned {response.status_code}: {response.text[:200]}")
        body = response.json()
        text = body["choices"][0]["message"]["content"]
        usage = body.get("usage", {})
        return SessionEntry(
            text=text,
            input_tokens=int(usage.get("prompt_tokens", estimate_tokens(req.rendered_prompt))),
            output_tokens=int(usage.get("completion_tokens", estimate_tokens(text))),
        )


class ReplayBackend:
    """Pure offline backend: responses come from a recorded session."""

    def __init__(self, entries: dict[str, SessionEntry], max_context_tokens: int = 16000) -> None:
        self.entries = entries
        self.max_context_tokens = max_context_tokens
        self.model = "replay"
        self.backend_id = "replay"

    def complete(self, req: ChatRequest) -> SessionEntry:
        key = request_hash(req)
        if key not in self.entries:
            raise ReplayMissError(
                f"unrecorded request {key} (template {req.template_id}, tag {req.tag!r})"
            )
        return self.entries[key]


class RecordingBackend:
    """Wraps a live backend and captures (hash -> response) pairs."""

    def __init__(self, inner) -> None:
        self.inner = inner
        self.entries: dict[str, SessionEntry] = {}
        self.max_context_tokens = inner.max_context_tokens
        self.model = getattr(inner, "model", "unknown")
        self.backend_id = f"record:{inner.backend_id}"

    def complete(self, req: ChatRequest) -> SessionEntry:
        entry = self.inner.complete(req)
        self.entries[request_hash(req)] = entry
        return entry


def save_session(entries: dict[str, SessionEntry], path: str | Path) -> None:
    doc = {
        "version": SESSION_VERSION,
        "entries": {
            key: {
                "text": e.text,
                "input_tokens": e.input_tokens,
                "output_tokens": e.output_tokens,
            }
            for key, e in sorted(entries.items())
        },
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n", "utf-8")


def load_session(path: str | Path) -> dict[str, SessionEntry]:
    try:
        doc = json.loads(Path(path).read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SessionFormatError(f"cannot read session {path}: {exc}") from None
    if not isinstance(doc, dict) or doc.get("version") != SESSION_VERSION:
        raise SessionFormatError(f"{path}: unsupported session version {doc.get('version')!r}")
    entries = {}
    for key, record in doc.get("entries", {}).items():
        try:
            entries[key] = SessionEntry(
                text=record["text"],
                input_tokens=int(record["input_tokens"]),
                output_tokens=int(record["output_tokens"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SessionFormatError(f"{path}: bad session entry {key}: {exc}") from None
    return entries


# ---------------------------------------------------------------------------
# Gateway


@dataclass
class LedgerEntry:
    tag: str
    usage: TokenUsage


class Gateway:
    """Mediates requests, retries transport failures, and keeps the ledger."""

    def __init__(
        self,
        backend,
        prices: dict[str, tuple[float, float]] | None = None,
        max_retries: int = 3,
        backoff: float = 0.5,
        sink=None,
    ) -> None:
        self.backend = backend
        self.prices = prices or {}
        self.max_retries = max_retries
        self.backoff = backoff
        self.sink = sink
        self._lock = threading.Lock()
        self._ledger: list[LedgerEntry] = []
        self._warned_unpriced = False

    @property
    def max_context_tokens(self) -> int:
        return self.backend.max_context_tokens

    def _cost(self, input_tokens: int, output_tokens: int) -> float:
        model = getattr(self.backend, "model", "unknown")
        if model not in self.prices:
            if not self._warned_unpriced and self.sink is not None:
                self.sink.warn("gateway", f"no price table for model {model!r}; cost reported as 0")
                self._warned_unpriced = True
            return 0.0
        price_in, price_out = self.prices[model]
        return input_tokens * price_in / 1000.0 + output_tokens * price_out / 1000.0

    def complete(self, req: ChatRequest) -> ChatResponse:
        attempt = 0
        while True:
            try:
                entry = self.backend.complete(req)
                break
            except TransportError:
                attempt += 1
                if attempt >= self.max_retries:
                    raise
                time.sleep(self.backoff * (2 ** (attempt - 1)))
        usage = TokenUsage(
            entry.input_tokens, entry.output_tokens, self._cost(entry.input_tokens, entry.output_tokens)
        )
        with self._lock:
            self._ledger.append(LedgerEntry(req.tag, usage))
        return ChatResponse(entry.text, usage, self.backend.backend_id)

    # -- accounting --------------------------------------------------------

    def ledger(self) -> list[LedgerEntry]:
        with self._lock:
            return list(self._ledger)

    def report_usage(self) -> tuple[dict[str, TokenUsage], TokenUsage]:
        """(per-tag totals, grand total)."""
        per_tag: dict[str, TokenUsage] = {}
        total = TokenUsage()
        for entry in self.ledger():
            per_tag[entry.tag] = per_tag.get(entry.tag, TokenUsage()) + entry.usage
            total = total + entry.usage
        return per_tag, total

    def reset_usage(self) -> None:
        with self._lock:
            self._ledger.clear()

    def request_count(self, tag: str | None = None) -> int:
        return sum(1 for e in self.ledger() if tag is None or e.tag == tag)
