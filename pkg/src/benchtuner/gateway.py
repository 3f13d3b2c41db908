"""Chat-completions client: one POST shape, retries, record/replay.

Every backend speaks the OpenAI-compatible /v1/chat/completions schema, so
the client is a single request builder plus a retry loop. A JSON-lines
transcript store turns any gateway into a recorder, and replays transcripts
later without touching the network.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .util import canonical_json

MAX_ATTEMPTS = 5
BACKOFF_BASE = 1.0
BACKOFF_FACTOR = 2.0
REQUEST_TIMEOUT = 180.0


class AuthMissing(Exception):
    """Credentials or endpoint missing; raised before any network call."""


class RateLimited(Exception):
    """Still throttled after exhausting retries."""


class TransportError(Exception):
    """Connection failure or non-retryable HTTP status."""


class MalformedResponse(Exception):
    """A 200 response that does not carry a completion."""


class ReplayMiss(Exception):
    """Replay store has no transcript for the request."""


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple
    temperature: float = 0.0
    max_tokens: int = 1024
    extra: dict = field(default_factory=dict)

    def payload(self) -> dict:
        body = {
            "model": self.model,
            "messages": [dict(m) for m in self.messages],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }
        body.update(self.extra)
        return body


@dataclass(frozen=True)
class ChatResponse:
    content: str
    finish_reason: str = "stop"
    usage: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"content": self.content, "finish_reason": self.finish_reason,
                "usage": dict(self.usage)}


def request_hash(request: ChatRequest) -> str:
    """Stable identity of a request: sha256 over its canonical JSON payload."""
    return hashlib.sha256(canonical_json(request.payload()).encode("utf-8")).hexdigest()


def _requests_transport(url: str, headers: dict, payload: dict):
    resp = requests.post(url, headers=headers, json=payload, timeout=REQUEST_TIMEOUT)
    return resp.status_code, resp.text


class HttpGateway:
    """Live client. Reads LLM_API_KEY and LLM_BASE_URL unless given values.

    Retries transport failures, 429s and 5xx responses with exponential
    backoff (base 1s, factor 2, at most 5 attempts). The transport callable
    is injectable so tests can serve canned statuses without sockets.
    """

    def __init__(self, base_url: str | None = None, api_key: str | None = None,
                 transport=None, sleep=time.sleep):
        self.base_url = base_url or os.environ.get("LLM_BASE_URL")
        self.api_key = api_key or os.environ.get("LLM_API_KEY")
        self.transport = transport or _requests_transport
        self.sleep = sleep

    def chat(self, request: ChatRequest) -> ChatResponse:
        if not self.api_key:
            raise AuthMissing("no api key: set LLM_API_KEY or pass api_key")
        if not self.base_url:
            raise AuthMissing("no endpoint: set LLM_BASE_URL or pass base_url")
        url = self.base_url.rstrip("/") + "/v1/chat/completions"
        headers = {"Authorization": f"Bearer {self.api_key}",
                   "Content-Type": "application/json"}
        last_status, last_error = None, None
        for attempt in range(MAX_ATTEMPTS):
            if attempt:
                self.sleep(BACKOFF_BASE * BACKOFF_FACTOR ** (attempt - 1))
            try:
                status, body = self.transport(url, headers, request.payload())
            except requests.RequestException as err:
                last_status, last_error = None, err
                continue
            if status == 200:
                return _parse_body(body)
            if status == 429 or status >= 500:
                last_status, last_error = status, body
                continue
            raise TransportError(f"HTTP {status}: {body[:500]}")
        if last_status == 429:
            raise RateLimited(f"still throttled after {MAX_ATTEMPTS} attempts")
        raise TransportError(f"gave up after {MAX_ATTEMPTS} attempts: {last_error}")


def _parse_body(body: str) -> ChatResponse:
    try:
        data = json.loads(body)
        choice = data["choices"][0]
        content = choice["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as err:
        raise MalformedResponse(f"cannot read completion: {err}") from None
    if not isinstance(content, str):
        raise MalformedResponse("completion content is not text")
    return ChatResponse(content=content,
                        finish_reason=choice.get("finish_reason", "stop"),
                        usage=data.get("usage", {}))


class TranscriptStore:
    """JSON-lines store of {request_hash, request, response} records.

    Safe for concurrent use; later records for the same hash win, so
    re-recording a session updates it in place.
    """

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._records: dict[str, dict] = {}
        if self.path.exists():
            with self.path.open("r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    record = json.loads(line)
                    self._records[record["request_hash"]] = record["response"]

    def get(self, key: str) -> dict | None:
        with self._lock:
            return self._records.get(key)

    def put(self, key: str, request_payload: dict, response: dict) -> None:
        record = {"request_hash": key, "request": request_payload,
                  "response": response}
        with self._lock:
            self._records[key] = response
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)


class RecordingGateway:
    """Wraps a live gateway and persists every exchange."""

    def __init__(self, inner, store: TranscriptStore):
        self.inner = inner
        self.store = store

    def chat(self, request: ChatRequest) -> ChatResponse:
        response = self.inner.chat(request)
        self.store.put(request_hash(request), request.payload(), response.to_dict())
        return response


class ReplayGateway:
    """Serves recorded responses only; never touches the network."""

    def __init__(self, store: TranscriptStore):
        self.store = store

    def chat(self, request: ChatRequest) -> ChatResponse:
        record = self.store.get(request_hash(request))
        if record is None:
            raise ReplayMiss(f"no transcript for request {request_hash(request)[:12]}")
        return ChatResponse(content=record["content"],
                            finish_reason=record.get("finish_reason", "stop"),
                            usage=record.get("usage", {}))


def make_gateway(mode: str, store_path=None, base_url=None, api_key=None):
    """Build a gateway for one of the modes live | record | replay."""
    if mode == "live":
        return HttpGateway(base_url=base_url, api_key=api_key)
    if store_path is None:
        raise ValueError(f"{mode} mode needs a transcript store path")
    if mode == "record":
        return RecordingGateway(HttpGateway(base_url=base_url, api_key=api_key),
                                TranscriptStore(store_path))
    if mode == "replay":
        if not Path(store_path).exists():
            raise ReplayMiss(f"transcript store not found: {store_path}")
        return ReplayGateway(TranscriptStore(store_path))
    raise ValueError(f"unknown gateway mode {mode!r}")
