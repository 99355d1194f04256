"""Chat-completions gateway with record/replay cassettes.

Every request has a deterministic fingerprint (a hash over all fields except
the informational tag).  Record mode plays live and appends fingerprinted
responses to a JSONL cassette; replay mode answers purely from the cassette,
raising ReplayMiss on unknown fingerprints.  Replays are byte-deterministic,
which is what makes the downstream pipeline reproducible offline.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable

from ciforge.errors import (
    AuthMissing,
    ConfigError,
    GatewayError,
    MalformedRemoteResponse,
    RateLimited,
    ReplayMiss,
)

log = logging.getLogger(__name__)

API_BASE_ENV = "CI_FORGE_API_BASE"
API_KEY_ENV = "CI_FORGE_API_KEY"

DEFAULT_GENERATION_TEMPERATURE = 1.0
DEFAULT_CLASSIFICATION_TEMPERATURE = 0.0
DEFAULT_MAX_PARALLEL = 4
DEFAULT_MAX_RETRIES = 3
BACKOFF_BASE_SECONDS = 1.0
BACKOFF_CAP_SECONDS = 30.0


class GatewayMode(str, Enum):
    LIVE = "live"
    RECORD = "record"
    REPLAY = "replay"


@dataclass(frozen=True)
class ChatRequest:
    user_prompt: str
    system_prompt: str | None = None
    temperature: float = DEFAULT_GENERATION_TEMPERATURE
    n_samples: int = 1
    max_tokens: int = 1024
    tag: str = ""

    def __post_init__(self):
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")
        if self.max_tokens < 1:
            raise ConfigError("max_tokens must be >= 1")

    def fingerprint(self) -> str:
        """Stable across runs and platforms; the tag never participates."""
        material = json.dumps(
            {
                "user_prompt": self.user_prompt,
                "system_prompt": self.system_prompt,
                "temperature": float(self.temperature),
                "n_samples": self.n_samples,
                "max_tokens": self.max_tokens,
            },
            sort_keys=True,
            ensure_ascii=False,
        )
        return hashlib.sha256(material.encode("utf-8")).hexdigest()

    def to_json_obj(self) -> dict:
        return {
            "user_prompt": self.user_prompt,
            "system_prompt": self.system_prompt,
            "temperature": self.temperature,
            "n_samples": self.n_samples,
            "max_tokens": self.max_tokens,
            "tag": self.tag,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> ChatRequest:
        return cls(
            user_prompt=obj["user_prompt"],
            system_prompt=obj.get("system_prompt"),
            temperature=obj.get("temperature", DEFAULT_GENERATION_TEMPERATURE),
            n_samples=obj.get("n_samples", 1),
            max_tokens=obj.get("max_tokens", 1024),
            tag=obj.get("tag", ""),
        )


@dataclass(frozen=True)
class ChatResponse:
    texts: tuple[str, ...]
    model_name: str = ""
    token_usage: tuple[int, int] = (0, 0)

    def to_json_obj(self) -> dict:
        return {
            "texts": list(self.texts),
            "model_name": self.model_name,
            "token_usage": list(self.token_usage),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> ChatResponse:
        usage = obj.get("token_usage", [0, 0])
        return cls(
            texts=tuple(obj["texts"]),
            model_name=obj.get("model_name", ""),
            token_usage=(int(usage[0]), int(usage[1])),
        )


class Cassette:
    """Append-only fingerprint-to-response store backed by a JSONL file.

    The file keeps every append; on load, the latest entry for a fingerprint
    wins, so re-recording a request supersedes older responses without
    rewriting history.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._entries: dict[str, ChatResponse] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        with open(self.path, encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                obj = json.loads(line)
                self._entries[obj["fingerprint"]] = ChatResponse.from_json_obj(
                    obj["response"]
                )

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, fingerprint: str) -> bool:
        return fingerprint in self._entries

    def lookup(self, fingerprint: str) -> ChatResponse | None:
        return self._entries.get(fingerprint)

    def record(self, request: ChatRequest, response: ChatResponse) -> None:
        fingerprint = request.fingerprint()
        with self._lock:
            self._entries[fingerprint] = response
            if self.path is not None:
                entry = {
                    "fingerprint": fingerprint,
                    "request": request.to_json_obj(),
                    "response": response.to_json_obj(),
                }
                with open(self.path, "a", encoding="utf-8") as handle:
                    handle.write(json.dumps(entry, ensure_ascii=False) + "\n")


Transport = Callable[[str, dict, dict], tuple[int, dict]]


def _http_transport(url: str, headers: dict, payload: dict) -> tuple[int, dict]:
    import requests

    try:
        response = requests.post(url, headers=headers, json=payload, timeout=120)
    except requests.RequestException as exc:
        raise GatewayError(f"transport failure: {exc}") from exc
    try:
        body = response.json()
    except ValueError:
        body = {}
    return response.status_code, body


class Gateway:
    """Entry point for all model calls.

    Live and record modes need an endpoint and API key (arguments or the
    CI_FORGE_API_BASE / CI_FORGE_API_KEY environment variables); replay mode
    needs a cassette.  Transient failures (HTTP 429/5xx, transport errors)
    retry with exponential backoff before giving up.
    """

    def __init__(
        self,
        mode: GatewayMode | str,
        *,
        endpoint: str | None = None,
        api_key: str | None = None,
        model: str = "",
        cassette: Cassette | None = None,
        transport: Transport | None = None,
        max_retries: int = DEFAULT_MAX_RETRIES,
        backoff_base: float = BACKOFF_BASE_SECONDS,
        backoff_cap: float = BACKOFF_CAP_SECONDS,
        max_parallel: int = DEFAULT_MAX_PARALLEL,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.mode = GatewayMode(mode)
        self.endpoint = endpoint or os.environ.get(API_BASE_ENV)
        self.api_key = api_key or os.environ.get(API_KEY_ENV)
        self.model = model
        self.cassette = cassette
        self.transport = transport or _http_transport
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.backoff_cap = backoff_cap
        self.max_parallel = max_parallel
        self._sleep = sleep
        if self.mode is GatewayMode.REPLAY and self.cassette is None:
            raise ConfigError("replay mode needs a cassette")
        if self.mode is GatewayMode.RECORD and self.cassette is None:
            raise ConfigError("record mode needs a cassette")

    def complete(self, request: ChatRequest) -> ChatResponse:
        if self.mode is GatewayMode.REPLAY:
            return self._replay(request)
        response = self._live(request)
        if self.mode is GatewayMode.RECORD:
            self.cassette.record(request, response)
        return response

    def map(self, requests: list[ChatRequest]) -> list[ChatResponse]:
        """Bounded-parallel completion; results keep the input order."""
        if self.mode is GatewayMode.REPLAY or self.max_parallel <= 1:
            return [self.complete(r) for r in requests]
        with ThreadPoolExecutor(max_workers=self.max_parallel) as pool:
            return list(pool.map(self.complete, requests))

    def _replay(self, request: ChatRequest) -> ChatResponse:
        response = self.cassette.lookup(request.fingerprint())
        if response is None:
            raise ReplayMiss(
                f"no cassette entry for fingerprint {request.fingerprint()[:12]}... "
                f"(tag={request.tag!r})"
            )
        if len(response.texts) < request.n_samples:
            log.warning(
                "cassette entry for tag=%r has %d of %d samples",
                request.tag,
                len(response.texts),
                request.n_samples,
            )
        return response

    def _live(self, request: ChatRequest) -> ChatResponse:
        if not self.endpoint or not self.api_key:
            raise AuthMissing(
                f"live call needs {API_BASE_ENV} and {API_KEY_ENV} (tag={request.tag!r})"
            )
        url = self.endpoint.rstrip("/") + "/chat/completions"
        headers = {"Authorization": f"Bearer {self.api_key}"}
        messages = []
        if request.system_prompt:
            messages.append({"role": "system", "content": request.system_prompt})
        messages.append({"role": "user", "content": request.user_prompt})
        payload = {
            "model": self.model,
            "messages": messages,
            "n": request.n_samples,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }

        last_status = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                delay = min(self.backoff_base * 2 ** (attempt - 1), self.backoff_cap)
                self._sleep(delay)
            try:
                status, body = self.transport(url, headers, payload)
            except GatewayError:
                if attempt == self.max_retries:
                    raise
                continue
            last_status = status
            if status == 429 or 500 <= status < 600:
                continue
            if status != 200:
                raise GatewayError(f"remote returned HTTP {status}")
            return self._parse_body(body)
        if last_status == 429:
            raise RateLimited(f"rate limited after {self.max_retries} retries")
        raise GatewayError(
            f"remote kept failing (last HTTP {last_status}) "
            f"after {self.max_retries} retries"
        )

    def _parse_body(self, body: dict) -> ChatResponse:
        try:
            texts = tuple(
                choice["message"]["content"] for choice in body["choices"]
            )
            usage = body.get("usage", {})
            return ChatResponse(
                texts=texts,
                model_name=body.get("model", self.model),
                token_usage=(
                    int(usage.get("prompt_tokens", 0)),
                    int(usage.get("completion_tokens", 0)),
                ),
            )
        except (KeyError, TypeError) as exc:
            raise MalformedRemoteResponse(
                f"chat-completions payload missing {exc}"
            ) from exc


def complete(
    request: ChatRequest, mode: GatewayMode | str, **gateway_args
) -> ChatResponse:
    """One-shot convenience wrapper around Gateway."""
    return Gateway(mode, **gateway_args).complete(request)
