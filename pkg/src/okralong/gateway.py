"""Chat-completion gateway: a remote OpenAI-compatible client and a scripted mock.

Both backends return a ChatExchange carrying the response text and token
usage. When a backend reports usage those figures are authoritative;
otherwise counts come from the active tokenizer.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from .errors import (
    GatewayResponseShapeError,
    GatewayRetryExhaustedError,
    GatewayStatusError,
)
from .tokenization import DEFAULT_TOKENIZER_ID, Tokenizer, get_tokenizer

API_KEY_ENV = "OKRA_API_KEY"

_RETRYABLE_STATUSES = {408, 429, 500, 502, 503, 504}


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant
    content: str


@dataclass(frozen=True)
class GenerationParams:
    temperature: float = 0.0
    max_tokens: int = 1024


@dataclass(frozen=True)
class ChatExchange:
    request_messages: tuple[ChatMessage, ...]
    response_text: str
    prompt_tokens: int
    completion_tokens: int
    latency: float
    backend_id: str
    default_used: bool = False


class Gateway(Protocol):
    backend_id: str

    def complete(self, messages: list[ChatMessage], params: GenerationParams | None = None) -> ChatExchange: ...


def count_tokens(text: str, tokenizer: Tokenizer | None = None) -> int:
    tok = tokenizer or get_tokenizer(DEFAULT_TOKENIZER_ID)
    return tok.count(text)


@dataclass
class MockRule:
    """One scripted response: first matching rule wins, in order.

    `once` rules are consumed on first use, letting a single script drive a
    multi-step dialogue where the same prompt shape recurs.
    """

    match: str
    response: str
    prompt_tokens: int | None = None
    completion_tokens: int | None = None
    once: bool = False


class ScriptedGateway:
    """Deterministic mock backend driven by ordered substring-match rules."""

    backend_id = "scripted"

    def __init__(
        self,
        rules: list[MockRule] | None = None,
        default_response: str = "unanswerable",
        tokenizer: Tokenizer | None = None,
    ) -> None:
        self.rules = list(rules or [])
        self.default_response = default_response
        self._tokenizer = tokenizer or get_tokenizer(DEFAULT_TOKENIZER_ID)
        self._consumed: set[int] = set()
        self._lock = threading.Lock()
        self.call_count = 0

    @classmethod
    def from_script_file(cls, path: str | Path, **kwargs) -> "ScriptedGateway":
        rules = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            record = json.loads(line)
            usage = record.get("usage") or {}
            rules.append(
                MockRule(
                    match=record["match"],
                    response=record["response"],
                    prompt_tokens=usage.get("prompt_tokens"),
                    completion_tokens=usage.get("completion_tokens"),
                    once=bool(record.get("once", False)),
                )
            )
        return cls(rules=rules, **kwargs)

    def complete(self, messages: list[ChatMessage], params: GenerationParams | None = None) -> ChatExchange:
        haystack = "\n".join(m.content for m in messages)
        with self._lock:
            self.call_count += 1
            chosen: MockRule | None = None
            for pos, rule in enumerate(self.rules):
                if pos in self._consumed:
                    continue
                if rule.match in haystack:
                    chosen = rule
                    if rule.once:
                        self._consumed.add(pos)
                    break
        default_used = chosen is None
        response = self.default_response if chosen is None else chosen.response
        prompt_tokens = (
            chosen.prompt_tokens
            if chosen is not None and chosen.prompt_tokens is not None
            else self._tokenizer.count(haystack)
        )
        completion_tokens = (
            chosen.completion_tokens
            if chosen is not None and chosen.completion_tokens is not None
            else self._tokenizer.count(response)
        )
        return ChatExchange(
            request_messages=tuple(messages),
            response_text=response,
            prompt_tokens=prompt_tokens,
            completion_tokens=completion_tokens,
            latency=0.0,
            backend_id=self.backend_id,
            default_used=default_used,
        )


class RemoteGateway:
    """OpenAI-compatible chat completions client with bounded retries."""

    backend_id = "remote"

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        timeout: float = 60.0,
        max_retries: int = 2,
        backoff: float = 0.5,
        max_in_flight: int = 4,
        tokenizer: Tokenizer | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self._tokenizer = tokenizer or get_tokenizer(DEFAULT_TOKENIZER_ID)
        self._slots = threading.Semaphore(max_in_flight)

    def complete(self, messages: list[ChatMessage], params: GenerationParams | None = None) -> ChatExchange:
        import httpx

        params = params or GenerationParams()
        body = {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        }
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        started = time.monotonic()
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                with self._slots:
                    response = httpx.post(
                        f"{self.base_url}/chat/completions",
                        json=body,
                        headers=headers,
                        timeout=self.timeout,
                    )
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if response.status_code in _RETRYABLE_STATUSES:
                last_error = GatewayStatusError(response.status_code, response.text[:200])
                continue
            if response.status_code != 200:
                raise GatewayStatusError(response.status_code, response.text[:200])
            return self._parse(messages, response.json(), time.monotonic() - started)
        raise GatewayRetryExhaustedError(f"gave up after {self.max_retries + 1} attempts: {last_error}")

    def _parse(self, messages: list[ChatMessage], payload: dict, latency: float) -> ChatExchange:
        try:
            text = payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise GatewayResponseShapeError(f"unexpected response shape: {exc!r}") from exc
        if not isinstance(text, str):
            raise GatewayResponseShapeError("message content is not a string")
        usage = payload.get("usage") or {}
        prompt_tokens = usage.get("prompt_tokens")
        completion_tokens = usage.get("completion_tokens")
        if prompt_tokens is None:
            prompt_tokens = sum(self._tokenizer.count(m.content) for m in messages)
        if completion_tokens is None:
            completion_tokens = self._tokenizer.count(text)
        return ChatExchange(
            request_messages=tuple(messages),
            response_text=text,
            prompt_tokens=int(prompt_tokens),
            completion_tokens=int(completion_tokens),
            latency=latency,
            backend_id=self.backend_id,
        )
