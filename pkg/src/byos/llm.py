"""Completion clients: live endpoint, cassette recording, and replay.

Every client exposes ``complete(prompt, temperature=..., max_tokens=...)``
and owns a UsageLedger.  Replay answers from a cassette keyed by the
SHA-256 of the prompt bytes, which makes any pipeline built on it fully
deterministic.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

from .errors import ClientError

DEFAULT_TEMPERATURE = 0.0
DEFAULT_MAX_TOKENS = 1024


@dataclass(frozen=True)
class CompletionResult:
    text: str
    prompt_tokens: int
    completion_tokens: int


@dataclass
class UsageLedger:
    api_calls: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0
    wall_time: float = 0.0

    def lines(self) -> list[str]:
        return [
            f"api_calls: {self.api_calls}",
            f"prompt_tokens: {self.prompt_tokens}",
            f"completion_tokens: {self.completion_tokens}",
        ]


def record_usage(ledger: UsageLedger, result: CompletionResult,
                 elapsed: float = 0.0) -> UsageLedger:
    """Fold one call's reported usage into the ledger (counters only grow)."""
    ledger.api_calls += 1
    ledger.prompt_tokens += result.prompt_tokens
    ledger.completion_tokens += result.completion_tokens
    ledger.wall_time += elapsed
    return ledger


class CompletionClient(Protocol):
    ledger: UsageLedger

    def complete(self, prompt: str, *, temperature: float = DEFAULT_TEMPERATURE,
                 max_tokens: int = DEFAULT_MAX_TOKENS) -> CompletionResult: ...


def prompt_key(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class Cassette:
    """Append-only prompt/response store backing record and replay modes."""

    def __init__(self, path: str):
        self.path = path
        self.entries: dict[str, dict] = {}
        if os.path.exists(path):
            self._load()

    def _load(self) -> None:
        with open(self.path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    entry = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ClientError(
                        f"cassette {self.path}:{lineno}: bad entry: {exc.msg}"
                    ) from exc
                self.entries[entry["key"]] = entry

    def lookup(self, prompt: str) -> dict | None:
        return self.entries.get(prompt_key(prompt))

    def append(self, prompt: str, result: CompletionResult) -> None:
        entry = {
            "key": prompt_key(prompt),
            "prompt": prompt,
            "response": result.text,
            "prompt_tokens": result.prompt_tokens,
            "completion_tokens": result.completion_tokens,
        }
        self.entries[entry["key"]] = entry
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")

    def total_usage(self) -> tuple[int, int]:
        prompt_total = sum(e["prompt_tokens"] for e in self.entries.values())
        completion_total = sum(e["completion_tokens"] for e in self.entries.values())
        return prompt_total, completion_total


class ReplayClient:
    """Answers exclusively from a cassette; any miss is a ClientError."""

    def __init__(self, cassette: Cassette | str):
        self.cassette = cassette if isinstance(cassette, Cassette) else Cassette(cassette)
        self.ledger = UsageLedger()

    def complete(self, prompt: str, *, temperature: float = DEFAULT_TEMPERATURE,
                 max_tokens: int = DEFAULT_MAX_TOKENS) -> CompletionResult:
        entry = self.cassette.lookup(prompt)
        if entry is None:
            raise ClientError(
                f"cassette miss for prompt {prompt_key(prompt)[:12]}… "
                f"({len(prompt)} bytes); re-record the cassette")
        result = CompletionResult(entry["response"], entry["prompt_tokens"],
                                  entry["completion_tokens"])
        record_usage(self.ledger, result)
        return result


class RecordingClient:
    """Delegates to an inner client and appends every exchange to a cassette."""

    def __init__(self, inner: CompletionClient, cassette: Cassette | str):
        self.inner = inner
        self.cassette = cassette if isinstance(cassette, Cassette) else Cassette(cassette)
        self.ledger = UsageLedger()

    def complete(self, prompt: str, *, temperature: float = DEFAULT_TEMPERATURE,
                 max_tokens: int = DEFAULT_MAX_TOKENS) -> CompletionResult:
        start = time.perf_counter()
        result = self.inner.complete(prompt, temperature=temperature,
                                     max_tokens=max_tokens)
        self.cassette.append(prompt, result)
        record_usage(self.ledger, result, time.perf_counter() - start)
        return result


class LiveClient:
    """OpenAI-compatible chat-completion endpoint over HTTPS.

    Base URL comes from BYOS_API_BASE (or the constructor), the bearer
    token from BYOS_API_KEY only.  Three attempts with exponential backoff
    starting at one second, then ClientError.
    """

    RETRIES = 3
    BACKOFF_START = 1.0

    def __init__(self, model: str, base_url: str | None = None,
                 max_inflight: int = 4, timeout: float = 120.0,
                 sleep: Callable[[float], None] = time.sleep):
        self.model = model
        self.base_url = (base_url or os.environ.get("BYOS_API_BASE", "")).rstrip("/")
        if not self.base_url:
            raise ClientError("no completion endpoint configured (BYOS_API_BASE)")
        self.timeout = timeout
        self.ledger = UsageLedger()
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max_inflight)

    def _post(self, payload: dict) -> dict:
        import requests

        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get("BYOS_API_KEY")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        response = requests.post(f"{self.base_url}/chat/completions",
                                 json=payload, headers=headers,
                                 timeout=self.timeout)
        response.raise_for_status()
        return response.json()

    def complete(self, prompt: str, *, temperature: float = DEFAULT_TEMPERATURE,
                 max_tokens: int = DEFAULT_MAX_TOKENS) -> CompletionResult:
        import requests

        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
            "max_tokens": max_tokens,
        }
        delay = self.BACKOFF_START
        last_error: Exception | None = None
        for attempt in range(self.RETRIES):
            if attempt:
                self._sleep(delay)
                delay *= 2
            try:
                with self._slots:
                    start = time.perf_counter()
                    doc = self._post(payload)
                    elapsed = time.perf_counter() - start
                text = doc["choices"][0]["message"]["content"]
                usage = doc.get("usage", {})
                result = CompletionResult(
                    text=text,
                    prompt_tokens=int(usage.get("prompt_tokens", 0)),
                    completion_tokens=int(usage.get("completion_tokens", 0)),
                )
                record_usage(self.ledger, result, elapsed)
                return result
            except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
                last_error = exc
        raise ClientError(f"completion endpoint failed after "
                          f"{self.RETRIES} attempts: {last_error}") from last_error
