"""One chat-completion contract for every agent role.

Backends implement ``complete(turns, params) -> str``. ``RemoteBackend`` speaks the
standard chat-completions wire protocol over HTTP; ``ScriptedBackend`` replays a
fixed list of replies and fails loudly when the prompt does not match the script.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Literal, Optional, Protocol, Sequence

import httpx

logger = logging.getLogger(__name__)

Role = Literal["system", "user", "assistant"]
_ROLES = ("system", "user", "assistant")

DEFAULT_TIMEOUT_S = 120.0


@dataclass(frozen=True)
class ChatTurn:
    role: Role
    content: str

    def __post_init__(self) -> None:
        if self.role not in _ROLES:
            raise ValueError(f"invalid chat role {self.role!r}")
        if not self.content and self.role != "assistant":
            raise ValueError(f"{self.role} turn has empty content")


@dataclass(frozen=True)
class GenerationParams:
    temperature: float = 0.7
    top_p: float = 0.9
    max_new_tokens: int = 1024
    stop_sequences: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be positive")


class GatewayError(RuntimeError):
    def __init__(self, backend: str, message: str, retryable: bool = True):
        super().__init__(f"[{backend}] {message}")
        self.backend = backend
        self.retryable = retryable


class ScriptError(AssertionError):
    """Scripted backend misuse: exhausted script or prompt/script mismatch."""


class Backend(Protocol):
    name: str

    def complete(self, turns: Sequence[ChatTurn], params: GenerationParams) -> str: ...


def _check_turns(turns: Sequence[ChatTurn]) -> None:
    if not turns:
        raise ValueError("at least one chat turn is required")
    if turns[-1].role == "assistant":
        raise ValueError("last turn must be a user or system turn")


def chat_endpoint(url: str) -> str:
    url = url.rstrip("/")
    return url if url.endswith("/chat/completions") else url + "/chat/completions"


class RemoteBackend:
    def __init__(
        self,
        url: str,
        model: str,
        api_key: Optional[str] = None,
        timeout: float = DEFAULT_TIMEOUT_S,
        client: Optional[httpx.Client] = None,
    ):
        self.url = chat_endpoint(url)
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self.name = f"remote:{model}@{self.url}"
        self._client = client or httpx.Client(timeout=timeout)

    @classmethod
    def from_env(cls, **overrides: Any) -> "RemoteBackend":
        url = overrides.pop("url", None) or os.environ.get("GC_LLM_URL")
        model = overrides.pop("model", None) or os.environ.get("GC_LLM_MODEL")
        key = overrides.pop("api_key", None) or os.environ.get("GC_LLM_KEY")
        if not url or not model:
            raise ValueError("remote backend needs a URL and model (GC_LLM_URL, GC_LLM_MODEL)")
        return cls(url, model, key, **overrides)

    def request_body(self, turns: Sequence[ChatTurn], params: GenerationParams) -> dict[str, Any]:
        body: dict[str, Any] = {
            "model": self.model,
            "messages": [{"role": t.role, "content": t.content} for t in turns],
            "temperature": params.temperature,
            "top_p": params.top_p,
            "max_tokens": params.max_new_tokens,
        }
        if params.stop_sequences:
            body["stop"] = list(params.stop_sequences)
        return body

    def complete(self, turns: Sequence[ChatTurn], params: GenerationParams) -> str:
        _check_turns(turns)
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = self._client.post(
                self.url, json=self.request_body(turns, params), headers=headers, timeout=self.timeout
            )
        except httpx.HTTPError as exc:
            raise GatewayError(self.name, f"transport failure: {exc!r}") from exc
        if resp.status_code != 200:
            # client errors other than rate limiting will not fix themselves
            retryable = resp.status_code == 429 or resp.status_code >= 500
            raise GatewayError(self.name, f"HTTP {resp.status_code}: {resp.text[:300]}", retryable)
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise GatewayError(self.name, f"malformed response body: {resp.text[:300]}") from exc
        return content or ""

    def close(self) -> None:
        self._client.close()


@dataclass(frozen=True)
class ScriptEntry:
    reply: str
    match: Optional[str] = None  # None matches any prompt


def load_script(path: str | Path) -> list[ScriptEntry]:
    """Read a script file: a JSON list of ``{"match", "reply"}`` or an object with a ``script`` key."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(doc, dict):
        doc = doc["script"]
    return [ScriptEntry(reply=e["reply"], match=e.get("match")) for e in doc]


class ScriptedBackend:
    """Deterministic replay backend; each call consumes exactly one script entry."""

    def __init__(self, script: Iterable[ScriptEntry | tuple[Optional[str], str]], name: str = "scripted"):
        self.script = [e if isinstance(e, ScriptEntry) else ScriptEntry(match=e[0], reply=e[1]) for e in script]
        self.cursor = 0
        self.name = name
        self.calls: list[list[ChatTurn]] = []
        self._lock = threading.Lock()

    @property
    def exhausted(self) -> bool:
        return self.cursor >= len(self.script)

    def complete(self, turns: Sequence[ChatTurn], params: GenerationParams) -> str:
        _check_turns(turns)
        if not self._lock.acquire(blocking=False):
            raise ScriptError(f"{self.name}: concurrent use of a scripted backend")
        try:
            if self.exhausted:
                raise ScriptError(f"{self.name}: script exhausted after {len(self.script)} replies")
            entry = self.script[self.cursor]
            prompt = next((t.content for t in reversed(turns) if t.role == "user"), turns[-1].content)
            if entry.match is not None and entry.match not in prompt:
                tail = prompt[-200:].replace("\n", "\\n")
                raise ScriptError(
                    f"{self.name}: entry {self.cursor} expects {entry.match!r} in the prompt; prompt ends with ...{tail}"
                )
            self.cursor += 1
            self.calls.append(list(turns))
            return entry.reply
        finally:
            self._lock.release()


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    backoff: tuple[float, ...] = (1.0, 2.0, 4.0)

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")

    def delay(self, attempt: int) -> float:
        """Delay after failed attempt number ``attempt`` (1-based)."""
        if not self.backoff:
            return 0.0
        return self.backoff[min(attempt - 1, len(self.backoff) - 1)]


@dataclass
class RetryingBackend:
    inner: Backend
    policy: RetryPolicy
    sleep: Callable[[float], None] = field(default=time.sleep, repr=False)

    @property
    def name(self) -> str:
        return self.inner.name

    def complete(self, turns: Sequence[ChatTurn], params: GenerationParams) -> str:
        for attempt in range(1, self.policy.max_attempts + 1):
            try:
                return self.inner.complete(turns, params)
            except GatewayError as exc:
                if not exc.retryable or attempt == self.policy.max_attempts:
                    raise
                delay = self.policy.delay(attempt)
                logger.warning("attempt %d/%d failed (%s); retrying in %.2fs",
                               attempt, self.policy.max_attempts, exc, delay)
                self.sleep(delay)
        raise AssertionError("unreachable")


def with_retry(backend: Backend, policy: RetryPolicy, sleep: Callable[[float], None] = time.sleep) -> Backend:
    return RetryingBackend(backend, policy, sleep)


def complete(backend: Backend, turns: Sequence[ChatTurn], params: GenerationParams) -> str:
    return backend.complete(turns, params)
