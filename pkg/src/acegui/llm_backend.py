"""Text-completion backends.

Every backend exposes ``complete(prompt) -> str``, a ``name`` and a
``deterministic`` flag. Two implementations ship here:

* :class:`ScriptedBackend` answers from an ordered list of rules and is
  used by the tests and the bundled fixtures.
* :class:`HttpBackend` talks to an OpenAI-compatible chat-completions
  endpoint. Credentials come from ``ACE_API_KEY`` only.

Each call is appended to the backend's ``calls`` log with a call index
that increases by one per call, even under concurrent use.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Protocol, Sequence, runtime_checkable

import httpx

__all__ = [
    "Backend",
    "BackendError",
    "CallRecord",
    "HttpBackend",
    "HttpConfig",
    "HttpStatus",
    "NoRuleError",
    "RetryExhausted",
    "ScriptRule",
    "ScriptedBackend",
    "Timeout",
    "prompt_hash",
    "scripted",
    "http",
]

RULE_KINDS = ("exact", "substring", "regex")


class BackendError(RuntimeError):
    pass


class NoRuleError(BackendError):
    def __init__(self, prompt: str, reason: str = "no rule matches"):
        head = prompt[:120].replace("\n", "\\n")
        super().__init__(f"{reason}: {head!r}")
        self.prompt = prompt


class Timeout(BackendError):
    pass


class HttpStatus(BackendError):
    def __init__(self, code: int, body: str = ""):
        super().__init__(f"HTTP {code}: {body[:200]}")
        self.code = code
        self.body = body


class RetryExhausted(BackendError):
    def __init__(self, attempts: int, last: Exception | None):
        super().__init__(f"gave up after {attempts} attempts: {last}")
        self.attempts = attempts
        self.last = last


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CallRecord:
    index: int
    backend: str
    prompt: str
    reply: str | None
    error: str | None = None


@runtime_checkable
class Backend(Protocol):
    name: str
    deterministic: bool

    def complete(self, prompt: str) -> str: ...


# Hooks notified after every call of every backend (used by the test suite
# to check that deterministic backends never answer one prompt two ways).
_OBSERVERS: list[Callable[[Any, CallRecord], None]] = []


def add_observer(fn: Callable[[Any, CallRecord], None]) -> None:
    _OBSERVERS.append(fn)


def remove_observer(fn: Callable[[Any, CallRecord], None]) -> None:
    if fn in _OBSERVERS:
        _OBSERVERS.remove(fn)


class _CallLog:
    """Shared logging for both backends."""

    name: str = "backend"

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.calls: list[CallRecord] = []

    def _record(self, prompt: str, reply: str | None, error: str | None) -> CallRecord:
        with self._lock:
            rec = CallRecord(len(self.calls), self.name, prompt, reply, error)
            self.calls.append(rec)
        for fn in list(_OBSERVERS):
            fn(self, rec)
        return rec

    def complete(self, prompt: str) -> str:
        try:
            reply = self._complete(prompt)
        except BackendError as exc:
            self._record(prompt, None, str(exc))
            raise
        self._record(prompt, reply, None)
        return reply

    def _complete(self, prompt: str) -> str:  # pragma: no cover - abstract
        raise NotImplementedError


# ---- scripted ----


@dataclass
class ScriptRule:
    kind: str
    pattern: str
    reply: str
    max_uses: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in RULE_KINDS:
            raise ValueError(f"unknown rule kind {self.kind!r}")
        if self.max_uses is not None and self.max_uses < 0:
            raise ValueError("max_uses must be non-negative")
        self._regex = re.compile(self.pattern, re.DOTALL) if self.kind == "regex" else None

    def matches(self, prompt: str, digest: str) -> bool:
        if self.kind == "exact":
            return self.pattern == digest
        if self.kind == "substring":
            return self.pattern in prompt
        return self._regex.search(prompt) is not None

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "pattern": self.pattern, "reply": self.reply}
        if self.max_uses is not None:
            d["max_uses"] = self.max_uses
        return d

    @classmethod
    def from_dict(cls, d) -> "ScriptRule":
        return cls(d["kind"], d["pattern"], d["reply"], d.get("max_uses"))

    @classmethod
    def exact(cls, prompt: str, reply: str, max_uses: int | None = None) -> "ScriptRule":
        return cls("exact", prompt_hash(prompt), reply, max_uses)


class ScriptedBackend(_CallLog):
    """Replies from the first matching rule; an unmatched prompt is an error.

    A rule whose ``max_uses`` is spent no longer matches, so later rules
    with the same pattern take over.
    """

    deterministic = True

    def __init__(self, rules: Iterable[ScriptRule], name: str = "scripted"):
        super().__init__()
        self.rules = list(rules)
        self.name = name
        self._uses = [0] * len(self.rules)
        # Usage counters make replies depend on call order, so a backend
        # with any capped rule is only deterministic per episode.
        self.deterministic = all(r.max_uses is None for r in self.rules)

    def _complete(self, prompt: str) -> str:
        digest = prompt_hash(prompt)
        exhausted = False
        with self._lock:
            for i, rule in enumerate(self.rules):
                if not rule.matches(prompt, digest):
                    continue
                if rule.max_uses is not None and self._uses[i] >= rule.max_uses:
                    exhausted = True
                    continue
                self._uses[i] += 1
                return rule.reply
        raise NoRuleError(prompt, "all matching rules exhausted" if exhausted else "no rule matches")

    @classmethod
    def from_rules_file(cls, path: str | Path) -> "ScriptedBackend":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        rules = data["rules"] if isinstance(data, dict) else data
        return cls([ScriptRule.from_dict(r) for r in rules], name=f"scripted:{Path(path).name}")


def scripted(rules: Sequence[ScriptRule]) -> ScriptedBackend:
    return ScriptedBackend(rules)


# ---- http ----


@dataclass
class HttpConfig:
    endpoint: str = ""
    model: str = "gpt-4-0613"
    temperature: float = 0.0
    timeout: float = 60.0
    max_retries: int = 3
    backoff: float = 0.5
    api_key: str | None = field(default=None, repr=False)

    @classmethod
    def from_env(cls, **overrides) -> "HttpConfig":
        cfg = cls(endpoint=os.environ.get("ACE_API_BASE", "https://api.openai.com/v1"),
                  api_key=os.environ.get("ACE_API_KEY"))
        for k, v in overrides.items():
            setattr(cfg, k, v)
        return cfg


_TRANSIENT = (httpx.ConnectError, httpx.ReadError, httpx.WriteError, httpx.RemoteProtocolError,
              httpx.TimeoutException)


class HttpBackend(_CallLog):
    """Single-turn chat completion over HTTP.

    Request body::

        {"model": ..., "temperature": ..., "messages": [{"role": "user", "content": prompt}]}

    The reply text is ``choices[0].message.content``. Status 429 and 5xx,
    connection failures and timeouts are retried with exponential backoff
    (``backoff * 2**attempt`` seconds) up to ``max_retries`` extra attempts.
    """

    def __init__(self, config: HttpConfig, transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        super().__init__()
        self.config = config
        self.name = f"http:{config.model}"
        self.deterministic = False
        headers = {"Content-Type": "application/json"}
        if config.api_key:
            headers["Authorization"] = f"Bearer {config.api_key}"
        self._client = httpx.Client(base_url=config.endpoint.rstrip("/"), headers=headers,
                                    timeout=config.timeout, transport=transport)
        self._sleep = sleep

    def close(self) -> None:
        self._client.close()

    def _complete(self, prompt: str) -> str:
        body = {
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [{"role": "user", "content": prompt}],
        }
        last: Exception | None = None
        attempts = self.config.max_retries + 1
        for attempt in range(attempts):
            if attempt:
                self._sleep(self.config.backoff * 2 ** (attempt - 1))
            try:
                resp = self._client.post("/chat/completions", json=body)
            except httpx.TimeoutException as exc:
                last = Timeout(str(exc) or "request timed out")
                continue
            except _TRANSIENT as exc:
                last = exc
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = HttpStatus(resp.status_code, resp.text)
                continue
            if resp.status_code >= 400:
                raise HttpStatus(resp.status_code, resp.text)
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise BackendError(f"unexpected response body: {exc}") from exc
        raise RetryExhausted(attempts, last)


def http(config: HttpConfig) -> HttpBackend:
    return HttpBackend(config)
