"""Chat providers: a live chat-completions client, fixture replay/record, and scripted stand-ins."""
from __future__ import annotations

import hashlib
import json
import math
import os
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, NamedTuple, Protocol, Sequence

import httpx

ROLES = ("system", "user", "assistant")


class ProviderError(RuntimeError):
    def __init__(self, message: str, stage: str = ""):
        super().__init__(f"[{stage}] {message}" if stage else message)
        self.detail = message
        self.stage = stage


class Completion(NamedTuple):
    text: str
    prompt_tokens: int
    completion_tokens: int


Message = Mapping[str, str]


class ChatProvider(Protocol):
    def complete(self, messages: Sequence[Message]) -> Completion: ...


def normalize_ws(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()


def prompt_digest(messages: Sequence[Message]) -> str:
    """Stable fixture key: hash of ``role:text`` lines with whitespace collapsed."""
    blob = "\n".join(f"{m['role']}:{normalize_ws(m['content'])}" for m in messages)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def approx_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


@dataclass(frozen=True)
class ChatProviderConfig:
    endpoint: str = "https://api.openai.com/v1"
    model: str = "chatgpt-4o-latest"
    temperature: float = 0.0
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 120.0

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")


class ChatCompletionsProvider:
    """Client for the JSON-over-HTTP chat-completions shape."""

    def __init__(self, config: ChatProviderConfig, client: httpx.Client | None = None):
        self.config = config
        self._client = client

    def _key(self) -> str:
        key = os.environ.get(self.config.api_key_env)
        if not key:
            raise ProviderError(f"environment variable {self.config.api_key_env} is not set")
        return key

    def complete(self, messages: Sequence[Message]) -> Completion:
        payload = {
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [{"role": m["role"], "content": m["content"]} for m in messages],
        }
        headers = {"Authorization": f"Bearer {self._key()}"}
        url = self.config.endpoint.rstrip("/") + "/chat/completions"
        client = self._client or httpx.Client(timeout=self.config.timeout)
        try:
            resp = client.post(url, json=payload, headers=headers)
            resp.raise_for_status()
            data = resp.json()
            text = data["choices"][0]["message"]["content"]
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
            raise ProviderError(f"chat completion failed: {exc}") from exc
        finally:
            if self._client is None:
                client.close()
        usage = data.get("usage") or {}
        prompt_tokens = usage.get("prompt_tokens")
        completion_tokens = usage.get("completion_tokens")
        if prompt_tokens is None:
            prompt_tokens = sum(approx_tokens(m["content"]) for m in messages)
        if completion_tokens is None:
            completion_tokens = approx_tokens(text)
        return Completion(text, int(prompt_tokens), int(completion_tokens))


# -- fixtures --------------------------------------------------------------------

def load_fixtures(path: str | Path) -> dict[str, dict]:
    """Load a fixture file, or merge every ``*.json`` file of a directory."""
    path = Path(path)
    files = sorted(path.glob("*.json")) if path.is_dir() else [path]
    out: dict[str, dict] = {}
    for f in files:
        for digest, entry in json.loads(f.read_text()).items():
            if digest in out and out[digest] != entry:
                raise ValueError(f"conflicting fixture for digest {digest[:12]} in {f}")
            out[digest] = entry
    return out


def save_fixtures(path: str | Path, fixtures: Mapping[str, dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(dict(sorted(fixtures.items())), indent=1, ensure_ascii=False) + "\n")


class ReplayProvider:
    """Answers from recorded fixtures keyed by prompt digest."""

    def __init__(self, fixtures: Mapping[str, Mapping]):
        self.fixtures = dict(fixtures)

    @classmethod
    def from_path(cls, path: str | Path) -> "ReplayProvider":
        return cls(load_fixtures(path))

    def complete(self, messages: Sequence[Message]) -> Completion:
        digest = prompt_digest(messages)
        entry = self.fixtures.get(digest)
        if entry is None:
            raise ProviderError(f"no fixture for prompt digest {digest[:12]}")
        return Completion(entry["reply"], int(entry["prompt_tokens"]), int(entry["completion_tokens"]))


class RecordingProvider:
    """Forwards to ``inner`` and stores every exchange as a fixture."""

    def __init__(self, inner: ChatProvider, path: str | Path | None = None):
        self.inner = inner
        self.path = Path(path) if path else None
        self.fixtures: dict[str, dict] = {}
        if self.path and self.path.exists():
            self.fixtures.update(load_fixtures(self.path))
        self._lock = threading.Lock()

    def complete(self, messages: Sequence[Message]) -> Completion:
        out = self.inner.complete(messages)
        with self._lock:
            self.fixtures[prompt_digest(messages)] = {
                "reply": out.text,
                "prompt_tokens": out.prompt_tokens,
                "completion_tokens": out.completion_tokens,
            }
            if self.path:
                save_fixtures(self.path, self.fixtures)
        return out


class ScriptedProvider:
    """Replies computed by a function of the message list; tokens approximated as ceil(chars/4)."""

    def __init__(self, responder: Callable[[Sequence[Message]], str]):
        self.responder = responder

    def complete(self, messages: Sequence[Message]) -> Completion:
        text = self.responder(messages)
        prompt = sum(approx_tokens(m["content"]) for m in messages)
        return Completion(text, prompt, approx_tokens(text))


# -- conversations -------------------------------------------------------------------

@dataclass
class ChatTranscript:
    messages: list[tuple[str, str]] = field(default_factory=list)
    prompt_tokens: int = 0
    completion_tokens: int = 0

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def as_messages(self) -> list[dict[str, str]]:
        return [{"role": r, "content": t} for r, t in self.messages]

    def assistant_turns(self) -> list[str]:
        return [t for r, t in self.messages if r == "assistant"]

    def check(self) -> None:
        body = self.messages
        if body and body[0][0] == "system":
            body = body[1:]
        for i, (role, _) in enumerate(body):
            expected = "user" if i % 2 == 0 else "assistant"
            if role != expected:
                raise ValueError(f"message {i}: expected {expected}, got {role}")


class Chat:
    """A running conversation with a provider that accumulates token usage."""

    def __init__(self, provider: ChatProvider, system: str | None = None, stage: str = ""):
        self.provider = provider
        self.transcript = ChatTranscript()
        self.stage = stage
        if system is not None:
            self.transcript.messages.append(("system", system))

    @property
    def turns(self) -> int:
        return len(self.transcript.assistant_turns())

    def ask(self, text: str, stage: str | None = None) -> str:
        self.transcript.messages.append(("user", text))
        try:
            out = self.provider.complete(self.transcript.as_messages())
        except ProviderError as exc:
            self.transcript.messages.pop()
            raise ProviderError(exc.detail, exc.stage or stage or self.stage) from exc
        self.transcript.messages.append(("assistant", out.text))
        self.transcript.prompt_tokens += out.prompt_tokens
        self.transcript.completion_tokens += out.completion_tokens
        return out.text
