"""Uniform chat/embedding access: HTTP provider, scripted mock, disk cache.

Every pipeline stage talks to providers through Gateway, which adds caching
(content-hash keyed, write-temp-then-rename), retry with exponential backoff,
and a process-wide in-flight bound shared by all concurrent workers.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence, TypeVar

import requests

from kgcot.errors import InputError, ProviderError

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

VALID_ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[tuple[str, str], ...]  # (role, content)
    temperature: float = 0.0
    max_output: int = 1024
    tag: str = ""  # pipeline stage label for audit and scenario routing

    def __post_init__(self) -> None:
        if not self.messages:
            raise InputError("chat request needs at least one message")
        for role, _ in self.messages:
            if role not in VALID_ROLES:
                raise InputError(f"bad message role {role!r}")

    def joined_text(self) -> str:
        return "\n".join(content for _, content in self.messages)


@dataclass
class ChatResponse:
    text: str
    provider_id: str
    cached: bool = False
    token_scores: list[tuple[str, float]] | None = None


@dataclass
class ProviderConfig:
    kind: str = "mock"  # "http_openai_compatible" | "mock"
    base_url: str | None = None
    model: str = "mock-chat"
    embedding_model: str = "mock-embed"
    api_key_env: str = "KGCOT_API_KEY"
    max_in_flight: int = 4
    retries: int = 3
    retry_backoff: float = 0.5
    timeout: float = 60.0
    cache_dir: str | None = None
    scenario: str | None = None  # mock only
    embedding_dim: int = 16  # mock only
    seed: int = 7  # mock only

    def __post_init__(self) -> None:
        if self.kind not in ("http_openai_compatible", "mock"):
            raise InputError(f"unknown provider kind {self.kind!r}")

    def resolved_base_url(self) -> str:
        base = self.base_url or os.environ.get("KGCOT_API_BASE")
        if not base:
            raise InputError(
                "http provider needs base_url (config) or KGCOT_API_BASE (env)"
            )
        return base.rstrip("/")


class Provider(Protocol):
    provider_id: str

    def chat_raw(self, request: ChatRequest) -> ChatResponse: ...

    def embed_raw(self, texts: Sequence[str]) -> list[list[float]]: ...


_PUNCT = re.compile(r"[^\w\s]", re.UNICODE)
_WS = re.compile(r"\s+")


def _embed_normalize(text: str) -> str:
    """Mock-embedding text key: casefold, strip punctuation, collapse space.

    Coarser than the graph name normalization on purpose: labels differing
    only in punctuation embed identically, giving the similarity stage a
    deterministic way to catch near-exact labels.
    """
    return _WS.sub(" ", _PUNCT.sub("", text.casefold())).strip()


def hash_embedding(text: str, dim: int, seed: int) -> list[float]:
    """Deterministic pseudo-embedding: sha256 stream over normalized text."""
    normalized = _embed_normalize(text)
    values: list[float] = []
    block = 0
    while len(values) < dim:
        digest = hashlib.sha256(f"{seed}|{block}|{normalized}".encode()).digest()
        for i in range(0, len(digest) - 1, 2):
            if len(values) >= dim:
                break
            raw = int.from_bytes(digest[i : i + 2], "big")
            values.append(raw / 32767.5 - 1.0)
        block += 1
    return values


class MockProvider:
    """Scripted provider: (tag, contains) rules for chat, hashed embeddings.

    An unmatched request without a default reply is an explicit error;
    silently returning garbage would hide scenario gaps.
    """

    def __init__(
        self,
        rules: Sequence[dict] | None = None,
        default_reply: str | None = None,
        embedding_dim: int = 16,
        seed: int = 7,
        model: str = "mock-chat",
    ) -> None:
        self.rules = list(rules or [])
        self.default_reply = default_reply
        self.embedding_dim = embedding_dim
        self.seed = seed
        self.provider_id = f"mock:{model}"

    @classmethod
    def from_scenario(cls, path: str | Path, model: str = "mock-chat") -> "MockProvider":
        path = Path(path)
        if not path.exists():
            raise InputError(f"missing scenario file: {path}")
        try:
            spec = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as err:
            raise InputError(f"{path}: bad scenario JSON: {err}") from err
        return cls(
            rules=spec.get("rules", []),
            default_reply=spec.get("default_reply"),
            embedding_dim=int(spec.get("embedding_dim", 16)),
            seed=int(spec.get("seed", 7)),
            model=model,
        )

    def chat_raw(self, request: ChatRequest) -> ChatResponse:
        text = request.joined_text()
        for rule in self.rules:
            if "tag" in rule and rule["tag"] != request.tag:
                continue
            if "contains" in rule and rule["contains"] not in text:
                continue
            if rule.get("fail"):
                raise ProviderError(
                    f"scripted failure for tag {request.tag!r}"
                )
            return ChatResponse(text=rule["reply"], provider_id=self.provider_id)
        if self.default_reply is not None:
            return ChatResponse(text=self.default_reply, provider_id=self.provider_id)
        raise ProviderError(
            f"no scenario rule matches tag {request.tag!r} and no default reply"
        )

    def embed_raw(self, texts: Sequence[str]) -> list[list[float]]:
        return [hash_embedding(t, self.embedding_dim, self.seed) for t in texts]


class HttpProvider:
    """OpenAI-compatible chat/embeddings over HTTP."""

    def __init__(self, config: ProviderConfig) -> None:
        self.config = config
        self.base_url = config.resolved_base_url()
        self.provider_id = f"http:{config.model}"
        self._session = requests.Session()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post(self, endpoint: str, payload: dict) -> dict:
        url = f"{self.base_url}{endpoint}"
        last_error: Exception | None = None
        for attempt in range(self.config.retries):
            try:
                response = self._session.post(
                    url,
                    json=payload,
                    headers=self._headers(),
                    timeout=self.config.timeout,
                )
            except requests.RequestException as err:
                last_error = err
            else:
                if response.status_code < 400:
                    try:
                        return response.json()
                    except ValueError as err:
                        raise ProviderError(f"{url}: non-JSON response body") from err
                detail = f"{url} -> {response.status_code}: {response.text[:200]}"
                if response.status_code < 500:
                    # client errors will not improve on retry
                    raise ProviderError(detail)
                last_error = ProviderError(detail)
            if attempt + 1 < self.config.retries:
                time.sleep(self.config.retry_backoff * (2**attempt))
        raise ProviderError(
            f"provider call failed after {self.config.retries} attempts: {last_error}"
        )

    def chat_raw(self, request: ChatRequest) -> ChatResponse:
        payload = {
            "model": self.config.model,
            "messages": [{"role": r, "content": c} for r, c in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_output,
        }
        body = self._post("/chat/completions", payload)
        try:
            choice = body["choices"][0]
            text = choice["message"]["content"]
        except (KeyError, IndexError, TypeError) as err:
            raise ProviderError(f"malformed chat response: {err}") from err
        token_scores = None
        logprobs = (choice.get("logprobs") or {}).get("content")
        if logprobs:
            token_scores = [(t["token"], float(t["logprob"])) for t in logprobs]
        return ChatResponse(
            text=text, provider_id=self.provider_id, token_scores=token_scores
        )

    def embed_raw(self, texts: Sequence[str]) -> list[list[float]]:
        payload = {"model": self.config.embedding_model, "input": list(texts)}
        body = self._post("/embeddings", payload)
        try:
            rows = sorted(body["data"], key=lambda d: d["index"])
            return [[float(x) for x in row["embedding"]] for row in rows]
        except (KeyError, TypeError) as err:
            raise ProviderError(f"malformed embeddings response: {err}") from err


def build_provider(config: ProviderConfig) -> Provider:
    if config.kind == "mock":
        if config.scenario:
            provider = MockProvider.from_scenario(config.scenario, model=config.model)
        else:
            provider = MockProvider(
                embedding_dim=config.embedding_dim,
                seed=config.seed,
                model=config.model,
            )
        return provider
    return HttpProvider(config)


class Gateway:
    """Caching, rate-bounded front door to one provider."""

    def __init__(
        self,
        provider: Provider,
        cache_dir: str | Path | None = None,
        max_in_flight: int = 4,
        embedding_model: str = "mock-embed",
    ) -> None:
        self.provider = provider
        self.cache_dir = Path(cache_dir) if cache_dir else None
        if self.cache_dir:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.max_in_flight = max_in_flight
        self.embedding_model = embedding_model
        self.stats: Counter = Counter()
        self._gate = threading.Semaphore(max_in_flight)
        self._stats_lock = threading.Lock()

    @classmethod
    def from_config(cls, config: ProviderConfig) -> "Gateway":
        return cls(
            build_provider(config),
            cache_dir=config.cache_dir or os.environ.get("KGCOT_CACHE_DIR"),
            max_in_flight=config.max_in_flight,
            embedding_model=config.embedding_model,
        )

    def _bump(self, key: str) -> None:
        with self._stats_lock:
            self.stats[key] += 1

    def _cache_path(self, key: str) -> Path | None:
        if not self.cache_dir:
            return None
        return self.cache_dir / f"{hashlib.sha256(key.encode()).hexdigest()}.json"

    def _cache_read(self, key: str) -> dict | None:
        path = self._cache_path(key)
        if path is None or not path.exists():
            return None
        try:
            return json.loads(path.read_text(encoding="utf-8"))["response"]
        except (json.JSONDecodeError, KeyError):
            logger.warning("dropping unreadable cache entry %s", path)
            return None

    def _cache_write(self, key: str, request_repr: dict, response_repr: dict) -> None:
        path = self._cache_path(key)
        if path is None:
            return
        tmp = path.with_suffix(f".tmp{os.getpid()}.{threading.get_ident()}")
        tmp.write_text(
            json.dumps(
                {
                    "request": request_repr,
                    "response": response_repr,
                    "timestamp": time.time(),
                },
                sort_keys=True,
            ),
            encoding="utf-8",
        )
        tmp.replace(path)

    def chat(self, request: ChatRequest) -> ChatResponse:
        key_obj = {
            "provider_id": self.provider.provider_id,
            "messages": [list(m) for m in request.messages],
            "temperature": request.temperature,
        }
        key = "chat:" + json.dumps(key_obj, sort_keys=True)
        cached = self._cache_read(key)
        if cached is not None:
            self._bump("chat_cache_hits")
            return ChatResponse(
                text=cached["text"],
                provider_id=cached["provider_id"],
                cached=True,
                token_scores=[tuple(t) for t in cached["token_scores"]]
                if cached.get("token_scores")
                else None,
            )
        with self._gate:
            self._bump("chat_calls")
            response = self.provider.chat_raw(request)
        self._cache_write(
            key,
            {"tag": request.tag, "messages": [list(m) for m in request.messages]},
            {
                "text": response.text,
                "provider_id": response.provider_id,
                "token_scores": response.token_scores,
            },
        )
        return response

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        """One vector per text, input order, cached per text."""
        if not texts:
            raise InputError("embed() needs at least one text")
        results: list[list[float] | None] = [None] * len(texts)
        missing: list[int] = []
        keys = []
        for i, text in enumerate(texts):
            key = "embed:" + json.dumps(
                {
                    "provider_id": self.provider.provider_id,
                    "model": self.embedding_model,
                    "text": text,
                },
                sort_keys=True,
            )
            keys.append(key)
            cached = self._cache_read(key)
            if cached is not None:
                self._bump("embed_cache_hits")
                results[i] = cached["vector"]
            else:
                missing.append(i)
        if missing:
            with self._gate:
                self._bump("embed_calls")
                vectors = self.provider.embed_raw([texts[i] for i in missing])
            if len(vectors) != len(missing):
                raise ProviderError(
                    f"embedding count mismatch: sent {len(missing)}, got {len(vectors)}"
                )
            for i, vector in zip(missing, vectors):
                results[i] = vector
                self._cache_write(keys[i], {"text": texts[i]}, {"vector": vector})
        return results  # type: ignore[return-value]


def map_ordered(
    fn: Callable[[T], R],
    items: Iterable[T],
    max_workers: int = 4,
) -> list[R]:
    """Concurrent map that preserves input order in its results."""
    items = list(items)
    if not items:
        return []
    if max_workers <= 1 or len(items) == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(fn, items))
