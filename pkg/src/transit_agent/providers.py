"""Text-generation and embedding providers.

Two implementations sit behind the same two-method surface: an HTTP client
for hosted chat-completion/embedding endpoints, and a scripted provider
that answers from a matcher table and hashes embeddings deterministically,
so the whole pipeline can run offline and reproducibly.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np
import requests

from transit_agent.errors import ContextOverflow, ProviderUnavailable

logger = logging.getLogger(__name__)

VALID_ROLES = ("user", "assistant", "system")

DEFAULT_EMBEDDING_DIM = 256
DEFAULT_EMBEDDING_SEED = 7


@dataclass
class CompletionRequest:
    system_prompt: str
    messages: list[tuple[str, str]]  # (role, text)
    temperature: float = 0.0
    max_tokens: int = 1024

    def __post_init__(self):
        if not self.messages:
            raise ValueError("messages must be non-empty")
        for role, _ in self.messages:
            if role not in VALID_ROLES:
                raise ValueError(f"bad role {role!r}")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")

    def last_user_message(self) -> str:
        for role, text in reversed(self.messages):
            if role == "user":
                return text
        return ""


@dataclass
class EmbeddingVector:
    values: np.ndarray
    dimension: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.dimension,):
            raise ValueError(f"expected shape ({self.dimension},), got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("embedding vector contains non-finite values")


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    norm = float(np.linalg.norm(a.values) * np.linalg.norm(b.values))
    if norm == 0.0:
        return 0.0
    return float(np.dot(a.values, b.values) / norm)


class Provider(Protocol):
    provider_id: str

    def complete(self, request: CompletionRequest) -> str: ...

    def embed(self, text: str) -> EmbeddingVector: ...


_TOKEN_PATTERN = re.compile(r"[a-z0-9]+")


def hashed_embedding(text: str, dim: int, seed: int) -> EmbeddingVector:
    """Hash the lowercased token multiset into a unit-norm vector.

    Order-insensitive and a pure function of (text, dim, seed).
    """
    if not text or not text.strip():
        raise ValueError("cannot embed empty text")
    tokens = _TOKEN_PATTERN.findall(text.lower())
    if not tokens:
        tokens = [text.strip()]
    values = np.zeros(dim, dtype=np.float64)
    for token in tokens:
        digest = hashlib.sha256(f"{seed}:{token}".encode("utf-8")).digest()
        bucket = int.from_bytes(digest[:4], "big") % dim
        sign = 1.0 if digest[4] % 2 == 0 else -1.0
        values[bucket] += sign
    norm = np.linalg.norm(values)
    if norm == 0.0:
        values[0] = 1.0
        norm = 1.0
    return EmbeddingVector(values=values / norm, dimension=dim)


class ScriptedProvider:
    """Deterministic offline provider.

    Completions match the last user message against an ordered list of
    regex patterns; the first hit wins and its response template may expand
    capture groups (``\\1`` style).  Embeddings use the hashed-token scheme.
    """

    def __init__(
        self,
        completion_map: list[tuple[str, str]],
        embedding_dim: int = DEFAULT_EMBEDDING_DIM,
        embedding_seed: int = DEFAULT_EMBEDDING_SEED,
    ):
        self._entries = [(re.compile(pattern, re.DOTALL), response) for pattern, response in completion_map]
        self.embedding_dim = embedding_dim
        self.embedding_seed = embedding_seed
        self.provider_id = f"scripted:dim={embedding_dim}:seed={embedding_seed}"

    def complete(self, request: CompletionRequest) -> str:
        message = request.last_user_message()
        for pattern, response in self._entries:
            match = pattern.search(message)
            if match:
                return match.expand(response)
        raise ProviderUnavailable(f"no scripted response matches: {message[:120]!r}")

    def embed(self, text: str) -> EmbeddingVector:
        return hashed_embedding(text, self.embedding_dim, self.embedding_seed)


def load_scripted_provider(path: str | Path) -> ScriptedProvider:
    """Load a matcher->response file: {"completions": [{"match", "response"}, ...]}."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    completion_map = [(entry["match"], entry["response"]) for entry in data.get("completions", [])]
    return ScriptedProvider(
        completion_map,
        embedding_dim=int(data.get("embedding_dim", DEFAULT_EMBEDDING_DIM)),
        embedding_seed=int(data.get("embedding_seed", DEFAULT_EMBEDDING_SEED)),
    )


@dataclass
class HttpProviderConfig:
    base_url: str
    completion_model: str
    embedding_model: str = ""
    api_key_env: str = "TRANSIT_AGENT_API_KEY"
    timeout_s: float = 60.0
    max_retries: int = 3
    backoff_s: float = 1.0
    max_concurrent: int = 8
    extra_headers: dict = field(default_factory=dict)


class HttpProvider:
    """Client for OpenAI-style chat-completion and embedding endpoints."""

    def __init__(self, config: HttpProviderConfig):
        self.config = config
        self.provider_id = f"http:{config.base_url}:{config.completion_model}:{config.embedding_model}"
        self._limiter = threading.Semaphore(config.max_concurrent)

    def _headers(self) -> dict:
        key = os.environ.get(self.config.api_key_env, "")
        if not key:
            raise ProviderUnavailable(f"API key not set ({self.config.api_key_env})")
        headers = {"Content-Type": "application/json", "Authorization": f"Bearer {key}"}
        headers.update(self.config.extra_headers)
        return headers

    def _post(self, path: str, payload: dict) -> dict:
        url = self.config.base_url.rstrip("/") + path
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                time.sleep(self.config.backoff_s * (2 ** (attempt - 1)))
            try:
                with self._limiter:
                    response = requests.post(
                        url, headers=self._headers(), json=payload, timeout=self.config.timeout_s
                    )
            except (requests.Timeout, requests.ConnectionError) as exc:
                last_error = exc
                logger.warning("provider call failed (attempt %d): %s", attempt + 1, exc)
                continue
            if response.status_code >= 500:
                last_error = ProviderUnavailable(f"HTTP {response.status_code}: {response.text[:200]}")
                logger.warning("provider 5xx (attempt %d): %s", attempt + 1, response.status_code)
                continue
            if response.status_code >= 400:
                body = response.text[:500]
                if "context" in body.lower() and "length" in body.lower():
                    raise ContextOverflow(body)
                raise ProviderUnavailable(f"HTTP {response.status_code}: {body}")
            return response.json()
        raise ProviderUnavailable(f"provider unreachable after retries: {last_error}")

    def complete(self, request: CompletionRequest) -> str:
        messages = [{"role": "system", "content": request.system_prompt}] if request.system_prompt else []
        messages.extend({"role": role, "content": text} for role, text in request.messages)
        data = self._post(
            "/chat/completions",
            {
                "model": self.config.completion_model,
                "messages": messages,
                "temperature": request.temperature,
                "max_tokens": request.max_tokens,
            },
        )
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderUnavailable(f"malformed completion response: {data!r}") from exc

    def embed(self, text: str) -> EmbeddingVector:
        if not text or not text.strip():
            raise ValueError("cannot embed empty text")
        model = self.config.embedding_model or self.config.completion_model
        data = self._post("/embeddings", {"model": model, "input": text})
        try:
            values = np.asarray(data["data"][0]["embedding"], dtype=np.float64)
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderUnavailable(f"malformed embedding response: {data!r}") from exc
        return EmbeddingVector(values=values, dimension=values.shape[0])
