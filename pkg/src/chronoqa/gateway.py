"""Provider-agnostic chat client with deterministic on-disk caching.

One wire shape (chat-completion style JSON over HTTP) serves every
provider; endpoints differ only by config. Responses are cached
verbatim, keyed by a content hash of the full request, so a warmed
cache replays an entire run with zero network calls and scoring changes
never require re-querying.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import httpx

from .errors import GatewayError

log = logging.getLogger(__name__)

SQL_TO_TEXT_TEMPERATURE = 0.3
EVALUATED_TEMPERATURE = 0.0
JUDGE_TEMPERATURE = 0.0


@dataclass(frozen=True)
class ProviderConfig:
    name: str
    base_url: str
    model: str
    credential_env: str = ""
    max_concurrency: int = 4


@dataclass(frozen=True)
class ChatRequest:
    model: str
    system: str
    user: str
    temperature: float = EVALUATED_TEMPERATURE
    max_retries: int = 3

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


def cache_key(base_url: str, request: ChatRequest) -> str:
    """Content hash of (endpoint, model, prompts, temperature)."""
    payload = json.dumps(
        {
            "endpoint": base_url,
            "model": request.model,
            "system": request.system,
            "user": request.user,
            "temperature": request.temperature,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Gateway:
    """Issues chat requests against one provider, optionally cached.

    A custom ``transport`` (httpx transport) can be injected for tests;
    the client is created lazily so cache hits never open a connection.
    """

    def __init__(
        self,
        provider: ProviderConfig,
        cache_dir: str | Path | None = None,
        transport: httpx.BaseTransport | None = None,
        backoff: float = 0.5,
    ) -> None:
        self.provider = provider
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self._transport = transport
        self._backoff = backoff
        self._client: httpx.Client | None = None

    # -- transport ---------------------------------------------------------

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.provider.credential_env:
            token = os.environ.get(self.provider.credential_env)
            if token:
                headers["Authorization"] = f"Bearer {token}"
        return headers

    def _ensure_client(self) -> httpx.Client:
        if self._client is None:
            self._client = httpx.Client(
                base_url=self.provider.base_url,
                transport=self._transport,
                timeout=60.0,
            )
        return self._client

    def close(self) -> None:
        if self._client is not None:
            self._client.close()
            self._client = None

    def complete(self, request: ChatRequest) -> str:
        """Call the endpoint, retrying transient failures with backoff."""
        body = {
            "model": request.model,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
            "temperature": request.temperature,
        }
        client = self._ensure_client()
        last_error: Exception | None = None
        for attempt in range(request.max_retries + 1):
            if attempt:
                time.sleep(self._backoff * (2 ** (attempt - 1)))
            try:
                response = client.post("/chat/completions", json=body, headers=self._headers())
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if response.status_code in (401, 403):
                raise GatewayError(
                    f"authentication failed against {self.provider.name} "
                    f"(set {self.provider.credential_env or 'the provider credential'})"
                )
            if response.status_code >= 500 or response.status_code == 429:
                last_error = GatewayError(f"transient status {response.status_code}")
                continue
            if response.status_code != 200:
                raise GatewayError(f"{self.provider.name} returned status {response.status_code}")
            return _extract_text(response)
        raise GatewayError(
            f"exhausted {request.max_retries + 1} attempts against {self.provider.name}: {last_error}"
        )

    # -- cache ---------------------------------------------------------------

    def _cache_path(self, key: str) -> Path:
        return self.cache_dir / key

    def cached_complete(self, request: ChatRequest) -> str:
        """Serve byte-identical text from cache, calling out only on miss."""
        if self.cache_dir is None:
            return self.complete(request)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        key = cache_key(self.provider.base_url, request)
        path = self._cache_path(key)
        if path.exists():
            try:
                return path.read_text(encoding="utf-8")
            except (UnicodeDecodeError, OSError) as exc:
                log.warning("cache entry %s unreadable (%s); refetching", key[:12], exc)
        text = self.complete(request)
        _atomic_write(path, text)
        return text


def _extract_text(response: httpx.Response) -> str:
    try:
        payload = response.json()
        return payload["choices"][0]["message"]["content"]
    except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
        raise GatewayError(f"non-text response from endpoint: {exc}") from exc


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".cache-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
