"""JSON-over-HTTP client with exponential backoff, used by the API embedder and
the chat-completion intent generator.

Tests replay recorded exchanges through :func:`replay_transport` instead of
touching the network.
"""

from __future__ import annotations

import json
import logging
import os
import time
from pathlib import Path
from typing import Callable, Optional

import httpx

logger = logging.getLogger(__name__)

API_KEY_ENV = "IDC_API_KEY"
API_URL_ENV = "IDC_API_URL"
RETRY_STATUSES = frozenset({429, 500, 502, 503, 504})


class ProviderError(RuntimeError):
    """An embedding or generation backend failed."""


class MissingCredentialError(ProviderError):
    pass


def credentials_from_env(url: Optional[str] = None) -> tuple[str, str]:
    key = os.environ.get(API_KEY_ENV)
    if not key:
        raise MissingCredentialError(f"missing credential: set {API_KEY_ENV}")
    url = url or os.environ.get(API_URL_ENV)
    if not url:
        raise MissingCredentialError(f"missing endpoint: set {API_URL_ENV}")
    return url.rstrip("/"), key


class JSONClient:
    def __init__(
        self,
        base_url: str,
        api_key: str,
        max_retries: int = 5,
        backoff: float = 1.0,
        timeout: float = 60.0,
        transport: Optional[httpx.BaseTransport] = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.max_retries = max_retries
        self.backoff = backoff
        self._sleep = sleep
        self._client = httpx.Client(
            base_url=base_url,
            headers={"Authorization": f"Bearer {api_key}"},
            timeout=timeout,
            transport=transport,
        )

    def post(self, path: str, payload: dict) -> dict:
        last = ""
        for attempt in range(self.max_retries + 1):
            try:
                resp = self._client.post(path, json=payload)
            except httpx.TransportError as exc:
                last = f"transport error: {exc}"
            else:
                if resp.status_code < 400:
                    return resp.json()
                last = f"HTTP {resp.status_code}: {resp.text[:200]}"
                if resp.status_code not in RETRY_STATUSES:
                    raise ProviderError(f"POST {path} failed ({last})")
            if attempt < self.max_retries:
                wait = self.backoff * 2**attempt
                logger.warning("POST %s attempt %d failed (%s); retrying in %.1fs", path, attempt + 1, last, wait)
                self._sleep(wait)
        raise ProviderError(f"POST {path} failed after {self.max_retries} retries ({last})")

    def close(self) -> None:
        self._client.close()


def replay_transport(fixture_path: str | Path) -> httpx.MockTransport:
    """Serve recorded exchanges from a JSON fixture.

    The fixture is a list of ``{"path", "request", "status", "response"}``
    objects. A request matches the first unused exchange with the same path
    whose ``request`` body is equal (or absent, which matches anything).
    """
    exchanges = json.loads(Path(fixture_path).read_text(encoding="utf-8"))
    used = [False] * len(exchanges)

    def handler(request: httpx.Request) -> httpx.Response:
        body = json.loads(request.content or b"null")
        for k, ex in enumerate(exchanges):
            if used[k] or ex["path"] != request.url.path:
                continue
            if "request" in ex and ex["request"] != body:
                continue
            used[k] = True
            return httpx.Response(ex.get("status", 200), json=ex["response"])
        raise AssertionError(f"no recorded exchange for {request.url.path} {body!r}")

    return httpx.MockTransport(handler)
