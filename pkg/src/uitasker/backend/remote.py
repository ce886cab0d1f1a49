"""Remote chat-completions backend (OpenAI-compatible wire format)."""

from __future__ import annotations

import logging
import os
import time
from typing import Callable, Optional

import httpx

from uitasker.backend.base import (
    BackendError,
    LmBackend,
    LmResponse,
    RateLimited,
    Timeout,
    TransportError,
)
from uitasker.backend.parsing import split_response
from uitasker.prompting.builders import Prompt

logger = logging.getLogger(__name__)

ENDPOINT_ENV = "UITASKER_LM_ENDPOINT"
API_KEY_ENV = "UITASKER_LM_API_KEY"
MODEL_ENV = "UITASKER_LM_MODEL"
DEFAULT_MODEL = "gpt-4"


class HttpBackend(LmBackend):
    def __init__(
        self,
        endpoint: str,
        api_key: Optional[str] = None,
        *,
        model: str = DEFAULT_MODEL,
        timeout: float = 30.0,
        max_retries: int = 2,
        backoff: float = 1.0,
        max_backoff: float = 8.0,
        transport: Optional[httpx.BaseTransport] = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint
        self.model = model
        self.max_retries = max_retries
        self.backoff = backoff
        self.max_backoff = max_backoff
        self._sleep = sleep
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    @classmethod
    def from_env(cls, **kwargs) -> "HttpBackend":
        endpoint = os.environ.get(ENDPOINT_ENV)
        if not endpoint:
            raise BackendError(f"{ENDPOINT_ENV} is not set")
        return cls(
            endpoint,
            os.environ.get(API_KEY_ENV),
            model=os.environ.get(MODEL_ENV, DEFAULT_MODEL),
            **kwargs,
        )

    def close(self) -> None:
        self._client.close()

    def complete(self, prompt: Prompt) -> LmResponse:
        attempt = 0
        while True:
            try:
                return split_response(self._request(prompt))
            except BackendError as exc:
                if not exc.retryable or attempt >= self.max_retries:
                    raise
                delay = min(self.max_backoff, self.backoff * 2**attempt)
                logger.warning("backend call failed (%s); retrying in %.1fs", exc, delay)
                self._sleep(delay)
                attempt += 1

    def _request(self, prompt: Prompt) -> str:
        body = {
            "model": self.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt.render()}],
        }
        try:
            resp = self._client.post(self.endpoint, json=body)
        except httpx.TimeoutException as exc:
            raise Timeout(str(exc)) from exc
        except httpx.TransportError as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code == 429:
            raise RateLimited("rate limited by backend")
        if resp.status_code >= 500:
            err = TransportError(f"backend returned HTTP {resp.status_code}")
            err.retryable = True
            raise err
        if resp.status_code >= 400:
            raise TransportError(f"backend returned HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"unexpected response body: {resp.text[:200]}") from exc
