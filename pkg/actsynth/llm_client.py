"""Chat-completions client for the LLM generation path, with retries and optional request logging."""

from __future__ import annotations

import json
import logging
import os
import random
import threading
import time
from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Literal

import requests

from actsynth.errors import LlmAuthError, LlmError, LlmHTTPError
from actsynth.taskgen import LlmRequest

logger = logging.getLogger(__name__)

AuthMode = Literal["auto", "required", "none"]

URL_ENV = "ACTSYNTH_LLM_URL"
DEBUG_ENV = "ACTSYNTH_LLM_DEBUG"
KEY_ENV = ("ACTSYNTH_LLM_API_KEY", "OPENAI_API_KEY")
COMPLETIONS_PATH = "chat/completions"


@dataclass
class Completion:
    """One answered request."""

    request: LlmRequest
    text: str
    model: str = ""
    usage: dict[str, Any] | None = None


class LlmClient:
    """OpenAI-compatible chat-completions client."""

    def __init__(
        self,
        *,
        base_url: str | None = None,
        model: str = "gpt-4o",
        key_env: tuple[str, ...] = KEY_ENV,
        auth: AuthMode = "auto",
        params: dict[str, Any] | None = None,
        timeout_s: float = 120.0,
        max_retries: int = 4,
        backoff_base_s: float = 1.0,
        backoff_max_s: float = 60.0,
        debug_path: Path | None = None,
        session: requests.Session | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        url = base_url or os.environ.get(URL_ENV)
        if not url:
            raise LlmAuthError(f"No LLM endpoint configured; pass base_url or set {URL_ENV}")
        self.base_url = url.rstrip("/")
        self.model = model
        self.params = dict(params or {})
        self.timeout_s = timeout_s
        self.max_retries = max_retries
        self.backoff_base_s = backoff_base_s
        self.backoff_max_s = backoff_max_s
        self._auth = auth
        self._sleep = sleep

        self._key: str | None = None
        for env_var in key_env:
            if os.environ.get(env_var):
                self._key = os.environ[env_var]
                break
        if auth == "required" and not self._key:
            raise LlmAuthError(f"LLM API key required but not found in environment variables: {key_env}")

        debug = debug_path or (Path(os.environ[DEBUG_ENV]) if os.environ.get(DEBUG_ENV) else None)
        self.debug_path = debug
        self._debug_lock = threading.Lock()
        self._session = session or requests.Session()

    def _should_retry(self, response: requests.Response) -> bool:
        return response.status_code == 429 or response.status_code >= 500

    def _calculate_retry_delay(self, response: requests.Response | None, attempt: int) -> float:
        if response is not None:
            retry_after = response.headers.get("Retry-After")
            if retry_after:
                try:
                    return float(retry_after)
                except ValueError:
                    pass
        delay = min(self.backoff_max_s, self.backoff_base_s * (2**attempt))
        return delay + random.uniform(0, 0.25)

    def _debug(self, record: dict[str, Any]) -> None:
        if self.debug_path is None:
            return
        line = json.dumps(record, ensure_ascii=False)
        with self._debug_lock:
            self.debug_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.debug_path, "a", encoding="utf-8") as f:
                f.write(line + "\n")

    def body(self, request: LlmRequest) -> dict[str, Any]:
        return {**self.params, "model": self.model, "messages": request.messages()}

    def complete(self, request: LlmRequest) -> Completion:
        """Send one request and return the assistant text."""
        url = f"{self.base_url}/{COMPLETIONS_PATH}"
        headers = {"Content-Type": "application/json"}
        if self._auth != "none" and self._key:
            headers["Authorization"] = f"Bearer {self._key}"
        body = self.body(request)

        for attempt in range(self.max_retries + 1):
            try:
                response = self._session.post(url, headers=headers, json=body, timeout=self.timeout_s)
            except requests.RequestException as e:
                if attempt < self.max_retries:
                    delay = self._calculate_retry_delay(None, attempt)
                    logger.warning("LLM request failed (%s); retrying in %.1fs", e, delay)
                    self._sleep(delay)
                    continue
                raise LlmError(f"Request failed: {e}") from e

            if response.status_code == 200:
                break
            if self._should_retry(response) and attempt < self.max_retries:
                delay = self._calculate_retry_delay(response, attempt)
                logger.warning("LLM endpoint returned %d; retrying in %.1fs", response.status_code, delay)
                self._sleep(delay)
                continue
            raise LlmHTTPError(
                status_code=response.status_code,
                url=url,
                response_text=response.text,
                headers=dict(response.headers),
            )

        try:
            data = response.json()
            text = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise LlmError(f"Unexpected completion payload from {url}: {e!r}") from e
        if not isinstance(text, str):
            raise LlmError(f"Completion content from {url} is not text")

        self._debug(
            {
                "modality": request.modality,
                "system_prompt_id": request.system_prompt_id,
                "image": request.image_ref,
                "elements": request.elements,
                "response": text,
            }
        )
        return Completion(request, text, str(data.get("model", self.model)), data.get("usage"))

    def complete_many(self, requests_: Iterable[LlmRequest], max_concurrency: int = 4) -> list[Completion]:
        """Answer requests concurrently; results keep the input order."""
        batch = list(requests_)
        if max_concurrency <= 1:
            return [self.complete(r) for r in batch]
        with ThreadPoolExecutor(max_workers=max_concurrency) as pool:
            return list(pool.map(self.complete, batch))
