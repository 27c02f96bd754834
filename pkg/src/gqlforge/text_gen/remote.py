"""Chat-completion endpoint client with bounded concurrency and retry."""

from __future__ import annotations

import logging
import os
import threading
import time
from dataclasses import dataclass

import httpx

from ..errors import MalformedResponseError, TransportError
from .prompts import GeneratorOutput, Prompt, output_from_text

log = logging.getLogger(__name__)

RETRYABLE_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


@dataclass
class EndpointConfig:
    base_url: str
    model: str
    api_key_env: str = "GQLFORGE_API_KEY"
    timeout: float = 60.0
    max_in_flight: int = 4
    max_retries: int = 4
    backoff_base: float = 0.5
    backoff_cap: float = 8.0
    temperature: float | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "EndpointConfig":
        known = {k: v for k, v in doc.items() if k in cls.__dataclass_fields__}
        if "api_key" in doc:
            raise ValueError("API keys are read from the environment, not from config")
        return cls(**known)

    def api_key(self) -> str | None:
        return os.environ.get(self.api_key_env)


def backoff_delay(attempt: int, base: float, cap: float) -> float:
    """Delay before retry number ``attempt`` (1-based): base * 2**(attempt-1), capped."""
    return min(cap, base * 2 ** (attempt - 1))


class ChatClient:
    """POSTs ``{model, messages}`` and returns ``choices[0].message.content``."""

    def __init__(self, config: EndpointConfig, transport: httpx.BaseTransport | None = None, sleep=time.sleep):
        self.config = config
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max(1, config.max_in_flight))
        headers = {"Content-Type": "application/json"}
        key = config.api_key()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._http = httpx.Client(base_url=config.base_url, headers=headers, timeout=config.timeout,
                                  transport=transport)

    def close(self):
        self._http.close()

    def complete(self, text: str, seed=None) -> str:
        body = {"model": self.config.model, "messages": [{"role": "user", "content": text}]}
        if self.config.temperature is not None:
            body["temperature"] = self.config.temperature
        if seed is not None:
            body["seed"] = seed
        return _content(self._post("/chat/completions", body))

    def post_json(self, path: str, body: dict) -> dict:
        return self._post(path, body)

    def _post(self, path: str, body: dict) -> dict:
        attempts = self.config.max_retries + 1
        last = None
        for attempt in range(1, attempts + 1):
            try:
                with self._slots:
                    resp = self._http.post(path, json=body)
                if resp.status_code in RETRYABLE_STATUS:
                    last = f"HTTP {resp.status_code}"
                elif resp.status_code >= 400:
                    raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                else:
                    try:
                        return resp.json()
                    except ValueError as exc:
                        raise MalformedResponseError("response body is not JSON") from exc
            except httpx.TransportError as exc:
                last = f"{type(exc).__name__}: {exc}"
            if attempt < attempts:
                delay = backoff_delay(attempt, self.config.backoff_base, self.config.backoff_cap)
                log.warning("request failed (%s); retry %d in %.2fs", last, attempt, delay)
                self._sleep(delay)
        raise TransportError(f"giving up after {attempts} attempts: {last}")


def _content(doc: dict) -> str:
    try:
        content = doc["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise MalformedResponseError("response has no choices[0].message.content") from exc
    if not isinstance(content, str):
        raise MalformedResponseError("message content is not text")
    return content


class RemoteChatGenerator:
    def __init__(self, config: EndpointConfig, transport=None, sleep=time.sleep):
        self.client = ChatClient(config, transport=transport, sleep=sleep)

    def generate(self, prompt: Prompt, seed=None) -> GeneratorOutput:
        return output_from_text(prompt.kind, self.client.complete(prompt.rendered_text, seed))
