"""Minimal chat-completion HTTP client.

Speaks the common {model, messages} POST contract and returns the first
choice's message text. Timeouts, 5xx and 429 are retried with a short
backoff; other 4xx responses are configuration errors and fail fast.
Secrets never live in config: only the *name* of the environment variable
holding the bearer token is stored.
"""
from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass
from typing import Optional

import requests

from .errors import LlmRejected, LlmUnavailable

logger = logging.getLogger(__name__)

SYSTEM_MESSAGE = "You are a careful reading assistant for restaurant menus."
DEFAULT_TIMEOUT = 30.0
DEFAULT_MAX_RETRIES = 2
DEFAULT_BACKOFF = (1.0, 2.0)


@dataclass(frozen=True)
class LlmClientConfig:
    endpoint: str
    model: str
    token_var: Optional[str] = None  # name of the env var holding the token
    timeout_s: float = DEFAULT_TIMEOUT
    max_retries: int = DEFAULT_MAX_RETRIES
    backoff_s: tuple[float, ...] = DEFAULT_BACKOFF

    def __post_init__(self):
        if self.timeout_s <= 0:
            raise ValueError(f"timeout_s must be > 0, got {self.timeout_s}")
        if self.max_retries < 0:
            raise ValueError(f"max_retries must be >= 0, got {self.max_retries}")


def _headers(config: LlmClientConfig) -> dict[str, str]:
    headers = {"Content-Type": "application/json"}
    if config.token_var:
        token = os.environ.get(config.token_var)
        if token:
            headers["Authorization"] = f"Bearer {token}"
    return headers


def llm_complete(prompt: str, config: LlmClientConfig, system: str = SYSTEM_MESSAGE) -> str:
    """POST the prompt as a single user message and return the reply text."""
    payload = {
        "model": config.model,
        "messages": [
            {"role": "system", "content": system},
            {"role": "user", "content": prompt},
        ],
    }
    attempts = config.max_retries + 1
    last_error: Exception | None = None
    for attempt in range(attempts):
        if attempt > 0:
            delay = config.backoff_s[min(attempt - 1, len(config.backoff_s) - 1)] if config.backoff_s else 0.0
            time.sleep(delay)
        try:
            response = requests.post(
                config.endpoint, json=payload, headers=_headers(config), timeout=config.timeout_s
            )
        except requests.RequestException as e:
            last_error = e
            logger.warning("LLM request failed (attempt %d/%d): %s", attempt + 1, attempts, e)
            continue
        if response.status_code == 200:
            try:
                data = response.json()
                return data["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as e:
                raise LlmRejected(
                    f"malformed completion response: {e}",
                    status=response.status_code,
                    body=response.text[:500],
                )
        if response.status_code == 429 or response.status_code >= 500:
            last_error = RuntimeError(f"HTTP {response.status_code}")
            logger.warning(
                "LLM endpoint returned %d (attempt %d/%d)", response.status_code, attempt + 1, attempts
            )
            continue
        raise LlmRejected(
            f"endpoint rejected request with HTTP {response.status_code}",
            status=response.status_code,
            body=response.text[:500],
        )
    raise LlmUnavailable(f"chat completion failed after {attempts} attempts: {last_error}")
