"""Shared HTTP plumbing for the PRM and chat-completions clients."""

from __future__ import annotations

import json
import logging
import time
from typing import Any

import httpx

from .errors import ProtocolError, TransportError

log = logging.getLogger(__name__)


def post_with_retries(
    client: httpx.Client, url: str, body: dict, max_retries: int, backoff: float
) -> Any:
    """POST JSON with exponential backoff; raises TransportError when spent."""
    delay = backoff
    last: Exception | None = None
    for attempt in range(max_retries):
        try:
            r = client.post(url, json=body)
            r.raise_for_status()
            return r.json()
        except (httpx.TransportError, httpx.HTTPStatusError) as e:
            last = e
            if attempt + 1 < max_retries:
                log.warning("request to %s failed (attempt %d): %s", url, attempt + 1, e)
                if delay > 0:
                    time.sleep(delay)
                delay *= 2
        except json.JSONDecodeError as e:
            raise ProtocolError(f"non-JSON response from {url}: {e}") from e
    raise TransportError(f"{url} unreachable after {max_retries} attempts: {last}")
