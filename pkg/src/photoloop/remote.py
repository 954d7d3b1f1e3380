"""JSON-over-HTTP client shared by the external perceiver, editor and scorer."""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass
from typing import Any, Optional

import requests

log = logging.getLogger(__name__)


class ExternalError(Exception):
    """Base class for failures talking to an external service."""


class ExternalUnavailable(ExternalError):
    """Connection refused, DNS failure, or a non-2xx status."""


class ServiceTimeout(ExternalError):
    pass


class MalformedResponse(ExternalError):
    pass


@dataclass
class Endpoint:
    url: str
    timeout: float = 30.0
    retries: int = 1
    backoff: float = 0.2
    max_in_flight: int = 4


class JsonClient:
    """POSTs JSON to one endpoint with per-request timeout, retries and a cap on in-flight calls.

    Safe to share between threads.
    """

    def __init__(self, endpoint: Endpoint, session: Optional[requests.Session] = None):
        self.endpoint = endpoint
        self._session = session or requests.Session()
        self._slots = threading.BoundedSemaphore(max(1, endpoint.max_in_flight))

    def post(self, body: dict[str, Any]) -> dict[str, Any]:
        last: Exception = ExternalUnavailable(self.endpoint.url)
        for attempt in range(self.endpoint.retries + 1):
            if attempt:
                time.sleep(self.endpoint.backoff * attempt)
            try:
                with self._slots:
                    resp = self._session.post(self.endpoint.url, json=body, timeout=self.endpoint.timeout)
            except requests.Timeout as exc:
                last = ServiceTimeout(f"{self.endpoint.url}: {exc}")
                continue
            except requests.RequestException as exc:
                last = ExternalUnavailable(f"{self.endpoint.url}: {exc}")
                continue
            if resp.status_code >= 500 or resp.status_code == 429:
                last = ExternalUnavailable(f"{self.endpoint.url}: HTTP {resp.status_code}")
                continue
            if resp.status_code >= 400:
                # client errors are not retried
                raise ExternalUnavailable(f"{self.endpoint.url}: HTTP {resp.status_code}")
            try:
                payload = resp.json()
            except ValueError as exc:
                raise MalformedResponse(f"{self.endpoint.url}: body is not JSON") from exc
            if not isinstance(payload, dict):
                raise MalformedResponse(f"{self.endpoint.url}: expected a JSON object")
            return payload
        log.warning("giving up on %s after %d attempts: %s", self.endpoint.url, self.endpoint.retries + 1, last)
        raise last
