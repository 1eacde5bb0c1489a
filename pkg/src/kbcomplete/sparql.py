"""Minimal SPARQL-over-HTTP client with a disk cache.

Results are requested in the standard JSON results format. Every response
is cached on disk keyed by (endpoint, query text) so reruns are
deterministic and cheap; live endpoints drift and rate-limit.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import time
from pathlib import Path

import httpx

from .errors import EndpointError

RESULTS_JSON = "application/sparql-results+json"


class DiskCache:
    """One file per key hash; writes are atomic (temp file + rename)."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        digest = hashlib.sha256(key.encode("utf-8")).hexdigest()
        return self.directory / f"{digest}.json"

    def get(self, key: str):
        path = self._path(key)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def put(self, key: str, value) -> None:
        path = self._path(key)
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                json.dump(value, handle)
            os.replace(tmp, path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)


def _http_fetch(endpoint: str, query: str, timeout: float) -> dict:
    response = httpx.post(
        endpoint,
        data={"query": query},
        headers={"Accept": RESULTS_JSON},
        timeout=timeout,
    )
    response.raise_for_status()
    return response.json()


def local_id(value: str) -> str:
    """Strip an IRI down to its final segment (Q42 from .../entity/Q42)."""
    if "://" not in value:
        return value
    tail = value.rsplit("#", 1)[-1]
    return tail.rsplit("/", 1)[-1]


class SparqlClient:
    """SELECT queries against one endpoint, with caching and retries.

    ``fetch`` may be injected for tests: a callable
    ``(endpoint, query) -> results-json dict``.
    """

    def __init__(self, endpoint, cache=None, fetch=None, timeout=60.0,
                 attempts=3, backoff=0.5):
        self.endpoint = endpoint
        self.cache = cache
        self.timeout = timeout
        self.attempts = attempts
        self.backoff = backoff
        self._fetch = fetch or (lambda ep, q: _http_fetch(ep, q, self.timeout))

    def select(self, query: str) -> list[dict[str, str]]:
        """Run a SELECT; returns one {variable: value} dict per binding row."""
        payload = self._cached_payload(query)
        try:
            bindings = payload["results"]["bindings"]
            return [
                {var: cell["value"] for var, cell in row.items()}
                for row in bindings
            ]
        except (KeyError, TypeError) as exc:
            raise EndpointError(
                f"malformed SPARQL results from {self.endpoint}: {exc}", query=query
            ) from exc

    def _cached_payload(self, query: str) -> dict:
        key = f"{self.endpoint}\n{query}"
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                return hit
        payload = self._fetch_with_retry(query)
        if self.cache is not None:
            self.cache.put(key, payload)
        return payload

    def _fetch_with_retry(self, query: str) -> dict:
        last = None
        for attempt in range(self.attempts):
            try:
                return self._fetch(self.endpoint, query)
            except (httpx.HTTPError, OSError, ValueError) as exc:
                last = exc
                if attempt + 1 < self.attempts:
                    time.sleep(self.backoff * (2 ** attempt))
        raise EndpointError(
            f"SPARQL endpoint {self.endpoint} failed after "
            f"{self.attempts} attempts: {last}",
            query=query,
        ) from last
