"""Web-search providers for context-augmented prompting.

A provider exposes ``search(query) -> SearchSnippet | None``. Transport
and quota failures raise retryable errors; None strictly means zero
results. Snippets are cached on disk the same way SPARQL results are.
"""

from __future__ import annotations

import os

import httpx

from .errors import ProviderError
from .prompting import SearchSnippet


class CannedSearchProvider:
    """Deterministic provider backed by a query -> snippet table."""

    def __init__(self, table: dict[str, SearchSnippet]):
        self.table = dict(table)
        self.queries: list[str] = []

    def search(self, query: str) -> SearchSnippet | None:
        self.queries.append(query)
        return self.table.get(query)


class HttpSearchProvider:
    """JSON search API client (Google CSE response shape).

    Expects ``{"items": [{"snippet": ..., "link": ...}, ...]}``; the key is
    read from the environment, never from configuration files.
    """

    def __init__(self, url: str, api_key_env: str = "SEARCH_API_KEY",
                 extra_params: dict | None = None, timeout: float = 30.0):
        self.url = url
        self.api_key_env = api_key_env
        self.extra_params = dict(extra_params or {})
        self.timeout = timeout

    def search(self, query: str) -> SearchSnippet | None:
        key = os.environ.get(self.api_key_env)
        if not key:
            raise ProviderError(
                f"search API key missing: set ${self.api_key_env}"
            )
        params = {"q": query, "key": key, **self.extra_params}
        try:
            response = httpx.get(self.url, params=params, timeout=self.timeout)
            response.raise_for_status()
            payload = response.json()
        except (httpx.HTTPError, ValueError) as exc:
            raise ProviderError(f"web search failed for {query!r}: {exc}") from exc
        items = payload.get("items") or []
        if not items:
            return None
        top = items[0]
        snippet = (top.get("snippet") or "").strip()
        if not snippet:
            return None
        return SearchSnippet(query=query, snippet=snippet, source_url=top.get("link", ""))


class CachedSearchProvider:
    """Wraps any provider with the shared disk cache.

    Zero-result queries are cached too, so reruns never re-query.
    """

    def __init__(self, provider, cache):
        self.provider = provider
        self.cache = cache

    def search(self, query: str) -> SearchSnippet | None:
        key = f"websearch\n{query}"
        hit = self.cache.get(key)
        if hit is not None:
            if not hit.get("found"):
                return None
            return SearchSnippet(
                query=hit["query"], snippet=hit["snippet"], source_url=hit["source_url"]
            )
        snippet = self.provider.search(query)
        if snippet is None:
            self.cache.put(key, {"found": False})
        else:
            self.cache.put(
                key,
                {
                    "found": True,
                    "query": snippet.query,
                    "snippet": snippet.snippet,
                    "source_url": snippet.source_url,
                },
            )
        return snippet
