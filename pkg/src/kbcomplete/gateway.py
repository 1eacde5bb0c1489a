"""Uniform client over completion- and chat-style LM providers.

A provider returns generated text plus the log-probability of the first
generated token when its API exposes one; chat-style APIs usually do not,
and such generations simply carry no confidence. Confidence is
``exp(first_token_logprob)`` — the first generated token only, a
deliberate heuristic. Every call is appended to a transcript log so runs
can resume and be re-scored offline without new API spend.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import httpx

from .errors import (
    ContentRefusal,
    ProviderError,
    RateLimitError,
    RateLimitSaturated,
)
from .prompting import Prompt

DEFAULT_STOP = ("\n",)
DEFAULT_MOCK_MISS = ("Don't know", -3.0)


def prompt_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class GenerationRequest:
    prompt: Prompt
    max_tokens: int = 32
    temperature: float = 0.0
    stop_sequences: tuple[str, ...] = DEFAULT_STOP

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class Generation:
    text: str
    first_token_logprob: float | None
    provider_id: str
    latency: float = 0.0
    prompt_tokens: int = 0
    completion_tokens: int = 0

    @property
    def confidence(self) -> float | None:
        if self.first_token_logprob is None:
            return None
        return math.exp(self.first_token_logprob)


@dataclass(frozen=True)
class GenerationFailure:
    """Per-item error slot for batch results."""

    error: str
    retryable: bool = True


def _truncate_at_stop(text: str, stop_sequences) -> str:
    cut = len(text)
    for stop in stop_sequences:
        idx = text.find(stop)
        if idx != -1:
            cut = min(cut, idx)
    return text[:cut]


class RateLimiter:
    """Spaces calls at least ``min_interval`` seconds apart, across threads."""

    def __init__(self, min_interval: float = 0.0):
        self.min_interval = min_interval
        self._lock = threading.Lock()
        self._next_free = 0.0

    def acquire(self):
        if self.min_interval <= 0:
            return
        with self._lock:
            now = time.monotonic()
            wait = self._next_free - now
            self._next_free = max(now, self._next_free) + self.min_interval
        if wait > 0:
            time.sleep(wait)


class TranscriptLog:
    """Append-only JSONL transcript, one record per LM call.

    Records carry the prompt hash, generated text, logprob, token counts,
    and price, which is enough to re-score a run offline or resume an
    interrupted one without repeating any successful call.
    """

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._by_hash: dict[str, dict] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as handle:
                for line in handle:
                    line = line.strip()
                    if not line:
                        continue
                    record = json.loads(line)
                    self._by_hash[record["prompt_sha256"]] = record

    def __len__(self):
        return len(self._by_hash)

    def lookup(self, digest: str) -> Generation | None:
        record = self._by_hash.get(digest)
        if record is None:
            return None
        return Generation(
            text=record["text"],
            first_token_logprob=record["logprob"],
            provider_id=record["provider"],
            prompt_tokens=record["prompt_tokens"],
            completion_tokens=record["completion_tokens"],
        )

    def append(self, digest: str, generation: Generation, price: float) -> None:
        record = {
            "prompt_sha256": digest,
            "text": generation.text,
            "logprob": generation.first_token_logprob,
            "provider": generation.provider_id,
            "prompt_tokens": generation.prompt_tokens,
            "completion_tokens": generation.completion_tokens,
            "price": price,
        }
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as handle:
                handle.write(json.dumps(record, sort_keys=True) + "\n")
            self._by_hash[digest] = record


def generate(
    request: GenerationRequest,
    provider,
    transcript: TranscriptLog | None = None,
    rate_limiter: RateLimiter | None = None,
    max_attempts: int = 5,
    backoff: float = 0.5,
) -> Generation:
    """Run one completion, retrying rate limits with exponential backoff.

    Previously transcribed prompts are served from the transcript without
    touching the provider, so a successful result is produced at most
    once. Content refusals are recorded as empty generations with no
    logprob (the pipeline treats them as abstentions); transport errors
    propagate as retryable errors.
    """
    digest = prompt_hash(request.prompt.text)
    if transcript is not None:
        cached = transcript.lookup(digest)
        if cached is not None:
            return cached

    started = time.monotonic()
    attempt = 0
    while True:
        if rate_limiter is not None:
            rate_limiter.acquire()
        try:
            result = provider.complete(
                request.prompt.text,
                max_tokens=request.max_tokens,
                temperature=request.temperature,
                stop_sequences=request.stop_sequences,
            )
            break
        except RateLimitError as exc:
            attempt += 1
            if attempt >= max_attempts:
                raise RateLimitSaturated(
                    f"rate limited after {max_attempts} attempts: {exc}"
                ) from exc
            time.sleep(backoff * (2 ** (attempt - 1)))
        except ContentRefusal:
            result = _RefusalResult()
            break

    text = _truncate_at_stop(result.text, request.stop_sequences)
    generation = Generation(
        text=text,
        first_token_logprob=result.first_token_logprob,
        provider_id=getattr(provider, "id", provider.__class__.__name__),
        latency=time.monotonic() - started,
        prompt_tokens=result.prompt_tokens,
        completion_tokens=result.completion_tokens,
    )
    if transcript is not None:
        price_per_1k = getattr(provider, "price_per_1k", 0.0)
        tokens = generation.prompt_tokens + generation.completion_tokens
        transcript.append(digest, generation, price=tokens * price_per_1k / 1000.0)
    return generation


def batch_generate(
    requests,
    provider,
    max_in_flight: int = 4,
    transcript: TranscriptLog | None = None,
    rate_limiter: RateLimiter | None = None,
    max_attempts: int = 5,
    backoff: float = 0.5,
):
    """Run many requests concurrently; results come back in request order.

    At most ``max_in_flight`` calls are outstanding at once. A failing
    request yields a GenerationFailure in its slot; it never aborts the
    rest of the batch.
    """
    if max_in_flight < 1:
        raise ValueError("max_in_flight must be >= 1")
    requests = list(requests)

    def run_one(request):
        try:
            return generate(
                request,
                provider,
                transcript=transcript,
                rate_limiter=rate_limiter,
                max_attempts=max_attempts,
                backoff=backoff,
            )
        except Exception as exc:  # per-item slot, deliberately broad
            retryable = isinstance(exc, (ProviderError, RateLimitSaturated))
            return GenerationFailure(error=f"{type(exc).__name__}: {exc}", retryable=retryable)

    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        return list(pool.map(run_one, requests))


class _RefusalResult:
    text = ""
    first_token_logprob = None
    prompt_tokens = 0
    completion_tokens = 0


@dataclass
class _ProviderResult:
    text: str
    first_token_logprob: float | None
    prompt_tokens: int = 0
    completion_tokens: int = 0


class MockProvider:
    """Deterministic provider keyed on the prompt's SHA-256 hash.

    Unknown prompts get the configured miss answer (default
    "Don't know" at logprob -3.0). The provider counts in-flight calls so
    tests can observe peak concurrency.
    """

    id = "mock"
    supports_logprobs = True

    def __init__(self, table=None, miss=DEFAULT_MOCK_MISS, price_per_1k=0.02, delay=0.0):
        self.table: dict[str, tuple[str, float]] = dict(table or {})
        self.miss = miss
        self.price_per_1k = price_per_1k
        self.delay = delay
        self.calls = 0
        self.peak_in_flight = 0
        self._in_flight = 0
        self._lock = threading.Lock()

    def add(self, prompt_text: str, completion: str, logprob: float) -> None:
        self.table[prompt_hash(prompt_text)] = (completion, logprob)

    @classmethod
    def from_file(cls, path, **kwargs) -> "MockProvider":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        table = {digest: (text, float(lp)) for digest, (text, lp) in payload.items()}
        return cls(table=table, **kwargs)

    def complete(self, prompt_text, max_tokens, temperature, stop_sequences):
        with self._lock:
            self.calls += 1
            self._in_flight += 1
            self.peak_in_flight = max(self.peak_in_flight, self._in_flight)
        try:
            if self.delay:
                time.sleep(self.delay)
            hit = self.table.get(prompt_hash(prompt_text))
            if hit is None:
                if self.miss is None:
                    raise ProviderError("mock provider has no entry for this prompt")
                hit = self.miss
            text, logprob = hit
            return _ProviderResult(
                text=text,
                first_token_logprob=logprob,
                prompt_tokens=len(prompt_text.split()),
                completion_tokens=len(text.split()) or 1,
            )
        finally:
            with self._lock:
                self._in_flight -= 1


class FlakyProvider:
    """Wraps a provider, failing scripted call indices. Test double."""

    def __init__(self, inner, fail_calls=(), error=RateLimitError):
        self.inner = inner
        self.fail_calls = set(fail_calls)
        self.error = error
        self._calls = 0
        self._lock = threading.Lock()
        self.id = getattr(inner, "id", "flaky")
        self.price_per_1k = getattr(inner, "price_per_1k", 0.0)

    def complete(self, *args, **kwargs):
        with self._lock:
            self._calls += 1
            call_no = self._calls
        if call_no in self.fail_calls:
            raise self.error(f"scripted failure on call {call_no}")
        return self.inner.complete(*args, **kwargs)


class OpenAICompatProvider:
    """Client for OpenAI-compatible HTTP APIs.

    ``style="completion"`` targets ``/completions`` and requests per-token
    logprobs; ``style="chat"`` targets ``/chat/completions``, which does
    not expose them, so generations carry no confidence.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key_env: str = "LM_API_KEY",
        style: str = "completion",
        price_per_1k: float = 0.02,
        timeout: float = 60.0,
    ):
        if style not in ("completion", "chat"):
            raise ValueError("style must be 'completion' or 'chat'")
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.style = style
        self.price_per_1k = price_per_1k
        self.timeout = timeout
        self.id = f"{style}:{model}"

    @property
    def supports_logprobs(self) -> bool:
        return self.style == "completion"

    def _headers(self) -> dict:
        import os

        key = os.environ.get(self.api_key_env, "")
        headers = {"Content-Type": "application/json"}
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, prompt_text, max_tokens, temperature, stop_sequences):
        if self.style == "completion":
            url = f"{self.base_url}/completions"
            payload = {
                "model": self.model,
                "prompt": prompt_text,
                "max_tokens": max_tokens,
                "temperature": temperature,
                "stop": list(stop_sequences),
                "logprobs": 1,
            }
        else:
            url = f"{self.base_url}/chat/completions"
            payload = {
                "model": self.model,
                "messages": [{"role": "user", "content": prompt_text}],
                "max_tokens": max_tokens,
                "temperature": temperature,
                "stop": list(stop_sequences),
            }
        try:
            response = httpx.post(url, json=payload, headers=self._headers(), timeout=self.timeout)
        except httpx.HTTPError as exc:
            raise ProviderError(f"LM transport error: {exc}") from exc
        if response.status_code == 429:
            raise RateLimitError(f"provider rate limit: {response.text[:200]}")
        if response.status_code >= 400:
            raise ProviderError(f"provider HTTP {response.status_code}: {response.text[:200]}")
        body = response.json()
        choice = body["choices"][0]
        if choice.get("finish_reason") == "content_filter":
            raise ContentRefusal("provider refused the prompt")
        usage = body.get("usage", {})
        if self.style == "completion":
            text = choice.get("text", "")
            logprob = None
            logprobs = choice.get("logprobs") or {}
            token_logprobs = logprobs.get("token_logprobs") or []
            if token_logprobs:
                logprob = token_logprobs[0]
        else:
            text = (choice.get("message") or {}).get("content", "")
            logprob = None
        return _ProviderResult(
            text=text,
            first_token_logprob=logprob,
            prompt_tokens=usage.get("prompt_tokens", 0),
            completion_tokens=usage.get("completion_tokens", 0),
        )
