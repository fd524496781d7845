"""Completions-endpoint client: retries, response cache, run log, mock.

Speaks the de-facto commercial completions wire protocol (JSON POST with
model/prompt/temperature/max_tokens, choices[0].text in the reply) and
its chat variant, where the prompt is wrapped as a single user message.

Identical requests are served from an on-disk cache keyed by
(model name, prompt text, temperature), so re-running a sweep never
re-bills. Every completed request is appended to a line-delimited run
log for auditing and cost accounting.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import requests
import yaml

from .errors import ConfigError, RequestError, TransportError
from .prompts import Prompt, estimate_tokens

RETRYABLE_STATUSES = {429, 500, 502, 503, 504}


@dataclass(frozen=True)
class RetryPolicy:
    max_retries: int = 3
    base_backoff: float = 0.5


@dataclass(frozen=True)
class Pricing:
    input_rate: float
    output_rate: float
    currency: str = "USD"


@dataclass(frozen=True)
class ModelEndpoint:
    """Where and how to reach a model.

    max_output_tokens and stop are defaults for requests built against
    this endpoint; the shipped values (16 tokens, stop at a blank line)
    suit single-line label answers and are freely configurable.
    """

    base_url: str
    model_name: str
    auth_env: str | None = "OPENAI_API_KEY"
    api_style: str = "completions"  # or "chat"
    max_in_flight: int = 4
    retry_policy: RetryPolicy = RetryPolicy()
    pricing: Pricing | None = None
    max_output_tokens: int = 16
    stop: tuple[str, ...] = ("\n\n",)

    def __post_init__(self):
        if self.max_in_flight < 1:
            raise ConfigError("max_in_flight must be >= 1")
        if self.api_style not in ("completions", "chat"):
            raise ConfigError(f"unknown api style {self.api_style!r}")


@dataclass(frozen=True)
class CompletionRequest:
    prompt: Prompt | str
    temperature: float = 0.0
    max_output_tokens: int = 16
    stop: tuple[str, ...] = ("\n\n",)

    def __post_init__(self):
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")

    @property
    def prompt_text(self) -> str:
        return self.prompt.text if isinstance(self.prompt, Prompt) else self.prompt


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int
    completion_tokens: int


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    usage: Usage | None
    latency: float
    cache_hit: bool = False


def prompt_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def cache_key(model_name: str, prompt_text: str, temperature: float) -> str:
    material = "\x1f".join([model_name, repr(float(temperature)), prompt_text])
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


class ResponseCache:
    """Disk cache of completions, one JSON file per request key."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str) -> dict | None:
        with self._lock:
            path = self._path(key)
            if not path.exists():
                return None
            return json.loads(path.read_text(encoding="utf-8"))

    def put(self, key: str, record: dict) -> None:
        with self._lock:
            self._path(key).write_text(
                json.dumps(record, ensure_ascii=False), encoding="utf-8"
            )


class _TransientFailure(Exception):
    def __init__(self, status=None, message=""):
        super().__init__(message)
        self.status = status


class HttpTransport:
    """One-shot HTTP POST to a completions or chat endpoint."""

    def __init__(self, timeout: float = 60.0):
        self.timeout = timeout

    def send(self, endpoint: ModelEndpoint, request: CompletionRequest) -> tuple[str, Usage | None]:
        headers = {"Content-Type": "application/json"}
        if endpoint.auth_env:
            token = os.environ.get(endpoint.auth_env)
            if not token:
                raise ConfigError(
                    f"auth variable {endpoint.auth_env} is not set in the environment"
                )
            headers["Authorization"] = f"Bearer {token}"

        base = endpoint.base_url.rstrip("/")
        if endpoint.api_style == "chat":
            url = f"{base}/chat/completions"
            body = {
                "model": endpoint.model_name,
                "messages": [{"role": "user", "content": request.prompt_text}],
                "temperature": request.temperature,
                "max_tokens": request.max_output_tokens,
            }
        else:
            url = f"{base}/completions"
            body = {
                "model": endpoint.model_name,
                "prompt": request.prompt_text,
                "temperature": request.temperature,
                "max_tokens": request.max_output_tokens,
            }
        if request.stop:
            body["stop"] = list(request.stop)

        try:
            resp = requests.post(url, json=body, headers=headers, timeout=self.timeout)
        except requests.RequestException as exc:
            raise _TransientFailure(message=str(exc)) from exc

        if resp.status_code in RETRYABLE_STATUSES:
            raise _TransientFailure(status=resp.status_code, message=resp.text[:200])
        if resp.status_code >= 400:
            raise RequestError(
                f"endpoint rejected request: {resp.status_code} {resp.text[:200]}",
                status=resp.status_code,
            )

        payload = resp.json()
        choice = payload["choices"][0]
        text = choice["message"]["content"] if "message" in choice else choice["text"]
        usage = None
        if payload.get("usage"):
            usage = Usage(
                prompt_tokens=int(payload["usage"].get("prompt_tokens", 0)),
                completion_tokens=int(payload["usage"].get("completion_tokens", 0)),
            )
        return text, usage


class MockTransport:
    """Deterministic stand-in: answers from a fixtures table, no network.

    Fixtures map a prompt hash (sha256 of the prompt text) to a response
    string; unmapped prompts get the fixture default. Usage fields are
    filled with token estimates so cost accounting stays exercised.
    """

    def __init__(self, fixtures: dict):
        self.responses = dict(fixtures.get("responses", {}))
        self.default = fixtures.get("default", "")
        self.calls = 0
        self._lock = threading.Lock()

    def send(self, endpoint: ModelEndpoint, request: CompletionRequest) -> tuple[str, Usage]:
        with self._lock:
            self.calls += 1
        text = self.responses.get(prompt_hash(request.prompt_text), self.default)
        usage = Usage(
            prompt_tokens=estimate_tokens(request.prompt_text),
            completion_tokens=estimate_tokens(text),
        )
        return text, usage


def load_mock_fixtures(path: str | Path) -> MockTransport:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"mock fixture file not found: {path}")
    return MockTransport(json.loads(path.read_text(encoding="utf-8")))


@dataclass
class ItemError:
    instance_id: str
    kind: str
    message: str


@dataclass
class BatchResult:
    results: list[tuple[str, CompletionResponse]]
    errors: list[ItemError] = field(default_factory=list)


class Gateway:
    """Binds an endpoint to a transport, a cache, and a run log."""

    def __init__(
        self,
        endpoint: ModelEndpoint,
        transport=None,
        cache: ResponseCache | None = None,
        run_log_path: str | Path | None = None,
        run_id: str = "run",
    ):
        self.endpoint = endpoint
        self.transport = transport or HttpTransport()
        self.cache = cache
        self.run_log_path = Path(run_log_path) if run_log_path else None
        self.run_id = run_id

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        """Send one request, retrying transient failures with backoff.

        A repeat of a previously answered (model, prompt, temperature)
        triple is served from the cache with no transport call.
        """
        text = request.prompt_text
        if not text:
            raise ConfigError("refusing to send an empty prompt")

        key = cache_key(self.endpoint.model_name, text, request.temperature)
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                usage = Usage(**hit["usage"]) if hit.get("usage") else None
                return CompletionResponse(hit["text"], usage, 0.0, cache_hit=True)

        policy = self.endpoint.retry_policy
        last: _TransientFailure | None = None
        for attempt in range(policy.max_retries + 1):
            started = time.monotonic()
            try:
                answer, usage = self.transport.send(self.endpoint, request)
            except _TransientFailure as failure:
                last = failure
                if attempt < policy.max_retries:
                    time.sleep(policy.base_backoff * (2**attempt))
                continue
            latency = time.monotonic() - started
            if self.cache is not None:
                self.cache.put(
                    key,
                    {
                        "text": answer,
                        "usage": usage.__dict__ if usage else None,
                        "model": self.endpoint.model_name,
                        "prompt_hash": prompt_hash(text),
                    },
                )
            return CompletionResponse(answer, usage, latency, cache_hit=False)
        assert last is not None
        raise TransportError(
            f"retries exhausted after {policy.max_retries + 1} attempts: {last}",
            status=last.status,
            attempts=policy.max_retries + 1,
        )

    def annotate_batch(self, items: list[tuple[str, Prompt | str]]) -> BatchResult:
        """Complete one prompt per instance with bounded concurrency.

        At most max_in_flight requests are outstanding at once. Results
        come back in input order regardless of completion order, and
        every successful response is appended to the run log (in input
        order) before this returns. Hard per-item failures land in the
        error manifest instead of aborting the batch.
        """
        ids = [instance_id for instance_id, _ in items]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate instance ids in batch")

        outcomes: list[CompletionResponse | ItemError] = [None] * len(items)  # type: ignore

        def work(index: int):
            instance_id, prompt = items[index]
            try:
                outcomes[index] = self.complete(CompletionRequest(
                    prompt=prompt,
                    max_output_tokens=self.endpoint.max_output_tokens,
                    stop=self.endpoint.stop,
                ))
            except TransportError as exc:
                outcomes[index] = ItemError(instance_id, "transport", str(exc))
            except (RequestError, ConfigError) as exc:
                outcomes[index] = ItemError(instance_id, "request", str(exc))

        with ThreadPoolExecutor(max_workers=self.endpoint.max_in_flight) as pool:
            list(pool.map(work, range(len(items))))

        results = []
        errors = []
        log_entries = []
        for (instance_id, prompt), outcome in zip(items, outcomes):
            if isinstance(outcome, ItemError):
                errors.append(outcome)
                continue
            results.append((instance_id, outcome))
            text = prompt.text if isinstance(prompt, Prompt) else prompt
            log_entries.append(
                {
                    "run_id": self.run_id,
                    "instance_id": instance_id,
                    "model": self.endpoint.model_name,
                    "prompt_hash": prompt_hash(text),
                    "response_text": outcome.text,
                    "usage": outcome.usage.__dict__ if outcome.usage else None,
                    "timestamp": time.time(),
                }
            )
        self._append_run_log(log_entries)
        return BatchResult(results=results, errors=errors)

    def _append_run_log(self, entries: list[dict]) -> None:
        if self.run_log_path is None or not entries:
            return
        self.run_log_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.run_log_path, "a", encoding="utf-8") as fh:
            for entry in entries:
                fh.write(json.dumps(entry, ensure_ascii=False) + "\n")


def load_endpoint(path: str | Path) -> ModelEndpoint:
    """Read an endpoint config (YAML): url, model, auth, limits, pricing."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"endpoint config not found: {path}")
    doc = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    for required in ("base_url", "model"):
        if required not in doc:
            raise ConfigError(f"endpoint config needs a {required!r} field")
    retry = doc.get("retry", {})
    pricing = None
    if "pricing" in doc:
        pricing = Pricing(
            input_rate=float(doc["pricing"]["input_rate"]),
            output_rate=float(doc["pricing"]["output_rate"]),
            currency=str(doc["pricing"].get("currency", "USD")),
        )
    return ModelEndpoint(
        base_url=str(doc["base_url"]),
        model_name=str(doc["model"]),
        auth_env=doc.get("auth_env", "OPENAI_API_KEY"),
        api_style=str(doc.get("api_style", "completions")),
        max_in_flight=int(doc.get("max_in_flight", 4)),
        retry_policy=RetryPolicy(
            max_retries=int(retry.get("max_retries", 3)),
            base_backoff=float(retry.get("base_backoff", 0.5)),
        ),
        pricing=pricing,
        max_output_tokens=int(doc.get("max_output_tokens", 16)),
        stop=tuple(doc.get("stop", ["\n\n"])),
    )
