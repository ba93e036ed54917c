"""Provider-agnostic chat-completion access.

Three modes share one code path: live (HTTP round-trips with retry and
backoff), record (live call whose request-hash -> response pair lands in
the fixture directory), and replay (responses served from fixtures with
zero network use). Deterministic replay is what makes the whole pipeline
testable offline.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import httpx
import jsonschema

from .errors import (
    AuthFailure,
    FixtureMiss,
    MalformedOutput,
    ProviderUnavailable,
    SchemaViolation,
)
from .jsonio import read_json, write_canonical

logger = logging.getLogger(__name__)

MODES = ("live", "record", "replay")

CORRECTIVE_INSTRUCTION = (
    "Respond with ONLY valid JSON matching the required structure."
)


@dataclass(frozen=True)
class PromptRequest:
    model_id: str
    user_text: str
    system_text: Optional[str] = None
    temperature: float = 0.0
    max_output_tokens: int = 4096
    request_tag: str = ""

    def __post_init__(self):
        if not self.user_text:
            raise ValueError("user_text must be non-empty")
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError("temperature must be within [0, 1]")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")


@dataclass(frozen=True)
class LlmResponse:
    text: str
    prompt_tokens: int
    completion_tokens: int
    provider_latency_ms: int


@dataclass
class ProviderConfig:
    endpoint_url: str = "https://api.openai.com/v1/chat/completions"
    api_key_ref: str = "PULSE_API_KEY"
    max_retries: int = 2
    backoff_base_ms: int = 250
    mode: str = "replay"
    fixture_dir: Optional[Path] = None
    in_flight_limit: int = 4
    timeout_s: float = 120.0


def request_hash(request: PromptRequest) -> str:
    """Stable content hash identifying a request for fixture lookup.

    Covers exactly (model_id, system_text, user_text, temperature):
    anything that changes what the model would answer, nothing that
    doesn't.
    """
    payload = json.dumps(
        {
            "model_id": request.model_id,
            "system_text": request.system_text,
            "user_text": request.user_text,
            "temperature": request.temperature,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass
class Usage:
    prompt_tokens: int = 0
    completion_tokens: int = 0
    calls: int = 0


class _TransientProviderError(Exception):
    """Internal: provider failure worth retrying (429, 5xx, transport)."""


class HttpTransport:
    """Single HTTP round-trip against an OpenAI-style chat-completions API."""

    def __init__(self, config: ProviderConfig):
        self.config = config

    def _api_key(self) -> str:
        key = os.environ.get(self.config.api_key_ref, "")
        if not key:
            raise AuthFailure(
                f"no API key found in environment variable {self.config.api_key_ref}"
            )
        return key

    def __call__(self, request: PromptRequest) -> LlmResponse:
        messages = []
        if request.system_text:
            messages.append({"role": "system", "content": request.system_text})
        messages.append({"role": "user", "content": request.user_text})
        payload = {
            "model": request.model_id,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        started = time.monotonic()
        try:
            response = httpx.post(
                self.config.endpoint_url,
                json=payload,
                headers={"Authorization": f"Bearer {self._api_key()}"},
                timeout=self.config.timeout_s,
            )
        except httpx.HTTPError as exc:
            raise _TransientProviderError(str(exc)) from exc
        latency_ms = int((time.monotonic() - started) * 1000)

        if response.status_code in (401, 403):
            raise AuthFailure(f"provider rejected credentials ({response.status_code})")
        if response.status_code == 429 or response.status_code >= 500:
            raise _TransientProviderError(f"provider returned {response.status_code}")
        if response.status_code != 200:
            raise ProviderUnavailable(
                f"provider returned {response.status_code}: {response.text[:200]}"
            )

        body = response.json()
        usage = body.get("usage") or {}
        return LlmResponse(
            text=body["choices"][0]["message"]["content"],
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
            provider_latency_ms=latency_ms,
        )


class Gateway:
    """Thread-safe completion client with usage accounting.

    transport may be any callable PromptRequest -> LlmResponse; tests and
    fixture recording swap in in-process stand-ins for the HTTP transport.
    """

    def __init__(
        self,
        config: ProviderConfig,
        transport: Optional[Callable[[PromptRequest], LlmResponse]] = None,
    ):
        if config.mode not in MODES:
            raise ValueError(f"unknown provider mode {config.mode!r}")
        if config.mode in ("record", "replay"):
            if config.fixture_dir is None:
                raise ValueError(f"{config.mode} mode requires fixture_dir")
            config.fixture_dir = Path(config.fixture_dir)
            if config.mode == "replay" and not config.fixture_dir.is_dir():
                raise ValueError(
                    f"replay mode requires fixture_dir to exist: {config.fixture_dir}"
                )
        self.config = config
        self._transport = transport or HttpTransport(config)
        self._slots = threading.BoundedSemaphore(config.in_flight_limit)
        self._lock = threading.Lock()
        self._usage: Dict[str, Usage] = {}
        self.call_count = 0
        self.retries_total = 0
        # (request_tag, request_hash) per completion served, for audits
        self.request_log: list = []

    @property
    def in_flight_limit(self) -> int:
        return self.config.in_flight_limit

    @property
    def usage_by_tag(self) -> Dict[str, Usage]:
        with self._lock:
            return {
                tag: Usage(u.prompt_tokens, u.completion_tokens, u.calls)
                for tag, u in self._usage.items()
            }

    def _account(self, tag: str, response: LlmResponse, digest: str) -> None:
        with self._lock:
            usage = self._usage.setdefault(tag or "untagged", Usage())
            usage.prompt_tokens += response.prompt_tokens
            usage.completion_tokens += response.completion_tokens
            usage.calls += 1
            self.call_count += 1
            self.request_log.append((tag or "untagged", digest))

    def _fixture_path(self, digest: str) -> Path:
        return Path(self.config.fixture_dir) / f"{digest}.json"

    def _call_with_retries(self, request: PromptRequest) -> LlmResponse:
        attempts = self.config.max_retries + 1
        last_error: Optional[Exception] = None
        for attempt in range(attempts):
            try:
                with self._slots:
                    return self._transport(request)
            except _TransientProviderError as exc:
                last_error = exc
                if attempt < attempts - 1:
                    with self._lock:
                        self.retries_total += 1
                    delay = self.config.backoff_base_ms * (2**attempt) / 1000.0
                    logger.warning(
                        "transient provider failure (%s), retrying in %.2fs", exc, delay
                    )
                    time.sleep(delay)
        raise ProviderUnavailable(
            f"retries exhausted after {attempts} attempts: {last_error}"
        )

    def complete(self, request: PromptRequest) -> LlmResponse:
        digest = request_hash(request)
        if self.config.mode == "replay":
            path = self._fixture_path(digest)
            if not path.is_file():
                raise FixtureMiss(request.request_tag, digest)
            recorded = read_json(path)["response"]
            response = LlmResponse(
                text=recorded["text"],
                prompt_tokens=recorded["prompt_tokens"],
                completion_tokens=recorded["completion_tokens"],
                provider_latency_ms=recorded["provider_latency_ms"],
            )
            self._account(request.request_tag, response, digest)
            return response

        response = self._call_with_retries(request)
        if self.config.mode == "record":
            write_canonical(
                self._fixture_path(digest),
                {
                    "request": {
                        "hash": digest,
                        "model_id": request.model_id,
                        "system_text": request.system_text,
                        "user_text": request.user_text,
                        "temperature": request.temperature,
                        "max_output_tokens": request.max_output_tokens,
                        "request_tag": request.request_tag,
                    },
                    "response": {
                        "text": response.text,
                        "prompt_tokens": response.prompt_tokens,
                        "completion_tokens": response.completion_tokens,
                        "provider_latency_ms": response.provider_latency_ms,
                    },
                },
            )
        self._account(request.request_tag, response, digest)
        return response

    def complete_json(self, request: PromptRequest, expected_schema: dict) -> Any:
        """Completion that must come back as JSON matching expected_schema.

        The literal response "null" is the stage-level empty result and is
        returned as None. Parse or validation failures get one corrective
        instruction appended, then identical retries up to max_retries.
        """
        attempts = self.config.max_retries + 1
        current = request
        failure: Optional[Exception] = None
        parse_failed = False
        for attempt in range(attempts):
            response = self.complete(current)
            text = strip_code_fences(response.text).strip()
            if text == "null":
                return None
            try:
                value = json.loads(text)
            except json.JSONDecodeError as exc:
                failure, parse_failed = exc, True
                current = _with_corrective(request)
                continue
            if value is None:
                return None
            try:
                jsonschema.validate(value, expected_schema)
            except jsonschema.ValidationError as exc:
                failure, parse_failed = exc, False
                current = _with_corrective(request)
                continue
            return value
        if parse_failed:
            raise MalformedOutput(
                f"request {request.request_tag!r}: no parseable JSON after "
                f"{attempts} attempts: {failure}"
            )
        raise SchemaViolation(
            f"request {request.request_tag!r}: JSON missing required structure: "
            f"{getattr(failure, 'message', failure)}"
        )


def _with_corrective(request: PromptRequest) -> PromptRequest:
    return replace(
        request, user_text=f"{request.user_text}\n\n{CORRECTIVE_INSTRUCTION}"
    )


_FENCE_RE = re.compile(
    r"^\s*```[a-zA-Z0-9_-]*\s*\n(.*?)\n?\s*```\s*$", re.DOTALL
)


def strip_code_fences(text: str) -> str:
    match = _FENCE_RE.match(text)
    return match.group(1) if match else text


# --- cost estimation ---


@dataclass(frozen=True)
class PriceTable:
    """Per-million-token rates, in the same currency unit as the output."""

    input_per_million: float
    output_per_million: float


@dataclass
class CostEstimate:
    per_stage: Dict[str, float]
    total: float


def estimate_cost(usage_by_tag: Dict[str, Usage], prices: PriceTable) -> CostEstimate:
    per_stage = {
        tag: usage.prompt_tokens / 1_000_000 * prices.input_per_million
        + usage.completion_tokens / 1_000_000 * prices.output_per_million
        for tag, usage in sorted(usage_by_tag.items())
    }
    return CostEstimate(per_stage=per_stage, total=sum(per_stage.values()))
