"""Chat-completion backends: an OpenAI-compatible HTTP client with retries,
and a deterministic offline mock for tests and dry runs."""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass
from typing import Callable

import requests

from . import errors
from .prompt import approx_token_count, parse_prompt, split_messages

Backend = Callable[[str], "RawResponse"]


@dataclass
class BackendConfig:
    """Connection settings for an OpenAI-compatible chat-completions endpoint."""

    endpoint: str = "https://api.openai.com/v1"
    model: str = "gpt-4.1-mini"
    api_key_env: str = "OPENAI_API_KEY"
    temperature: float = 0.0
    json_mode: bool = True
    max_retries: int = 3
    timeout: float = 60.0
    backoff_base: float = 0.5

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


@dataclass
class RawResponse:
    """Verbatim model output plus usage accounting."""

    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency_ms: float = 0.0
    retries: int = 0


def complete(prompt: str, config: BackendConfig) -> RawResponse:
    """Send one prompt and return the assistant message verbatim.

    Transport failures, 5xx responses, and 429 rate limits are retried with
    exponential backoff up to `config.max_retries`; auth failures and other
    client errors fail immediately.
    """
    api_key = os.environ.get(config.api_key_env, "").strip()
    if not api_key:
        raise errors.AuthError(f"environment variable {config.api_key_env} is not set")

    system, user = split_messages(prompt)
    body = {
        "model": config.model,
        "messages": [
            {"role": "system", "content": system},
            {"role": "user", "content": user},
        ],
        "temperature": config.temperature,
    }
    if config.json_mode:
        body["response_format"] = {"type": "json_object"}
    url = config.endpoint.rstrip("/") + "/chat/completions"
    headers = {"Authorization": f"Bearer {api_key}"}

    attempts = config.max_retries + 1
    last_error: errors.BackendError | None = None
    for attempt in range(attempts):
        try:
            t0 = time.perf_counter()
            resp = requests.post(url, json=body, headers=headers, timeout=config.timeout)
            latency_ms = (time.perf_counter() - t0) * 1000.0
        except requests.Timeout as exc:
            last_error = errors.Timeout(f"no response within {config.timeout} s: {exc}")
        except requests.RequestException as exc:
            last_error = errors.TransportError(str(exc))
        else:
            if resp.status_code in (401, 403):
                raise errors.AuthError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            if resp.status_code == 429:
                last_error = errors.RateLimited(f"HTTP 429: {resp.text[:200]}")
            elif resp.status_code >= 500:
                last_error = errors.TransportError(
                    f"HTTP {resp.status_code}: {resp.text[:200]}"
                )
            elif resp.status_code != 200:
                raise errors.TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            else:
                return _parse_response(resp, latency_ms, retries=attempt)
        if attempt < attempts - 1:
            time.sleep(config.backoff_base * (2 ** attempt))
    assert last_error is not None
    raise last_error


def _parse_response(resp: requests.Response, latency_ms: float, retries: int) -> RawResponse:
    try:
        data = resp.json()
        content = data["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise errors.TransportError(f"unusable completion payload: {exc}") from exc
    usage = data.get("usage") or {}
    return RawResponse(
        text=content if isinstance(content, str) else "",
        prompt_tokens=int(usage.get("prompt_tokens") or 0),
        completion_tokens=int(usage.get("completion_tokens") or 0),
        latency_ms=latency_ms,
        retries=retries,
    )


def mock_complete(prompt: str, truth_hint=None) -> RawResponse:
    """Deterministic offline backend: a pure function of the prompt text.

    Parses the prompt and marks an appliance ON in every slot where its
    rendered minimum operating power is at or below the aggregate value; with
    no Prior Knowledge section everything stays OFF. Deliberately
    over-predicts whenever ranges overlap, which exercises the normalizer and
    metrics under realistic false-positive behavior.
    """
    del truth_hint  # reserved
    parsed = parse_prompt(prompt)
    w = parsed.window_size
    payload: dict[str, object] = {}
    for name in parsed.appliance_names:
        bounds = parsed.power_ranges.get(name)
        if bounds is None:
            states = [0] * w
        else:
            states = [1 if value >= bounds[0] else 0 for value in parsed.aggregate_values]
        payload[f"{name}_status"] = states
    if parsed.explanation_mode:
        for name in parsed.appliance_names:
            states = payload[f"{name}_status"]
            active = sum(states)
            if active == 0:
                text = (
                    f"No significant power changes matching the {name}'s profile "
                    "were observed; state remains OFF."
                )
            else:
                text = (
                    f"The aggregate power sits inside the {name}'s known operating "
                    f"range in {active} of {w} steps; those steps are marked ON."
                )
            payload[f"{name}_explanation"] = text
    text = json.dumps(payload, separators=(", ", ": "))
    return RawResponse(
        text=text,
        prompt_tokens=approx_token_count(prompt),
        completion_tokens=approx_token_count(text),
        latency_ms=0.0,
    )


def make_backend(selector: str, config: BackendConfig | None = None) -> Backend:
    """Build a `prompt -> RawResponse` callable for "mock" or "http"."""
    if selector == "mock":
        return mock_complete
    if selector == "http":
        if config is None:
            raise ValueError("http backend requires a BackendConfig")
        return lambda prompt: complete(prompt, config)
    raise ValueError(f"unknown backend selector {selector!r}")
