"""Validation and repair of raw model output into per-window predictions.

Every input yields a (prediction, outcome) pair; nothing raises. Responses
with the right structure but wrong array lengths are repaired by padding or
truncation and classified "misaligned"; anything that cannot be parsed into
the required structure is classified "malformed" and replaced by the all-OFF
fallback, OFF being the overwhelmingly dominant state.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Sequence

OUTCOME_OK = "ok"
OUTCOME_MISALIGNED = "misaligned"
OUTCOME_MALFORMED = "malformed"

_OPEN_FENCE_RE = re.compile(r"^```[A-Za-z0-9_]*\s*")
_CLOSE_FENCE_RE = re.compile(r"\s*```$")


@dataclass
class WindowPrediction:
    """Per-appliance binary state lists for one window, plus optional rationales."""

    states: dict[str, list[int]]
    explanations: dict[str, str] | None = None


@dataclass
class NormalizationOutcome:
    """How a raw response was classified: ok, misaligned, or malformed."""

    kind: str
    detail: str = ""
    repaired: bool = False

    def __post_init__(self):
        if self.kind not in (OUTCOME_OK, OUTCOME_MISALIGNED, OUTCOME_MALFORMED):
            raise ValueError(f"unknown outcome kind {self.kind!r}")
        if self.kind == OUTCOME_OK and self.repaired:
            raise ValueError("an ok outcome cannot be marked repaired")


def strip_code_fences(text: str) -> str:
    """Remove a surrounding markdown code fence, if any."""
    t = text.strip()
    if not t.startswith("```"):
        return t
    t = _OPEN_FENCE_RE.sub("", t, count=1)
    t = _CLOSE_FENCE_RE.sub("", t, count=1)
    return t.strip()


def fix_length(values: Sequence[int], window_size: int) -> list[int]:
    """Force a state list to exactly `window_size` entries.

    Longer lists are truncated; shorter ones are padded at the end by
    repeating the final value (0 when empty). The preserved prefix is
    verbatim, and the operation is idempotent.
    """
    if window_size < 1:
        raise ValueError("window_size must be >= 1")
    out = list(values)
    if len(out) >= window_size:
        return out[:window_size]
    pad = out[-1] if out else 0
    return out + [pad] * (window_size - len(out))


def _coerce_state(value) -> int | None:
    """Map booleans and numeric 0/1 to ints; anything else is rejected."""
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, (int, float)):
        if value == 0:
            return 0
        if value == 1:
            return 1
    return None


def normalize(
    raw: str,
    appliances: Sequence[str],
    window_size: int,
    explanation_mode: bool = False,
) -> tuple[WindowPrediction, NormalizationOutcome]:
    """Turn raw model text into a validated prediction plus its classification.

    Processing order: strip code fences, parse a JSON object, require every
    "<name>_status" key, coerce entries to {0,1}, then repair lengths. Any
    structural failure produces the all-OFF fallback with kind "malformed".
    In explanation mode, "<name>_explanation" strings are collected when
    present; their absence is never an error.
    """
    if window_size < 1:
        raise ValueError("window_size must be >= 1")
    appliances = list(appliances)

    def fallback(detail: str):
        prediction = WindowPrediction(
            states={name: [0] * window_size for name in appliances},
            explanations={} if explanation_mode else None,
        )
        return prediction, NormalizationOutcome(OUTCOME_MALFORMED, detail)

    text = raw if isinstance(raw, str) else str(raw)
    try:
        data = json.loads(strip_code_fences(text))
    except ValueError:
        return fallback("response is not parseable JSON")
    if not isinstance(data, dict):
        return fallback("top-level JSON value is not an object")

    states: dict[str, list[int]] = {}
    notes: list[str] = []
    misaligned = False
    for name in appliances:
        key = f"{name}_status"
        if key not in data:
            return fallback(f"missing key {key!r}")
        value = data[key]
        if not isinstance(value, list):
            return fallback(f"{key!r} is not an array")
        coerced: list[int] = []
        for entry in value:
            state = _coerce_state(entry)
            if state is None:
                return fallback(f"{key!r} contains a value outside {{0, 1}}: {entry!r}")
            coerced.append(state)
        if len(coerced) != window_size:
            notes.append(f"{key}: length {len(coerced)} -> {window_size}")
            coerced = fix_length(coerced, window_size)
            misaligned = True
        states[name] = coerced

    explanations: dict[str, str] | None = None
    if explanation_mode:
        explanations = {}
        for name in appliances:
            value = data.get(f"{name}_explanation")
            if isinstance(value, str):
                explanations[name] = value

    prediction = WindowPrediction(states=states, explanations=explanations)
    if misaligned:
        outcome = NormalizationOutcome(OUTCOME_MISALIGNED, "; ".join(notes), repaired=True)
    else:
        outcome = NormalizationOutcome(OUTCOME_OK)
    return prediction, outcome
