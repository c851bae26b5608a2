"""Sliding-window inference over a series with context carryover.

Windows are non-overlapping (stride equals the window size, which is what
makes "the previous window" well defined for context injection) and are
processed strictly in temporal order: each window's raw response is
normalized before the next prompt is built, because that prompt may embed
the tail of the previous prediction.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable

import numpy as np

from .client import RawResponse
from .errors import ContextLongerThanWindow, EmptyRun
from .knowledge import ApplianceProfile
from .normalizer import NormalizationOutcome, WindowPrediction, normalize
from .preprocess import StateSeries, UniformSeries
from .prompt import ContextBlock, OneShotExample, PromptConfig, WindowInput, build_prompt


@dataclass
class RunConfig:
    """Everything needed to run one series: prompt shape, backend, materials."""

    prompt: PromptConfig
    backend: Callable[[str], RawResponse]
    profiles: list[ApplianceProfile] | None = None
    example: OneShotExample | None = None
    stride: int | None = None
    segment: str = ""

    def __post_init__(self):
        if self.stride is None:
            self.stride = self.prompt.window_size
        if self.stride != self.prompt.window_size:
            raise ValueError("stride must equal the window size (non-overlapping windows)")


@dataclass
class SeriesResult:
    """Predictions and accounting for one processed series."""

    predictions: dict[str, StateSeries]
    outcomes: list[NormalizationOutcome]
    window_starts: list[int]
    prompt_tokens: int
    completion_tokens: int
    wall_time_s: float
    skipped_tail_slots: int
    skipped_gap_windows: list[int] = field(default_factory=list)
    trace: list[dict] = field(default_factory=list)

    def slot_indices(self) -> np.ndarray:
        """Grid slots covered by the predictions, in prediction order."""
        if not self.window_starts:
            return np.empty(0, dtype=np.int64)
        w = len(next(iter(self.predictions.values()))) // len(self.window_starts)
        return np.concatenate(
            [np.arange(s, s + w, dtype=np.int64) for s in self.window_starts]
        )


def context_tail(prev: WindowPrediction, context_length: int) -> ContextBlock:
    """Last `context_length` predicted states of each appliance, order preserved."""
    if context_length == 0:
        return ContextBlock(tails={name: [] for name in prev.states})
    tails: dict[str, list[int]] = {}
    for name, arr in prev.states.items():
        if context_length > len(arr):
            raise ContextLongerThanWindow(
                f"context length {context_length} exceeds window length {len(arr)}"
            )
        tails[name] = list(arr[-context_length:])
    return ContextBlock(tails=tails)


def _clock_string(epoch_seconds: int) -> str:
    return datetime.fromtimestamp(int(epoch_seconds), tz=timezone.utc).strftime("%H:%M:%S")


def run_series(
    aggregate: UniformSeries,
    truth: dict[str, StateSeries] | None,
    cfg: RunConfig,
) -> SeriesResult:
    """Run sliding-window inference over one aggregate series.

    Windows containing gap slots are skipped without a backend call, and the
    window after a skipped one starts without context, like the first. A
    trailing partial window is skipped and reported. Malformed responses feed
    their all-OFF fallback into the next window's context instead of aborting.
    """
    w = cfg.prompt.window_size
    names = cfg.prompt.appliance_names
    n = len(aggregate)
    if n < w:
        raise EmptyRun(f"series has {n} slots, window needs {w}")
    if truth:
        for name, series in truth.items():
            if len(series) != n:
                raise ValueError(f"truth for {name} is not aligned to the aggregate")

    t0 = time.perf_counter()
    timestamps = aggregate.slot_timestamps()
    collected: dict[str, list[int]] = {name: [] for name in names}
    outcomes: list[NormalizationOutcome] = []
    window_starts: list[int] = []
    skipped_gap_windows: list[int] = []
    trace: list[dict] = []
    prompt_tokens = 0
    completion_tokens = 0
    prev: WindowPrediction | None = None

    for k in range(n // w):
        lo, hi = k * w, (k + 1) * w
        if aggregate.gap_mask[lo:hi].any():
            skipped_gap_windows.append(k)
            prev = None
            continue

        window = WindowInput(
            aggregate_values=tuple(float(v) for v in aggregate.values[lo:hi]),
            timestamps=(
                tuple(_clock_string(t) for t in timestamps[lo:hi])
                if cfg.prompt.include_timestamps
                else None
            ),
        )
        context = None
        if cfg.prompt.include_context and prev is not None:
            context = context_tail(prev, cfg.prompt.context_length)
        prompt_text = build_prompt(
            cfg.prompt, window, context=context,
            profiles=cfg.profiles, example=cfg.example,
        )
        response = cfg.backend(prompt_text)
        prediction, outcome = normalize(
            response.text, names, w, cfg.prompt.explanation_mode
        )
        prev = prediction

        window_starts.append(lo)
        outcomes.append(outcome)
        for name in names:
            collected[name].extend(prediction.states[name])
        prompt_tokens += response.prompt_tokens
        completion_tokens += response.completion_tokens
        trace.append({
            "window": k,
            "start_slot": lo,
            "segment": cfg.segment,
            "prompt_sha256": hashlib.sha256(prompt_text.encode("utf-8")).hexdigest(),
            "prompt_chars": len(prompt_text),
            "outcome": outcome.kind,
            "detail": outcome.detail,
            "prompt_tokens": response.prompt_tokens,
            "completion_tokens": response.completion_tokens,
            "latency_ms": response.latency_ms,
        })

    predictions = {
        name: StateSeries(appliance=name, states=np.asarray(arr, dtype=np.int8))
        for name, arr in collected.items()
    }
    return SeriesResult(
        predictions=predictions,
        outcomes=outcomes,
        window_starts=window_starts,
        prompt_tokens=prompt_tokens,
        completion_tokens=completion_tokens,
        wall_time_s=time.perf_counter() - t0,
        skipped_tail_slots=n - (n // w) * w,
        skipped_gap_windows=skipped_gap_windows,
        trace=trace,
    )
