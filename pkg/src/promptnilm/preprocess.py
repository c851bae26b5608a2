"""Alignment of channels to a uniform 6-second grid, gap filling, mains
summation, and ground-truth ON/OFF derivation by fixed power thresholds."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ArityMismatch, EmptyGrid, GridMismatch, UnfilledGaps
from .ingest import PowerSeries, Region

GRID_STEP_SECONDS = 6

# Fixed ON thresholds in watts (kettle appears in UK houses only).
DEFAULT_ON_THRESHOLDS_WATTS = {
    "microwave": 200.0,
    "fridge": 50.0,
    "dishwasher": 10.0,
    "washing_machine": 20.0,
    "kettle": 2000.0,
}


@dataclass
class UniformSeries:
    """Power values on a fixed 6-second grid.

    `gap_mask[k]` is True when slot k had no source readings and was never
    filled; gap slots hold NaN in `values`.
    """

    start_timestamp: int
    values: np.ndarray
    gap_mask: np.ndarray
    step: int = GRID_STEP_SECONDS

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.gap_mask = np.asarray(self.gap_mask, dtype=bool)
        if self.step != GRID_STEP_SECONDS:
            raise ValueError(f"grid step is fixed at {GRID_STEP_SECONDS} s, got {self.step}")
        if self.values.shape != self.gap_mask.shape or self.values.ndim != 1:
            raise ValueError("values and gap_mask must be 1-D arrays of equal length")

    def __len__(self) -> int:
        return int(self.values.shape[0])

    @property
    def end_timestamp(self) -> int:
        return self.start_timestamp + self.step * len(self)

    def slot_timestamps(self) -> np.ndarray:
        return self.start_timestamp + self.step * np.arange(len(self), dtype=np.int64)

    def has_gaps(self) -> bool:
        return bool(self.gap_mask.any())

    def grid_matches(self, other: "UniformSeries") -> bool:
        return (
            self.start_timestamp == other.start_timestamp
            and self.step == other.step
            and len(self) == len(other)
        )

    def copy(self) -> "UniformSeries":
        return UniformSeries(self.start_timestamp, self.values.copy(), self.gap_mask.copy())


@dataclass
class StateSeries:
    """Binary ON/OFF states for one appliance, aligned to a UniformSeries grid."""

    appliance: str
    states: np.ndarray

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.int8)
        if self.states.ndim != 1:
            raise ValueError("states must be a 1-D array")
        if self.states.size and not np.isin(self.states, (0, 1)).all():
            raise ValueError(f"{self.appliance}: states must be 0 or 1")

    def __len__(self) -> int:
        return int(self.states.shape[0])


@dataclass(frozen=True)
class ApplianceSpec:
    """An appliance name with its fixed ON power threshold."""

    name: str
    on_threshold: float

    def __post_init__(self):
        if self.on_threshold <= 0:
            raise ValueError(f"{self.name}: on_threshold must be positive")


def resample_mean(series: PowerSeries, grid_start: int, grid_end: int) -> UniformSeries:
    """Average raw readings into 6-second slots covering [grid_start, grid_end).

    Slot k covers [grid_start + 6k, grid_start + 6(k+1)); its value is the
    arithmetic mean of the readings whose timestamps fall inside. Slots with
    no readings are marked as gaps.
    """
    if grid_start >= grid_end:
        raise EmptyGrid(f"grid [{grid_start}, {grid_end}) spans no slots")
    span = grid_end - grid_start
    if span % GRID_STEP_SECONDS != 0:
        raise ValueError(f"grid span {span} is not a multiple of {GRID_STEP_SECONDS} s")
    n_slots = span // GRID_STEP_SECONDS

    ts = np.fromiter((r.timestamp for r in series.readings), dtype=np.int64, count=len(series))
    watts = np.fromiter((r.power for r in series.readings), dtype=np.float64, count=len(series))
    in_range = (ts >= grid_start) & (ts < grid_end)
    idx = (ts[in_range] - grid_start) // GRID_STEP_SECONDS

    sums = np.zeros(n_slots, dtype=np.float64)
    counts = np.zeros(n_slots, dtype=np.int64)
    np.add.at(sums, idx, watts[in_range])
    np.add.at(counts, idx, 1)

    gaps = counts == 0
    values = np.full(n_slots, np.nan, dtype=np.float64)
    np.divide(sums, counts, out=values, where=~gaps)
    return UniformSeries(grid_start, values, gaps)


def backfill(series: UniformSeries, limit: int = 1) -> UniformSeries:
    """Fill gap slots from the nearest following non-gap slot.

    A gap is filled only when the next originally valid slot is at most
    `limit` positions ahead, so a run of gaps keeps all but its final
    `limit` slots unfilled.
    """
    if limit < 0:
        raise ValueError("limit must be >= 0")
    out = series.copy()
    if limit == 0 or not series.has_gaps():
        return out
    next_valid = -1
    for i in range(len(series) - 1, -1, -1):
        if not series.gap_mask[i]:
            next_valid = i
        elif next_valid >= 0 and next_valid - i <= limit:
            out.values[i] = series.values[next_valid]
            out.gap_mask[i] = False
    return out


def aggregate_mains(mains: list[UniformSeries], region: Region) -> UniformSeries:
    """Combine mains channels into whole-house aggregate power.

    US-style wiring sums exactly two mains legs slot by slot; UK-style passes
    the single mains channel through. A slot is a gap iff any input slot is.
    """
    region = Region.parse(region)
    expected = 2 if region is Region.US else 1
    if len(mains) != expected:
        raise ArityMismatch(region.value, len(mains))
    head = mains[0]
    for other in mains[1:]:
        if not head.grid_matches(other):
            raise GridMismatch("mains channels disagree on grid start/step/length")
    if region is Region.UK:
        return head.copy()

    gap = np.zeros(len(head), dtype=bool)
    total = np.zeros(len(head), dtype=np.float64)
    for m in mains:
        gap |= m.gap_mask
        total += np.where(m.gap_mask, 0.0, m.values)
    total[gap] = np.nan
    return UniformSeries(head.start_timestamp, total, gap)


def threshold_states(appliance_series: UniformSeries, spec: ApplianceSpec) -> StateSeries:
    """Derive ground-truth states: ON when power >= the appliance threshold.

    The comparison is inclusive, so a reading exactly at the threshold
    counts as ON.
    """
    if appliance_series.has_gaps():
        raise UnfilledGaps(
            f"{spec.name}: {int(appliance_series.gap_mask.sum())} gap slot(s) remain"
        )
    states = (appliance_series.values >= spec.on_threshold).astype(np.int8)
    return StateSeries(appliance=spec.name, states=states)


def common_grid(channels: list[PowerSeries]) -> tuple[int, int]:
    """Grid bounds shared by all channels of a house.

    Start is the latest first-timestamp rounded down to a multiple of 6;
    end is chosen so the span is a whole number of slots not extending past
    the earliest last-timestamp.
    """
    if not channels:
        raise EmptyGrid("no channels")
    first = max(s.first_timestamp for s in channels)
    last = min(s.last_timestamp for s in channels)
    start = first - (first % GRID_STEP_SECONDS)
    n_slots = (last - start) // GRID_STEP_SECONDS
    if n_slots <= 0:
        raise EmptyGrid(f"channels share no usable span (first={first}, last={last})")
    return start, start + n_slots * GRID_STEP_SECONDS


def fill_gaps(series: UniformSeries, fill_value: float = 0.0) -> UniformSeries:
    """Return a gap-free copy with remaining gaps replaced by `fill_value`.

    Meant for slots that downstream evaluation will exclude anyway (windows
    containing gaps are skipped), never as a data-cleaning step.
    """
    out = series.copy()
    out.values[out.gap_mask] = fill_value
    out.gap_mask[:] = False
    return out


def export_csv(
    path: str | Path,
    aggregate: UniformSeries,
    states: dict[str, StateSeries] | None = None,
) -> None:
    """Write "timestamp,aggregate,<name>_state,..." rows for inspection."""
    states = states or {}
    for s in states.values():
        if len(s) != len(aggregate):
            raise GridMismatch(f"{s.appliance}: state length differs from aggregate")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "aggregate"] + [f"{name}_state" for name in states])
        ts = aggregate.slot_timestamps()
        for k in range(len(aggregate)):
            value = "" if aggregate.gap_mask[k] else f"{aggregate.values[k]:.3f}"
            writer.writerow(
                [int(ts[k]), value] + [int(states[name].states[k]) for name in states]
            )
