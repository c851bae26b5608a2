"""Per-appliance knowledge profiles: extraction from labeled history and
rendering into injectable prompt text.

A profile captures what a model needs to recognize an appliance in aggregate
power: standby draw, operating power range, run durations, and a short
usage-pattern phrase picked from a fixed rule table so extraction stays
reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NoOnEvents
from .preprocess import GRID_STEP_SECONDS, StateSeries, UniformSeries

PATTERN_BURSTY = "short high-power bursts"
PATTERN_PERIODIC = "periodic cycling"
PATTERN_MULTI_STAGE = "multi-stage cycles with distinct power levels"
PATTERN_INTERMITTENT = "intermittent usage"

# Rule-table parameters for usage-pattern classification.
BURSTY_MAX_ON_SECONDS = 120.0
PERIODIC_MAX_GAP_CV = 0.5
BIMODAL_BINS = 10
BIMODAL_MIN_MODE_SEPARATION_BINS = 2


@dataclass(frozen=True)
class KnowledgeToggle:
    """Which knowledge categories to include when rendering prompt text."""

    include_power_range: bool = True
    include_duration: bool = True
    include_pattern: bool = True


@dataclass
class ApplianceProfile:
    """Statistical summary of one appliance's behavior (durations in seconds)."""

    name: str
    standby_power: float
    on_power_min: float
    on_power_max: float
    avg_on_duration: float
    typical_cycle_duration: float
    usage_pattern: str

    def __post_init__(self):
        if self.on_power_min > self.on_power_max:
            raise ValueError(f"{self.name}: on_power_min exceeds on_power_max")
        if self.standby_power >= self.on_power_min:
            raise ValueError(f"{self.name}: standby power must sit below the ON range")
        if self.avg_on_duration <= 0 or self.typical_cycle_duration <= 0:
            raise ValueError(f"{self.name}: durations must be positive")


def on_runs(states: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of consecutive ON slots as (start index, length) pairs."""
    runs: list[tuple[int, int]] = []
    start = None
    for i, s in enumerate(states):
        if s and start is None:
            start = i
        elif not s and start is not None:
            runs.append((start, i - start))
            start = None
    if start is not None:
        runs.append((start, len(states) - start))
    return runs


def _is_bimodal(on_values: np.ndarray) -> bool:
    """Two separated histogram modes in the ON power distribution."""
    if on_values.size < 4:
        return False
    hist, edges = np.histogram(on_values, bins=BIMODAL_BINS)
    bin_width = edges[1] - edges[0]
    if bin_width <= 0:
        return False
    modes = []
    for i in range(len(hist)):
        left = hist[i - 1] if i > 0 else -1
        right = hist[i + 1] if i < len(hist) - 1 else -1
        if hist[i] > left and hist[i] > right:
            modes.append(i)
    if len(modes) < 2:
        return False
    return (max(modes) - min(modes)) >= BIMODAL_MIN_MODE_SEPARATION_BINS


def classify_usage_pattern(
    on_values: np.ndarray,
    run_lengths: list[int],
    cycle_gaps: list[int],
) -> str:
    """First matching rule wins: bursty, periodic, multi-stage, else intermittent."""
    avg_on_seconds = float(np.mean(run_lengths)) * GRID_STEP_SECONDS
    if avg_on_seconds < BURSTY_MAX_ON_SECONDS:
        return PATTERN_BURSTY
    if cycle_gaps:
        mean_gap = float(np.mean(cycle_gaps))
        if mean_gap > 0 and float(np.std(cycle_gaps)) / mean_gap < PERIODIC_MAX_GAP_CV:
            return PATTERN_PERIODIC
    if _is_bimodal(on_values):
        return PATTERN_MULTI_STAGE
    return PATTERN_INTERMITTENT


def extract_profile(series: UniformSeries, states: StateSeries) -> ApplianceProfile:
    """Build a profile for one appliance from a single aligned history."""
    return extract_profile_pooled([(series, states)], name=states.appliance)


def extract_profile_pooled(
    pairs: list[tuple[UniformSeries, StateSeries]],
    name: str | None = None,
) -> ApplianceProfile:
    """Build a profile from one or more (power, states) histories.

    Run statistics are computed per history and pooled, so runs never merge
    across history boundaries. Gap slots are excluded from power statistics.
    Standby power is the median OFF-slot draw; the ON range spans the 5th to
    95th percentile of ON-slot draws; the typical cycle is the median spacing
    between consecutive ON-run starts.
    """
    if not pairs:
        raise ValueError("at least one (series, states) pair required")
    if name is None:
        name = pairs[0][1].appliance

    on_values: list[np.ndarray] = []
    off_values: list[np.ndarray] = []
    run_lengths: list[int] = []
    cycle_gaps: list[int] = []
    total_slots = 0
    for series, states in pairs:
        if len(series) != len(states):
            raise ValueError(f"{name}: states not aligned to series")
        total_slots += len(series)
        on = states.states.astype(bool)
        valid = ~series.gap_mask
        on_values.append(series.values[on & valid])
        off_values.append(series.values[~on & valid])
        runs = on_runs(states.states)
        run_lengths.extend(length for _, length in runs)
        starts = [start for start, _ in runs]
        cycle_gaps.extend(int(b - a) for a, b in zip(starts, starts[1:]))

    if not run_lengths:
        raise NoOnEvents(f"{name} never turns on in the supplied history")

    on_all = np.concatenate(on_values) if on_values else np.empty(0)
    off_all = np.concatenate(off_values) if off_values else np.empty(0)
    if on_all.size == 0:
        raise NoOnEvents(f"{name} has no usable ON-slot readings (all gaps)")
    standby = float(np.median(off_all)) if off_all.size else 0.0
    on_min = float(np.percentile(on_all, 5))
    on_max = float(np.percentile(on_all, 95))
    avg_on = float(np.mean(run_lengths)) * GRID_STEP_SECONDS
    if cycle_gaps:
        typical_cycle = float(np.median(cycle_gaps)) * GRID_STEP_SECONDS
    else:
        # Single observed run: no start-to-start spacing exists, fall back to
        # the whole observed span as a lower-confidence stand-in.
        typical_cycle = float(total_slots) * GRID_STEP_SECONDS

    return ApplianceProfile(
        name=name,
        standby_power=standby,
        on_power_min=on_min,
        on_power_max=on_max,
        avg_on_duration=avg_on,
        typical_cycle_duration=typical_cycle,
        usage_pattern=classify_usage_pattern(on_all, run_lengths, cycle_gaps),
    )


def render_knowledge(profiles: list[ApplianceProfile], toggle: KnowledgeToggle) -> str:
    """Render one labeled block per appliance, in the given order.

    Categories disabled by the toggle are omitted entirely. Output is a pure
    function of the inputs, byte for byte.
    """
    if not profiles:
        raise ValueError("profiles must be non-empty")
    lines: list[str] = []
    for p in profiles:
        lines.append(f"{p.name}:")
        if toggle.include_power_range:
            lines.append(f"- Stand-by Power: {p.standby_power:.3f} W")
            lines.append(f"- Power Range: {p.on_power_min:.3f}-{p.on_power_max:.3f} W")
        if toggle.include_duration:
            lines.append(
                f"- Duration: average ON duration {p.avg_on_duration:.0f} s, "
                f"typical cycle {p.typical_cycle_duration:.0f} s"
            )
        if toggle.include_pattern:
            lines.append(f"- Usage Pattern: {p.usage_pattern}")
    return "\n".join(lines)


def write_profiles(path: str | Path, profiles: list[ApplianceProfile]) -> None:
    """Save profiles as a JSON object keyed by appliance name."""
    data = {
        p.name: {
            "standby_power": p.standby_power,
            "on_power_min": p.on_power_min,
            "on_power_max": p.on_power_max,
            "avg_on_duration": p.avg_on_duration,
            "typical_cycle_duration": p.typical_cycle_duration,
            "usage_pattern": p.usage_pattern,
        }
        for p in profiles
    }
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_profiles(path: str | Path) -> list[ApplianceProfile]:
    """Load profiles from the JSON format written by `write_profiles`."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValueError(f"profile file {path} must contain a JSON object")
    return [ApplianceProfile(name=name, **fields) for name, fields in data.items()]
