"""Readers for REDD-style channel files, labels files, and house layouts.

Channel files are UTF-8 text with one "unix_timestamp power_watts" pair per
line. A labels file maps channel numbers to appliance names. A house layout
is a JSON object declaring the mains channels and the appliance channel map.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import (
    DuplicateChannel,
    EmptySeries,
    FileUnreadable,
    MissingChannel,
    ParseError,
)

_CHANNEL_FILE_RE = re.compile(r"channel_(\d+)")


class Region(str, Enum):
    """Mains wiring convention: US houses meter two mains legs, UK houses one."""

    US = "us"
    UK = "uk"

    @classmethod
    def parse(cls, value: str | Region) -> Region:
        if isinstance(value, Region):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown region {value!r}; expected 'us' or 'uk'") from None


@dataclass(frozen=True)
class RawReading:
    """One active-power sample: epoch seconds and watts."""

    timestamp: int
    power: float


@dataclass
class PowerSeries:
    """Ordered readings for a single metered channel."""

    channel_id: int | str
    readings: list[RawReading]

    def __len__(self) -> int:
        return len(self.readings)

    @property
    def first_timestamp(self) -> int:
        return self.readings[0].timestamp

    @property
    def last_timestamp(self) -> int:
        return self.readings[-1].timestamp

    def validate(self) -> None:
        """Assert the series invariants: non-empty, strictly increasing time."""
        if not self.readings:
            raise EmptySeries(f"channel {self.channel_id} has no readings")
        for prev, cur in zip(self.readings, self.readings[1:]):
            if cur.timestamp <= prev.timestamp:
                raise ValueError(
                    f"channel {self.channel_id}: timestamps not strictly increasing "
                    f"at t={cur.timestamp}"
                )


@dataclass
class HouseLayout:
    """Declared channel wiring for one house."""

    house_id: str
    region: Region
    mains_channels: list[int]
    appliance_channels: dict[str, int] = field(default_factory=dict)

    def validate(self) -> None:
        if not self.mains_channels:
            raise ValueError(f"house {self.house_id}: mains_channels must be non-empty")
        expected = 2 if self.region is Region.US else 1
        if len(self.mains_channels) != expected:
            raise ValueError(
                f"house {self.house_id}: region {self.region.value!r} requires "
                f"{expected} mains channel(s), got {len(self.mains_channels)}"
            )

    def all_channels(self) -> list[int]:
        """Mains channels followed by appliance channels, duplicates removed."""
        seen: list[int] = []
        for ch in list(self.mains_channels) + list(self.appliance_channels.values()):
            if ch not in seen:
                seen.append(ch)
        return seen


def normalize_appliance_name(name: str) -> str:
    """Lowercase and collapse whitespace/hyphen runs to single underscores."""
    return re.sub(r"[\s\-]+", "_", name.strip().lower())


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise FileUnreadable(f"cannot read {path}: {exc}") from exc


def load_channel(path: str | Path, channel_id: int | str | None = None) -> PowerSeries:
    """Parse a two-column channel file into an ordered PowerSeries.

    Readings are sorted by timestamp; duplicate timestamps keep the last
    occurrence in file order. Negative or non-finite power and non-positive
    timestamps are rejected as sensor faults.
    """
    p = Path(path)
    text = _read_text(p)
    by_ts: dict[int, float] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise ParseError(f"expected 'timestamp watts', got {line!r}", line=lineno)
        try:
            ts = int(tokens[0])
            watts = float(tokens[1])
        except ValueError:
            raise ParseError(f"non-numeric token in {line!r}", line=lineno) from None
        if ts <= 0:
            raise ParseError(f"timestamp must be positive, got {ts}", line=lineno)
        if not math.isfinite(watts) or watts < 0:
            raise ParseError(f"invalid power reading {tokens[1]!r}", line=lineno)
        by_ts[ts] = watts
    if not by_ts:
        raise EmptySeries(f"{p} yielded no readings")

    if channel_id is None:
        m = _CHANNEL_FILE_RE.search(p.stem)
        channel_id = int(m.group(1)) if m else p.stem
    readings = [RawReading(ts, by_ts[ts]) for ts in sorted(by_ts)]
    return PowerSeries(channel_id=channel_id, readings=readings)


def parse_labels(path: str | Path) -> dict[int, str]:
    """Parse a labels file into {channel number: normalized appliance name}."""
    text = _read_text(Path(path))
    labels: dict[int, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) < 2:
            raise ParseError(f"expected 'channel name', got {line!r}", line=lineno)
        try:
            channel = int(tokens[0])
        except ValueError:
            raise ParseError(f"channel number expected, got {tokens[0]!r}", line=lineno) from None
        if channel in labels:
            raise DuplicateChannel(channel)
        labels[channel] = normalize_appliance_name(" ".join(tokens[1:]))
    return labels


def serialize_labels(labels: dict[int, str]) -> str:
    """Render a label map back to the on-disk format, one channel per line."""
    return "".join(f"{ch} {labels[ch]}\n" for ch in sorted(labels))


def layout_from_dict(data: dict) -> HouseLayout:
    return HouseLayout(
        house_id=str(data["house_id"]),
        region=Region.parse(data["region"]),
        mains_channels=[int(c) for c in data["mains_channels"]],
        appliance_channels={
            normalize_appliance_name(name): int(ch)
            for name, ch in data.get("appliance_channels", {}).items()
        },
    )


def layout_from_json(path: str | Path) -> HouseLayout:
    """Load a house layout from its JSON config file."""
    try:
        data = json.loads(_read_text(Path(path)))
    except ValueError as exc:
        raise ParseError(f"invalid layout JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError(f"layout file {path} must contain a JSON object")
    return layout_from_dict(data)


def load_house(house_dir: str | Path, layout: HouseLayout) -> dict[int, PowerSeries]:
    """Load every channel declared by the layout from `house_dir`.

    Channel files follow the `channel_<n>.dat` naming convention.
    """
    root = Path(house_dir)
    series: dict[int, PowerSeries] = {}
    for channel in layout.all_channels():
        path = root / f"channel_{channel}.dat"
        if not path.is_file():
            raise MissingChannel(channel)
        series[channel] = load_channel(path, channel_id=channel)
    return series
