#!/usr/bin/env python3
"""Generate a small synthetic two-house dataset plus an experiment config.

Usage: python scripts/make_demo.py [target_dir] [n_slots]

House 2 supplies knowledge (fridge and kettle both cycle); house 1 is the
test house (fridge cycles, kettle stays in standby). Channel files follow
the "unix_timestamp watts" text convention; each house gets labels.dat and
layout.json.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

START_TS = 1_200_000_000  # divisible by the 6 s grid step
STEP = 6


def square_wave(n, period, duty, on_power, off_power, phase=0):
    slots = (np.arange(n) + phase) % period
    return np.where(slots < duty, on_power, off_power).astype(float)


def write_channel(path, values):
    lines = [f"{START_TS + STEP * k} {values[k]:.6f}" for k in range(len(values))]
    lines.append(f"{START_TS + STEP * len(values)} {values[-1]:.6f}")
    path.write_text("\n".join(lines) + "\n")


def make_house(data_dir, house_id, appliances):
    house = data_dir / f"house_{house_id}"
    house.mkdir(parents=True, exist_ok=True)
    aggregate = np.sum(list(appliances.values()), axis=0)
    write_channel(house / "channel_1.dat", 0.6 * aggregate)
    write_channel(house / "channel_2.dat", 0.4 * aggregate)
    labels = ["1 mains", "2 mains"]
    channels = {}
    for i, (name, values) in enumerate(appliances.items(), start=3):
        write_channel(house / f"channel_{i}.dat", values)
        labels.append(f"{i} {name}")
        channels[name] = i
    (house / "labels.dat").write_text("\n".join(labels) + "\n")
    (house / "layout.json").write_text(json.dumps({
        "house_id": house_id,
        "region": "us",
        "mains_channels": [1, 2],
        "appliance_channels": channels,
    }, indent=2) + "\n")


def main() -> int:
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo")
    n = int(sys.argv[2]) if len(sys.argv) > 2 else 2400
    data_dir = target / "data"
    make_house(data_dir, "2", {
        "fridge": square_wave(n, 60, 30, 100.0, 2.0),
        "kettle": square_wave(n, 120, 5, 2500.0, 1.0, phase=30),
    })
    make_house(data_dir, "1", {
        "fridge": square_wave(n, 60, 30, 100.0, 2.0, phase=15),
        "kettle": np.full(n, 1.0),
    })
    config = {
        "data_dir": str(data_dir),
        "knowledge_houses": ["2"],
        "test_houses": ["1"],
        "appliances": {"fridge": 50.0, "kettle": 2000.0},
        "window_size": 100,
        "context_length": 10,
        "components": ["OE", "KI", "CT"],
        "segment_slots": None,
        "seed": 0,
        "backend": "mock",
        "out_dir": str(target / "out"),
    }
    config_path = target / "experiment.json"
    config_path.write_text(json.dumps(config, indent=2) + "\n")
    print(f"wrote {data_dir} and {config_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
