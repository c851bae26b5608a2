from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from synth import make_config, make_dataset  # noqa: E402


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory) -> Path:
    """Synthetic two-house dataset shared by harness-level tests."""
    root = tmp_path_factory.mktemp("synth")
    return make_dataset(root, n_slots=600)


@pytest.fixture(scope="session")
def day_dataset_dir(tmp_path_factory) -> Path:
    """One full day (14,400 six-second slots) of the same synthetic houses."""
    root = tmp_path_factory.mktemp("synth_day")
    return make_dataset(root, n_slots=14_400)


@pytest.fixture()
def experiment_config(tmp_path, dataset_dir) -> Path:
    return make_config(tmp_path, dataset_dir)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call":
        marker = item.get_closest_marker("criterion")
        if marker:
            status = "PASS" if report.passed else "FAIL"
            num, description = marker.args
            print(f"\nACCEPTANCE {num} {status}: {description}")
