"""
Shared fixtures and the slow-test gate.

Tests marked slow train models for minutes; they run only when
ACTIVESPEAKER_RUN_SLOW=1 is set.
"""

import os

import numpy as np
import pytest

from activespeaker.synthetic import build_dataset


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: trains models; enable with ACTIVESPEAKER_RUN_SLOW=1")


def pytest_collection_modifyitems(config, items):
    if os.environ.get("ACTIVESPEAKER_RUN_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="set ACTIVESPEAKER_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def tiny_dataset(tmp_path):
    """Four short speaking / out-of-sync clips on disk."""
    return build_dataset(4, {1: 0.5, 2: 0.5}, tmp_path / "data", seed=3, duration_range_s=(0.2, 0.32))
