"""Shared fixtures."""

from __future__ import annotations

import os

import pytest

from active_nav.config import Config, EnvironmentConfig, TaskConfig
from active_nav.const import SLOW_TESTS_ENV


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: acceptance-scale runs")


def pytest_collection_modifyitems(config, items):
    """Skip slow acceptance runs unless asked for."""
    if os.environ.get(SLOW_TESTS_ENV):
        return
    skip = pytest.mark.skip(reason=f"set {SLOW_TESTS_ENV}=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def config() -> Config:
    """Default configuration."""
    return Config()


@pytest.fixture
def single_room_config() -> Config:
    """Mazes made of one small room."""
    return Config(
        environment=EnvironmentConfig(room_rows=1, room_cols=1, min_room=4, max_room=5),
        task=TaskConfig(step_cap=300),
    )


@pytest.fixture
def pair_config() -> Config:
    """Mazes made of two small rooms side by side."""
    return Config(
        environment=EnvironmentConfig(room_rows=1, room_cols=2, min_room=4, max_room=5),
        task=TaskConfig(step_cap=400),
    )
