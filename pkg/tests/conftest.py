"""Shared fixtures and the acceptance-criteria summary."""

from __future__ import annotations

import pytest

from catins.env import build_world
from helpers import ACCEPTANCE_LINES, make_config


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def world_factory():
    """Small world whose households and insurers a test can overwrite."""

    def make(n=4, m0=1, government=True, seed=0, **env):
        return build_world(make_config(n=n, m0=m0, **env), seed=seed, government=government)

    return make
