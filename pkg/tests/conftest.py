from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from lcaobound.driver import ExperimentConfig, load_config

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
ALPHA = 1.0 / np.sqrt(2.0)

# lines collected by tests/test_acceptance.py, printed after the run
ACCEPTANCE_LINES: list[str] = []


def config_path(name: str) -> Path:
    return CONFIG_DIR / name


def load(name: str, **overrides) -> ExperimentConfig:
    return load_config(config_path(name), **overrides)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
