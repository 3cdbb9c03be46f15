import os
from pathlib import Path

import pytest

from primerace.config import RunConfig
from primerace.lzeros import ZeroStore, default_zero_dir


def pytest_configure(config):
    # a persistent zero cache: RACE_ZERO_DIR when set, otherwise the package default
    os.environ.setdefault("RACE_ZERO_DIR", str(default_zero_dir()))
    config.acceptance_lines = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])


@pytest.fixture(scope="session")
def zero_dir() -> Path:
    return Path(os.environ["RACE_ZERO_DIR"])


@pytest.fixture(scope="session")
def store(zero_dir) -> ZeroStore:
    return ZeroStore(zero_dir)


@pytest.fixture(scope="session")
def zeros_for(store):
    """zeros_for(q, T) -> {Conrey index: ZeroSet}, computed once per session."""
    memo = {}

    def get(q, T):
        if (q, T) not in memo:
            memo[(q, T)] = store.for_modulus(q, T)
        return memo[(q, T)]

    return get


@pytest.fixture(scope="session")
def config(zero_dir) -> RunConfig:
    return RunConfig(zero_dir=str(zero_dir))
