from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from uitasker.evaluation.fixtures import FixtureSet

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def fixtures() -> FixtureSet:
    return FixtureSet.bundled()


@pytest.fixture(scope="session")
def apps(fixtures):
    return fixtures.apps()


@pytest.fixture()
def food(apps):
    return apps["food"]


CRITERIA = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[CRITERIA] = []


@pytest.fixture()
def criterion(request):
    """Call with (label, ok, detail) to log one acceptance line; the line is also printed."""
    lines = request.config.stash[CRITERIA]

    def log(label: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return log


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(CRITERIA, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
