import functools

import pytest

from descentopt.optimal.generator import generate_trajectory
from descentopt.scenario import builtin_aircraft_path, builtin_scenario, builtin_scenario_names
from descentopt.performance import load_aircraft

SCENARIOS = builtin_scenario_names()


@functools.lru_cache(maxsize=None)
def scenario(name):
    return builtin_scenario(name)


@functools.lru_cache(maxsize=None)
def trajectory(name):
    return generate_trajectory(scenario(name))


@pytest.fixture(scope="session")
def syn735():
    return load_aircraft(builtin_aircraft_path("SYN735"))


@pytest.fixture(scope="session")
def calm_fuel():
    return scenario("syn735_fuel_calm")


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(number, passed, detail):
        status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        line = f"ACCEPTANCE {number}: {status}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
