from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

from randexp.base import BaseEnvironment, RandomScalar
from randexp.config import build_environment, build_measure, build_scalar, build_system, load_config

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# criterion number -> (title, passed); filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[str, bool]] = {}


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    for key, value in report.user_properties:
        if key == "acceptance":
            num, title = value
            ACCEPTANCE[num] = (title, report.passed)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        title, ok = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {title}")


@pytest.fixture
def acceptance(record_property):
    def mark(num: int, title: str):
        record_property("acceptance", (num, title))
    return mark


class Scenario:
    """Objects built from a built-in scenario."""

    def __init__(self, name: str):
        self.cfg = load_config(name)
        self.sys = build_system(self.cfg.system, name)
        self.env = build_environment(self.cfg.environment)
        self.dis = build_measure(self.cfg.measure, self.cfg.system)
        self.delta = build_scalar(self.cfg.delta)


@pytest.fixture(scope="session")
def ex1():
    return Scenario("example1_random_shift")


@pytest.fixture(scope="session")
def ex2():
    return Scenario("example2_isometry")


@pytest.fixture(scope="session")
def ex3():
    return Scenario("example3_expanding")


@pytest.fixture(scope="session")
def ex4():
    return Scenario("example4_continuum_mix")


@pytest.fixture(scope="session")
def fair():
    return BaseEnvironment.bernoulli([Fraction(1, 2), Fraction(1, 2)])


@pytest.fixture(scope="session")
def k23():
    return RandomScalar.symbol_table({0: 2, 1: 3})
