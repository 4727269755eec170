import numpy as np
import pytest

from shellsonar.physics import ALUMINIUM, AIR, WATER, ShellTarget
from shellsonar.signal import make_chirp

FS = 1.0e6


@pytest.fixture(scope="session")
def pulse():
    return make_chirp(160e3, 30e3, 1e-3, FS)


@pytest.fixture(scope="session")
def water_shell():
    return ShellTarget(0.05, 0.005, ALUMINIUM, WATER, WATER)


@pytest.fixture(scope="session")
def air_shell():
    return ShellTarget(0.05, 0.005, ALUMINIUM, AIR, WATER)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(number, name, ok, detail):
        ACCEPTANCE.append((number, name, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {number:>2}. {name}: {detail}")
