import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gaugeflow.lattice import LatticeSpec  # noqa: E402
from gaugeflow.lie import GroupKind  # noqa: E402

ACCEPTANCE_LINES = []


def record_acceptance(number, name, passed, detail):
    line = f"criterion {number:>2} {name:<34} {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def su2():
    return GroupKind("su2")


@pytest.fixture
def u1():
    return GroupKind("u1")


@pytest.fixture
def lat2():
    return LatticeSpec((4, 4), 0.7)


@pytest.fixture
def lat4():
    return LatticeSpec((3, 3, 3, 3), 1.0)
