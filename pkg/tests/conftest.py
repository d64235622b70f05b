from fractions import Fraction
from pathlib import Path

import pytest

from atvkit.process_law import load_law, product_law

DATA = Path(__file__).parent / "data"

# joint tables the fixture files were disintegrated from
MU_JOINT = {
    ("a", "a"): Fraction(1, 10), ("a", "b"): Fraction(2, 10), ("a", "c"): Fraction(1, 10),
    ("b", "a"): Fraction(3, 10), ("b", "c"): Fraction(3, 10),
}
NU_JOINT = {
    ("a", "a"): Fraction(15, 100), ("a", "b"): Fraction(5, 100), ("a", "c"): Fraction(1, 10),
    ("b", "a"): Fraction(3, 10), ("b", "c"): Fraction(4, 10),
}


def read_law(name):
    return load_law((DATA / f"{name}.json").read_text())


@pytest.fixture
def fixture_mu():
    return read_law("fixture_mu")


@pytest.fixture
def fixture_nu():
    return read_law("fixture_nu")


@pytest.fixture
def coin2():
    return product_law([{"H": 0.5, "T": 0.5}] * 2)


def joint_floats(joint):
    return {k: float(v) for k, v in joint.items()}


_ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one pass/fail line for an acceptance criterion."""

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
