from __future__ import annotations

from pathlib import Path

import pytest

from clverify.cl import Spec, parse_spec

SPECS = Path(__file__).resolve().parent.parent / "specs"
GOLDEN = Path(__file__).resolve().parent / "golden"


def load(name: str) -> Spec:
    return parse_spec((SPECS / name).read_text())


@pytest.fixture(scope="session")
def ring() -> Spec:
    return load("ring.cl")


@pytest.fixture(scope="session")
def tll() -> Spec:
    return load("tll.cl")


@pytest.fixture(scope="session")
def one_token() -> Spec:
    return load("ring_one_token.cl")


@pytest.fixture(scope="session")
def ternary() -> Spec:
    return load("ternary.cl")


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
