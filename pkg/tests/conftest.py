import json
from pathlib import Path

import pytest

from freeknot.metrics import synthetic_ecg

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def frozen():
    """Reference values computed by the oracles in ``oracles.py``."""
    return json.loads((DATA / "oracle_values.json").read_text())


@pytest.fixture(scope="session")
def ecg_train():
    return synthetic_ecg(20, seed=0)


_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion; printed in the terminal summary."""

    def record(number: int, ok: bool, detail: str):
        _ACCEPTANCE[number] = (bool(ok), detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
