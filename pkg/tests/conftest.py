from __future__ import annotations

import numpy as np
import pytest

#: acceptance results, filled by tests/test_acceptance.py: {label: (passed, detail)}
ACCEPTANCE: dict = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE, key=lambda s: int(s[2:])):
        ok, detail = ACCEPTANCE[label]
        terminalreporter.write_line(f"{label} {'PASS' if ok else 'FAIL'}  {detail}")
