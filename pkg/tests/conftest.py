import logging

import pytest

# criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_configure(config):
    logging.getLogger("lortz_euler").setLevel(logging.WARNING)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(str(k).split(".")[0]), str(k))):
        ok, detail = ACCEPTANCE[key]
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {detail}")


@pytest.fixture(scope="session")
def base():
    from lortz_euler.base_state import BaseState
    return BaseState()
