import os
import tempfile

import pytest

ACCEPTANCE_LINES: list[str] = []


def pytest_configure(config):
    # one cache per session: repeated curves are computed once, nothing leaks between runs
    if "PLANARSQ_CACHE_DIR" not in os.environ:
        os.environ["PLANARSQ_CACHE_DIR"] = tempfile.mkdtemp(prefix="planarsq-cache-")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def published():
    from planarsq import published_zeta_table

    return published_zeta_table()
