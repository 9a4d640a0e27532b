from __future__ import annotations

import pytest

from campus_sms.storage import MemoryStore, SqliteStore


@pytest.fixture(params=["memory", "sqlite"])
def store(request, tmp_path):
    if request.param == "memory":
        s = MemoryStore()
    else:
        s = SqliteStore(str(tmp_path / "store.db"))
    yield s
    s.close()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    lines = []
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            if "test_acceptance" in rep.nodeid:
                name = rep.nodeid.split("::")[-1]
                lines.append((name, status.upper()))
    if not lines:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, status in sorted(lines):
        terminalreporter.write_line(f"{status:6s} {name}")
