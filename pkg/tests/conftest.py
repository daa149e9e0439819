import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from decoyqkd import ChannelParams, SourceParams, simulate_rates  # noqa: E402

EPS = 1e-10
F_EC = 1.06


@pytest.fixture
def source():
    return SourceParams()


@pytest.fixture
def vacuum_source():
    return SourceParams.with_vacuum()


@pytest.fixture
def channel():
    return ChannelParams()


@pytest.fixture
def rates_at(source):
    def make(length, **kw):
        return simulate_rates(source, ChannelParams(length, **kw))
    return make


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, in criterion order."""
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if getattr(rep, "when", None) != "call":
                continue
            props = dict(rep.user_properties)
            if "criterion" in props:
                lines.append((props["criterion"], outcome.upper()[:4],
                              props.get("detail", "")))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, detail in sorted(lines):
        terminalreporter.write_line(f"criterion {number}: {status}  {detail}")
