import pytest

from sessionlift.eventlog import Event, EventLog, Trace, make_log
from sessionlift.sessions import SessionThreshold, sessionize_log


def trace_of(case_id, pairs):
    """``pairs`` are ``(activity, timestamp)``."""
    return Trace(case_id, tuple(Event(a, t, case_id) for a, t in pairs))


EXAMPLE1 = [("a", 1), ("b", 3), ("c", 4), ("a", 10), ("d", 13)]

EXAMPLE2_CENTROIDS = [
    (1, 0, 1, 1, 0, 1),
    (40, 0, 2, 0, 0, 0),
    (0, 0, 0, 10, 0, 1),
    (1, 2, 0, 0, 0, 0),
    (0, 0, 2, 2, 2, 1),
]


@pytest.fixture
def example1_trace():
    return trace_of("s", EXAMPLE1)


@pytest.fixture
def example1_log(example1_trace):
    return EventLog((example1_trace,))


@pytest.fixture
def example1_sessions(example1_log):
    return sessionize_log(example1_log, SessionThreshold(5))


@pytest.fixture
def tiny_csv():
    return b"case_id,activity,timestamp\nc1,a,1970-01-01T00:00:01Z\n"


__all__ = ["trace_of", "make_log", "EXAMPLE1", "EXAMPLE2_CENTROIDS"]


ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" ({detail})" if detail else ""))
