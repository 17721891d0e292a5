import logging

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from sessionlift.encoding import (
    FALLBACK_DURATION,
    build_duration_table,
    encode_all,
    encode_duration,
    encode_frequency,
    vectors_from_csv,
    vectors_to_csv,
)
from sessionlift.eventlog import EventLog, Lifecycle, make_log
from sessionlift.sessions import SessionThreshold, sessionize, sessionize_log

from conftest import trace_of
from oracles import naive_counts


def test_example1_frequency(example1_log, example1_sessions):
    s1, s2 = example1_sessions[0].sessions
    assert encode_frequency(s1, example1_log).values.tolist() == [1, 1, 1, 0]
    assert encode_frequency(s2, example1_log).values.tolist() == [1, 0, 0, 1]
    assert encode_frequency(s2, example1_log).origin == ("s", 1)


def test_repeated_activity():
    log = EventLog((trace_of("x", [("a", 1), ("a", 2), ("a", 3)]), trace_of("y", [("b", 1)])))
    session = sessionize(log.traces[0], SessionThreshold(100)).sessions[0]
    assert encode_frequency(session, log).values.tolist() == [3, 0]


def test_duration_table_example1(example1_sessions):
    # a is non-final at t=1 (next b@3) and t=10 (next d@13): (2 + 3) / 2
    table = build_duration_table(example1_sessions)
    assert table["a"] == 2.5
    assert table["b"] == 1
    assert table["c"] == table["d"] == FALLBACK_DURATION == 0
    assert table.fallback == {"c", "d"}


def test_duration_fallback_is_logged(example1_sessions, caplog):
    with caplog.at_level(logging.WARNING, logger="sessionlift"):
        build_duration_table(example1_sessions)
    assert "session-final" in caplog.text


def test_example1_duration(example1_log, example1_sessions):
    table = build_duration_table(example1_sessions)
    s1, s2 = example1_sessions[0].sessions
    assert encode_duration(s1, table, example1_log).values.tolist() == [2, 1, table["c"], 0]
    assert encode_duration(s2, table, example1_log).values.tolist() == [3, 0, 0, table["d"]]


def test_single_event_session_uses_table(example1_log, example1_sessions):
    table = build_duration_table(example1_sessions)
    lone = sessionize(trace_of("s", [("a", 5)]), SessionThreshold(5)).sessions[0]
    assert encode_duration(lone, table, example1_log).values.tolist() == [2.5, 0, 0, 0]


def test_duration_averages_repeats_within_session():
    log = EventLog((trace_of("x", [("a", 0), ("a", 2), ("b", 6), ("a", 7)]),))
    seqs = sessionize_log(log, SessionThreshold(100))
    table = build_duration_table(seqs)
    vec = encode_duration(seqs[0].sessions[0], table, log).values
    # a: gaps 2 and 4 (the final a is ignored since a has in-session observations)
    assert vec.tolist() == [3.0, 1.0]


def test_encode_all_example1(example1_log, example1_sessions):
    vecs = encode_all(example1_sessions, "frequency", example1_log)
    assert [v.values.tolist() for v in vecs] == [[1, 1, 1, 0], [1, 0, 0, 1]]
    assert [v.origin for v in vecs] == [("s", 0), ("s", 1)]


def test_encode_all_empty(example1_log):
    assert encode_all([], "frequency", example1_log) == []


def test_multiset_keeps_duplicates():
    log = EventLog((trace_of("1", [("a", 0), ("b", 1)]), trace_of("2", [("a", 0), ("b", 1)])))
    vecs = encode_all(sessionize_log(log, SessionThreshold(10)), "freq", log)
    assert [v.values.tolist() for v in vecs] == [[1, 1], [1, 1]]


def test_completion_events_warn(caplog):
    log = make_log([("c", "a", 0, "start"), ("c", "a", 5, "complete")])
    with caplog.at_level(logging.WARNING, logger="sessionlift"):
        encode_all(sessionize_log(log, SessionThreshold(10)), "duration", log)
    assert "completion" in caplog.text
    assert log.traces[0].events[1].lifecycle is Lifecycle.COMPLETE


def test_vectors_csv_round_trip(example1_log, example1_sessions):
    vecs = encode_all(example1_sessions, "duration", example1_log)
    back, alphabet = vectors_from_csv(vectors_to_csv(vecs, example1_log.activity_alphabet))
    assert alphabet == list(example1_log.activity_alphabet)
    assert [v.origin for v in back] == [v.origin for v in vecs]
    assert all(np.array_equal(a.values, b.values) for a, b in zip(back, vecs))


logs = st.lists(
    st.lists(st.tuples(st.sampled_from("abcde"), st.integers(0, 30)), min_size=1, max_size=15),
    min_size=1, max_size=6,
).map(lambda traces: EventLog(tuple(
    trace_of(str(i), [(a, sum(g for _, g in evs[:j + 1])) for j, (a, _) in enumerate(evs)])
    for i, evs in enumerate(traces)
)))


@settings(max_examples=150, deadline=None)
@given(logs, st.integers(1, 40))
def test_frequency_matches_naive_scan(log, delta):
    seqs = sessionize_log(log, SessionThreshold(delta))
    vecs = encode_all(seqs, "frequency", log)
    sessions = [s for seq in seqs for s in seq]
    for v, s in zip(vecs, sessions):
        assert v.values.tolist() == naive_counts([e.activity for e in s], log.activity_alphabet)
        assert v.values.sum() == len(s)


@settings(max_examples=150, deadline=None)
@given(logs, st.integers(1, 40))
def test_duration_bounds_and_determinism(log, delta):
    seqs = sessionize_log(log, SessionThreshold(delta))
    vecs = encode_all(seqs, "duration", log)
    again = encode_all(sessionize_log(log, SessionThreshold(delta)), "duration", log)
    max_gap = max([y.timestamp - x.timestamp for t in log for x, y in zip(t.events, t.events[1:])], default=0)
    index = {a: i for i, a in enumerate(log.activity_alphabet)}
    for v, w, s in zip(vecs, again, [s for seq in seqs for s in seq]):
        assert v.values.tobytes() == w.values.tobytes()
        assert (v.values >= 0).all() and (v.values <= max_gap).all()
        present = {index[e.activity] for e in s}
        assert all(v.values[i] == 0 for i in range(len(index)) if i not in present)
