from collections import Counter

import numpy as np
import pytest

from sessionlift.abstraction import CLUSTER_ATTR, SESSION_ATTR, abstract_log
from sessionlift.centroids import ClusterNaming
from sessionlift.clustering import NOISE, ClusterModel
from sessionlift.errors import ClusteringError, NamingError
from sessionlift.eventlog import EventLog, Lifecycle, parse_log, write_log
from sessionlift.sessions import SessionThreshold, sessionize_log

from conftest import trace_of


def fixed_model(labels, dim=1):
    k = max(labels) + 1 if max(labels, default=-1) >= 0 else 0
    return ClusterModel(np.asarray(labels), np.zeros((k, dim)), "kmeans")


def pairs(trace):
    return [(e.activity, e.lifecycle.value, e.timestamp) for e in trace]


def test_example1(example1_log, example1_sessions):
    out = abstract_log(example1_log, example1_sessions, fixed_model([0, 1]), ClusterNaming({0: "X", 1: "Y"}))
    assert pairs(out.traces[0]) == [("X", "start", 1), ("X", "complete", 4), ("Y", "start", 10), ("Y", "complete", 13)]
    assert out.traces[0].case_id == "s"
    assert [e.extra_attributes[SESSION_ATTR] for e in out.traces[0]] == ["0", "0", "1", "1"]
    assert [e.extra_attributes[CLUSTER_ATTR] for e in out.traces[0]] == ["0", "0", "1", "1"]


def test_single_event_session():
    log = EventLog((trace_of("c", [("a", 5)]),))
    out = abstract_log(log, sessionize_log(log, SessionThreshold(1)), fixed_model([0]), ClusterNaming({0: "X"}))
    assert pairs(out.traces[0]) == [("X", "start", 5), ("X", "complete", 5)]


def test_n_single_session_traces():
    log = EventLog(tuple(trace_of(str(i), [("a", 0), ("b", 1)]) for i in range(7)))
    out = abstract_log(log, sessionize_log(log, SessionThreshold(10)), fixed_model([0] * 7), ClusterNaming({0: "X"}))
    assert len(out.traces) == 7 and all(len(t) == 2 for t in out.traces)


def test_noise_session_rejected(example1_log, example1_sessions):
    with pytest.raises(ClusteringError, match="reassign-outliers"):
        abstract_log(example1_log, example1_sessions, fixed_model([0, NOISE]), ClusterNaming({0: "X"}))


def test_missing_name(example1_log, example1_sessions):
    with pytest.raises(NamingError):
        abstract_log(example1_log, example1_sessions, fixed_model([0, 1]), ClusterNaming({0: "X"}))


def test_label_count_must_match(example1_log, example1_sessions):
    with pytest.raises(ValueError):
        abstract_log(example1_log, example1_sessions, fixed_model([0]), ClusterNaming({0: "X"}))


def test_lifecycle_survives_write(example1_log, example1_sessions):
    out = abstract_log(example1_log, example1_sessions, fixed_model([0, 1]), ClusterNaming({0: "X", 1: "Y"}))
    for fmt in ("xes", "csv"):
        back = parse_log(write_log(out, fmt), fmt)
        assert back == out
        assert [e.lifecycle for e in back.traces[0]] == [Lifecycle.START, Lifecycle.COMPLETE] * 2


def test_name_conservation(example1_log, example1_sessions):
    naming = ClusterNaming({0: "X", 1: "Y"})
    out = abstract_log(example1_log, example1_sessions, fixed_model([1, 1]), naming)
    assert Counter(e.activity for e in out.traces[0] if e.lifecycle is Lifecycle.START) == Counter({"Y": 2})
