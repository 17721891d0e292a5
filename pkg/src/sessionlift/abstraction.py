"""Replace every session by a start/complete pair named after its cluster."""

from __future__ import annotations

from typing import Sequence

from .centroids import ClusterNaming
from .clustering import NOISE, ClusterModel
from .errors import ClusteringError, NamingError, ValidationError
from .eventlog import Event, EventLog, Lifecycle, Trace
from .sessions import SessionSequence

CLUSTER_ATTR = "abstraction:cluster"
SESSION_ATTR = "abstraction:session"


def abstract_log(log: EventLog, sessionized: Sequence[SessionSequence], model: ClusterModel,
                 naming: ClusterNaming) -> EventLog:
    """
    Build the high-level log. ``model.labels`` must follow the order of
    ``encode_all``: trace order, then session order within each trace.

    The start event takes the session's first timestamp and the complete
    event its last. Cluster id and session index ride along as extra
    attributes.
    """
    n_sessions = sum(len(seq) for seq in sessionized)
    if len(model.labels) != n_sessions:
        raise ValidationError(f"model labels {len(model.labels)} sessions, the log has {n_sessions}")
    if len(sessionized) != len(log.traces):
        raise ValidationError(f"{len(sessionized)} session sequences for {len(log.traces)} traces")

    traces = []
    pos = 0
    for trace, seq in zip(log.traces, sessionized):
        if seq.case_id != trace.case_id:
            raise ValidationError("session sequence out of step with the log", seq.case_id)
        events = []
        for session in seq.sessions:
            cid = int(model.labels[pos])
            pos += 1
            if cid == NOISE:
                raise ClusteringError(
                    f"session {session.index} of case {trace.case_id!r} is DBSCAN noise; "
                    "use --reassign-outliers or change eps/min-pts"
                )
            try:
                name = naming[cid]
            except KeyError:
                raise NamingError(f"no name for cluster {cid}") from None
            attrs = {CLUSTER_ATTR: str(cid), SESSION_ATTR: str(session.index)}
            events.append(Event(name, session.first.timestamp, trace.case_id, Lifecycle.START, attrs))
            events.append(Event(name, session.last.timestamp, trace.case_id, Lifecycle.COMPLETE, dict(attrs)))
        traces.append(Trace(trace.case_id, tuple(events)))
    return EventLog(tuple(traces))
