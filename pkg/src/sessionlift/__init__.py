"""Session-based abstraction of low-level event logs into high-level activity logs."""

__version__ = "0.1.0"

from .abstraction import abstract_log
from .centroids import (
    ClusterNaming,
    NormalizedCentroids,
    auto_name,
    filter_rows,
    load_names,
    normalize_centroids,
    normalize_vector,
    render_heatmap,
)
from .clustering import NOISE, ClusterModel, ElbowReport, dbscan, elbow, kmeans, reassign_outliers
from .encoding import (
    DurationTable,
    SessionVector,
    build_duration_table,
    encode_all,
    encode_duration,
    encode_frequency,
)
from .eventlog import Event, EventLog, Lifecycle, Trace, concat_traces, parse_log, read_log, write_log
from .sessions import Session, SessionSequence, SessionThreshold, sessionize, sessionize_log
from .synth import SynthSpec, adjusted_rand_index, generate

__all__ = [
    "__version__",
    "abstract_log",
    "ClusterNaming",
    "NormalizedCentroids",
    "auto_name",
    "filter_rows",
    "load_names",
    "normalize_centroids",
    "normalize_vector",
    "render_heatmap",
    "NOISE",
    "ClusterModel",
    "ElbowReport",
    "dbscan",
    "elbow",
    "kmeans",
    "reassign_outliers",
    "DurationTable",
    "SessionVector",
    "build_duration_table",
    "encode_all",
    "encode_duration",
    "encode_frequency",
    "Event",
    "EventLog",
    "Lifecycle",
    "Trace",
    "concat_traces",
    "parse_log",
    "read_log",
    "write_log",
    "Session",
    "SessionSequence",
    "SessionThreshold",
    "sessionize",
    "sessionize_log",
    "SynthSpec",
    "adjusted_rand_index",
    "generate",
]
