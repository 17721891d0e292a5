"""
``sessionlift`` command line.

Exit codes: 0 success, 2 usage error, 3 data error, 4 clustering error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from typing import TextIO

from . import __version__
from .abstraction import abstract_log
from .centroids import (
    DEFAULT_CONCAT_RATIO,
    DEFAULT_ROW_FILTER,
    ClusterNaming,
    NormalizedCentroids,
    auto_name,
    filter_rows,
    heatmap_svg,
    load_names,
    normalize_centroids,
    top_dimensions,
)
from .clustering import (
    DEFAULT_N_INIT,
    ClusterModel,
    dbscan,
    elbow,
    kmeans,
    min_max_scale,
    reassign_outliers,
    suggest_eps,
)
from .encoding import SessionVector, as_matrix, encode_all, vectors_from_csv, vectors_to_csv
from .errors import DataError, SessionLiftError, UsageError
from .eventlog import EventLog, format_from_path, parse_log, write_log
from .sessions import SessionSequence, SessionThreshold, sessionize_log
from .synth import GroundTruth, SynthSpec, adjusted_rand_index, generate

logger = logging.getLogger("sessionlift")

DEFAULT_K_RANGE = "2..15"
DEFAULT_MIN_PTS = 4


class _Collector(logging.Handler):
    def __init__(self):
        super().__init__(logging.WARNING)
        self.messages: list[str] = []

    def emit(self, record):
        self.messages.append(record.getMessage())


@dataclass
class _Outputs:
    """Artifacts staged in memory and written together, so a failure leaves none behind."""

    files: dict[str, bytes] = field(default_factory=dict)

    def add(self, path: str | None, data: bytes | str):
        if path:
            self.files[path] = data.encode("utf-8") if isinstance(data, str) else data

    def commit(self):
        written = []
        try:
            for path, data in self.files.items():
                with open(path, "wb") as fh:
                    written.append(path)
                    fh.write(data)
        except OSError:
            for path in written:
                try:
                    os.remove(path)
                except OSError:
                    pass
            raise


# -- argument helpers --------------------------------------------------------


def parse_k_range(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition("..")
    try:
        if not sep:
            raise ValueError
        lo_i, hi_i = int(lo), int(hi)
    except ValueError:
        raise UsageError(f"bad k range {text!r}: expected a..b, e.g. 2..15") from None
    if lo_i < 1 or hi_i < lo_i:
        raise UsageError(f"bad k range {text!r}")
    return lo_i, hi_i


def _range_arg(text: str) -> tuple[int, int]:
    return parse_k_range(text)


def _read_input(path: str, fmt: str | None) -> tuple[EventLog, dict]:
    try:
        fmt = fmt or format_from_path(path)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    log = parse_log(data, fmt)
    info = {
        "path": path,
        "format": fmt,
        "sha256": hashlib.sha256(data).hexdigest(),
        "traces": len(log.traces),
        "events": log.n_events,
        "activities": len(log.activity_alphabet),
    }
    return log, info


def _output_format(path: str, fmt: str | None) -> str:
    try:
        return fmt or format_from_path(path)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _encoding_mode(text: str) -> str:
    return {"freq": "frequency", "dur": "duration"}.get(text, text)


# -- pipeline stages ---------------------------------------------------------


def _fit(vectors: list[SessionVector], args, report: dict) -> ClusterModel:
    X = as_matrix(vectors, len(vectors[0].values) if vectors else 0)
    X_fit = min_max_scale(X) if args.scale else X
    clustering: dict = {"algorithm": args.cluster, "scaled": bool(args.scale)}
    if args.cluster == "kmeans":
        if args.k is not None:
            model = kmeans(X_fit, args.k, seed=args.seed, max_iter=args.max_iter, n_init=args.n_init)
        else:
            lo, hi = parse_k_range(args.k_range or DEFAULT_K_RANGE)
            curve = elbow(X_fit, (lo, hi), seed=args.seed, max_iter=args.max_iter, n_init=args.n_init)
            report["elbow"] = {"ks": curve.ks, "wcss": curve.wcss, "selected_k": curve.selected_k, "rule": curve.rule}
            if curve.selected_k is None:
                raise UsageError("k range too short for elbow selection (needs 3 values); pass --k")
            model = curve.models[curve.selected_k]
            report["_elbow_csv"] = curve.to_csv()
    else:
        min_pts = args.min_pts if args.min_pts is not None else DEFAULT_MIN_PTS
        eps = args.eps if args.eps is not None else suggest_eps(X_fit, min_pts)
        model = dbscan(X_fit, eps, min_pts)
        clustering["noise_before_reassignment"] = model.noise_count
    if args.reassign_outliers:
        model = reassign_outliers(model, X_fit)
    if args.scale:
        model = ClusterModel.from_labels(X, model.labels, model.n_clusters, model.algorithm,
                                         {**model.params, "scaled": True})
    clustering.update({"params": model.params, "n_clusters": model.n_clusters,
                       "sizes": model.sizes, "noise": model.noise_count})
    report["clustering"] = clustering
    return model


def prompt_names(nc: NormalizedCentroids, suggestion: ClusterNaming,
                 stdin: TextIO | None = None, stdout: TextIO | None = None) -> ClusterNaming:
    """
    Ask for one name per cluster. An empty answer keeps the suggested name;
    running out of input keeps the suggestions for the remaining clusters.
    """
    stdin = sys.stdin if stdin is None else stdin
    stdout = sys.stdout if stdout is None else stdout
    if stdin is None or stdin.closed:
        logger.warning("no input stream for interactive naming; using automatic names")
        return suggestion
    names = {}
    exhausted = False
    for cid in nc.cluster_ids:
        if exhausted:
            names[cid] = suggestion[cid]
            continue
        print(f"cluster {cid}:", file=stdout)
        for activity, value in top_dimensions(nc, cid, 5):
            print(f"  {value:.4f}  {activity}", file=stdout)
        print(f"name [{suggestion[cid]}]: ", end="", file=stdout, flush=True)
        line = stdin.readline()
        if not line:
            exhausted = True
            logger.warning("naming input ended at cluster %d; remaining clusters keep automatic names", cid)
            names[cid] = suggestion[cid]
            continue
        names[cid] = line.strip() or suggestion[cid]
    changed = any(names[c] != suggestion[c] for c in names)
    return ClusterNaming(names, "user" if changed else "automatic")


def _name_clusters(model: ClusterModel, alphabet, args, report: dict, outputs: _Outputs) -> ClusterNaming:
    nc = normalize_centroids(model, alphabet)
    suggestion = auto_name(nc, args.concat_ratio)
    if args.names_file:
        naming = load_names(args.names_file, model.n_clusters)
    elif args.interactive_names:
        naming = prompt_names(nc, suggestion)
    else:
        naming = suggestion
    shown = filter_rows(nc, args.row_filter)
    if not shown.activities:
        logger.warning("row filter %g removed every activity; heatmap shows all rows", args.row_filter)
        shown = nc
    if args.heatmap_out:
        outputs.add(args.heatmap_out, heatmap_svg(shown, naming))
    report["naming"] = {
        "provenance": naming.provenance,
        "names": {str(c): naming[c] for c in sorted(naming.names)},
        "heatmap_rows": len(shown.activities),
    }
    return naming


def _model_json(model: ClusterModel, alphabet, vectors: list[SessionVector]) -> str:
    doc = {
        "alphabet": list(alphabet),
        "model": model.to_dict(),
        "origins": [[v.origin[0], v.origin[1]] for v in vectors],
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _load_model(path: str) -> tuple[ClusterModel, list[str], list[tuple[str, int]]]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        model = ClusterModel.from_dict(doc["model"])
        origins = [(o[0], int(o[1])) for o in doc["origins"]]
        return model, list(doc["alphabet"]), origins
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise DataError(f"cannot load model {path}: {exc}") from None


def _params(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _dump_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def _default_report_path(output: str) -> str:
    return os.path.splitext(output)[0] + ".report.json"


def _sessionize(log: EventLog, delta: str, report: dict) -> list[SessionSequence]:
    threshold = SessionThreshold.parse(delta)
    sessionized = sessionize_log(log, threshold)
    counts = [len(s) for s in sessionized]
    report["sessions"] = {
        "delta_ms": threshold.delta,
        "count": sum(counts),
        "max_per_trace": max(counts),
        "single_event": sum(1 for seq in sessionized for s in seq if len(s) == 1),
    }
    return sessionized


# -- subcommands -------------------------------------------------------------


def cmd_run(args, report: dict, outputs: _Outputs):
    log, report["input"] = _read_input(args.input, args.input_format)
    out_fmt = _output_format(args.output, args.output_format)
    sessionized = _sessionize(log, args.delta, report)
    mode = _encoding_mode(args.encoding)
    vectors = encode_all(sessionized, mode, log)
    report["encoding"] = {"mode": mode, "dimensions": len(log.activity_alphabet)}
    model = _fit(vectors, args, report)
    elbow_csv = report.pop("_elbow_csv", None)
    if args.elbow_out and elbow_csv is not None:
        outputs.add(args.elbow_out, elbow_csv)
    naming = _name_clusters(model, log.activity_alphabet, args, report, outputs)
    abstract = abstract_log(log, sessionized, model, naming)
    outputs.add(args.output, write_log(abstract, out_fmt))
    outputs.add(args.vectors_out, vectors_to_csv(vectors, log.activity_alphabet))
    outputs.add(args.model_out, _model_json(model, log.activity_alphabet, vectors))
    report["output"] = {"path": args.output, "format": out_fmt, "traces": len(abstract.traces),
                        "events": abstract.n_events}


def cmd_sessionize(args, report: dict, outputs: _Outputs):
    log, report["input"] = _read_input(args.input, args.input_format)
    sessionized = _sessionize(log, args.delta, report)
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["case_id", "session_index", "start_index", "end_index", "first_timestamp", "last_timestamp", "events"])
    for seq in sessionized:
        for s in seq:
            w.writerow([seq.case_id, s.index, s.start, s.end, s.first.timestamp, s.last.timestamp, len(s)])
    return buf.getvalue()


def cmd_encode(args, report: dict, outputs: _Outputs):
    log, report["input"] = _read_input(args.input, args.input_format)
    sessionized = _sessionize(log, args.delta, report)
    vectors = encode_all(sessionized, _encoding_mode(args.encoding), log)
    return vectors_to_csv(vectors, log.activity_alphabet)


def cmd_cluster(args, report: dict, outputs: _Outputs):
    try:
        with open(args.vectors, encoding="utf-8") as fh:
            vectors, alphabet = vectors_from_csv(fh.read())
    except (OSError, ValueError, StopIteration) as exc:
        raise DataError(f"cannot read vectors {args.vectors}: {exc}") from None
    model = _fit(vectors, args, report)
    elbow_csv = report.pop("_elbow_csv", None)
    if args.elbow_out and elbow_csv is not None:
        outputs.add(args.elbow_out, elbow_csv)
    return _model_json(model, alphabet, vectors)


def cmd_name(args, report: dict, outputs: _Outputs):
    model, alphabet, _ = _load_model(args.model)
    naming = _name_clusters(model, alphabet, args, report, outputs)
    return naming.to_tsv()


def cmd_abstract(args, report: dict, outputs: _Outputs):
    log, report["input"] = _read_input(args.input, args.input_format)
    out_fmt = _output_format(args.output, args.output_format)
    sessionized = _sessionize(log, args.delta, report)
    model, alphabet, origins = _load_model(args.model)
    expected = [(seq.case_id, s.index) for seq in sessionized for s in seq]
    if origins != expected:
        raise DataError("model was fitted on different sessions (check --input and --delta)")
    if args.names_file:
        naming = load_names(args.names_file, model.n_clusters)
    else:
        naming = auto_name(normalize_centroids(model, alphabet), args.concat_ratio)
    abstract = abstract_log(log, sessionized, model, naming)
    outputs.add(args.output, write_log(abstract, out_fmt))


def _synth_spec(args) -> SynthSpec:
    if args.spec:
        try:
            with open(args.spec, encoding="utf-8") as fh:
                return SynthSpec.from_toml(fh.read())
        except OSError as exc:
            raise DataError(f"cannot read spec {args.spec}: {exc.strerror}") from None
    delta = SessionThreshold.parse(args.delta).delta
    return SynthSpec.disjoint(
        args.archetypes, args.activities_per_archetype,
        delta=delta,
        inter_gap=(delta, delta * 8),
        n_traces=args.traces,
        sessions_per_trace=args.sessions,
        length=args.session_length,
        intra_gap=(delta // 100, delta // 4),
        seed=args.seed,
    )


def cmd_synth(args, report: dict, outputs: _Outputs):
    spec = _synth_spec(args)
    log, truth = generate(spec)
    outputs.add(args.out, write_log(log, _output_format(args.out, None)))
    outputs.add(args.truth, truth.to_csv())
    report["synth"] = {"traces": len(log.traces), "events": log.n_events, "sessions": len(truth.sessions),
                       "delta_ms": spec.delta, "seed": spec.seed}


def cmd_eval(args, report: dict, outputs: _Outputs):
    try:
        with open(args.truth, encoding="utf-8") as fh:
            truth = GroundTruth.from_csv(fh.read())
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"cannot read truth {args.truth}: {exc}") from None
    model, _, origins = _load_model(args.model)
    planted = truth.label_of()
    missing = [o for o in origins if o not in planted]
    if missing or len(origins) != len(planted):
        raise DataError("model sessions do not line up with the planted sessions")
    ari = adjusted_rand_index([int(x) for x in model.labels], [planted[o] for o in origins])
    result = {"ari": ari, "sessions": len(origins), "noise": model.noise_count}
    return json.dumps(result, sort_keys=True) + "\n"


# -- parser ------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sessionlift", description="Abstract low-level event logs into high-level activity logs.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    inp = argparse.ArgumentParser(add_help=False)
    inp.add_argument("--input", required=True, help="low-level log (.xes or .csv)")
    inp.add_argument("--input-format", choices=["xes", "csv"])
    inp.add_argument("--delta", required=True, help="session threshold, e.g. 15m or 8h")

    enc = argparse.ArgumentParser(add_help=False)
    enc.add_argument("--encoding", choices=["freq", "dur", "frequency", "duration"], default="freq")

    clu = argparse.ArgumentParser(add_help=False)
    clu.add_argument("--cluster", choices=["kmeans", "dbscan"], default="kmeans")
    clu.add_argument("--k", type=int)
    clu.add_argument("--k-range", help=f"elbow search range a..b (default {DEFAULT_K_RANGE})")
    clu.add_argument("--eps", type=float, help="DBSCAN radius (default: median min-pts-NN distance)")
    clu.add_argument("--min-pts", type=int, help=f"DBSCAN density (default {DEFAULT_MIN_PTS})")
    clu.add_argument("--seed", type=int, default=0)
    clu.add_argument("--max-iter", type=int, default=300)
    clu.add_argument("--n-init", type=int, default=DEFAULT_N_INIT, help="k-means restarts, best WCSS kept")
    clu.add_argument("--reassign-outliers", action="store_true")
    clu.add_argument("--scale", action="store_true", help="min-max scale each dimension before clustering")
    clu.add_argument("--elbow-out", help="write the elbow curve as k,wcss CSV")

    nam = argparse.ArgumentParser(add_help=False)
    nam.add_argument("--heatmap-out")
    nam.add_argument("--names-file")
    nam.add_argument("--interactive-names", action="store_true")
    nam.add_argument("--concat-ratio", type=float, default=DEFAULT_CONCAT_RATIO)
    nam.add_argument("--row-filter", type=float, default=DEFAULT_ROW_FILTER)

    rep = argparse.ArgumentParser(add_help=False)
    rep.add_argument("--report", help="run report JSON path")

    s = sub.add_parser("run", parents=[inp, enc, clu, nam, rep], help="full pipeline")
    s.add_argument("--output", required=True)
    s.add_argument("--output-format", choices=["xes", "csv"])
    s.add_argument("--vectors-out")
    s.add_argument("--model-out")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("sessionize", parents=[inp, rep], help="list sessions as CSV")
    s.add_argument("--output")
    s.set_defaults(func=cmd_sessionize)

    s = sub.add_parser("encode", parents=[inp, enc, rep], help="write session vectors as CSV")
    s.add_argument("--output")
    s.set_defaults(func=cmd_encode)

    s = sub.add_parser("cluster", parents=[clu, rep], help="cluster a vectors CSV into a model JSON")
    s.add_argument("--vectors", required=True)
    s.add_argument("--output")
    s.set_defaults(func=cmd_cluster)

    s = sub.add_parser("name", parents=[nam, rep], help="heatmap and names for a model")
    s.add_argument("--model", required=True)
    s.add_argument("--output", help="names TSV")
    s.set_defaults(func=cmd_name)

    s = sub.add_parser("abstract", parents=[inp, rep], help="build the abstract log from a model")
    s.add_argument("--model", required=True)
    s.add_argument("--names-file")
    s.add_argument("--concat-ratio", type=float, default=DEFAULT_CONCAT_RATIO)
    s.add_argument("--output", required=True)
    s.add_argument("--output-format", choices=["xes", "csv"])
    s.set_defaults(func=cmd_abstract)

    s = sub.add_parser("synth", parents=[rep], help="generate a log with planted sessions")
    s.add_argument("--spec", help="TOML spec; overrides the flags below")
    s.add_argument("--archetypes", type=int, default=3)
    s.add_argument("--activities-per-archetype", type=int, default=4)
    s.add_argument("--traces", type=int, default=200)
    s.add_argument("--sessions", type=_range_arg, default=(1, 4), help="sessions per trace a..b")
    s.add_argument("--session-length", type=_range_arg, default=(3, 10), help="events per session a..b")
    s.add_argument("--delta", default="15m")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--truth", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("eval", parents=[rep], help="ARI of a model against planted sessions")
    s.add_argument("--truth", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--output")
    s.set_defaults(func=cmd_eval)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"sessionlift: error: {exc}", file=sys.stderr)
        return 2

    collector = _Collector()
    console = logging.StreamHandler(sys.stderr)
    console.setLevel(logging.WARNING)
    console.setFormatter(logging.Formatter("sessionlift: warning: %(message)s"))
    logger.addHandler(collector)
    logger.addHandler(console)
    logger.setLevel(logging.INFO)
    report: dict = {"command": args.command, "version": __version__, "parameters": _params(args)}
    outputs = _Outputs()
    try:
        text = args.func(args, report, outputs)
        if text is not None:
            if getattr(args, "output", None):
                outputs.add(args.output, text)
            else:
                sys.stdout.write(text)
        report["warnings"] = collector.messages
        report_path = args.report or (_default_report_path(args.output) if args.command == "run" else None)
        outputs.add(report_path, _dump_report(report))
        outputs.commit()
    except SessionLiftError as exc:
        print(f"sessionlift: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"sessionlift: error: {exc}", file=sys.stderr)
        return DataError.exit_code
    finally:
        logger.removeHandler(collector)
        logger.removeHandler(console)
    return 0


if __name__ == "__main__":
    sys.exit(main())
