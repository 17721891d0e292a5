"""Centroid normalization, heatmap rendering and cluster naming."""

from __future__ import annotations

import logging
import os
from collections import Counter
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .clustering import ClusterModel
from .errors import NamingError

logger = logging.getLogger(__name__)

DEFAULT_CONCAT_RATIO = 0.5
DEFAULT_ROW_FILTER = 0.05


@dataclass(frozen=True)
class NormalizedCentroids:
    matrix: np.ndarray
    """Rows are activities, columns are clusters."""
    activities: tuple[str, ...]
    cluster_ids: tuple[int, ...]

    def column(self, cluster_id: int) -> np.ndarray:
        return self.matrix[:, self.cluster_ids.index(cluster_id)]


@dataclass(frozen=True)
class ClusterNaming:
    names: dict[int, str]
    provenance: str = "automatic"

    def __getitem__(self, cluster_id: int) -> str:
        return self.names[cluster_id]

    def __post_init__(self):
        for cid, name in self.names.items():
            if not name:
                raise NamingError(f"empty name for cluster {cid}")
        dupes = sorted(n for n, c in Counter(self.names.values()).items() if c > 1)
        if dupes:
            logger.warning("several clusters share a name and will merge downstream: %s", ", ".join(dupes))

    def to_tsv(self) -> str:
        return "".join(f"{cid}\t{self.names[cid]}\n" for cid in sorted(self.names))


def normalize_vector(values: Sequence) -> list:
    """
    Divide each component by the component sum. Keeps the numeric type of the
    input, so integers or ``Fraction`` values normalize exactly.
    An all-zero vector stays all-zero.
    """
    total = sum(values)
    if total == 0:
        return [v * 0 for v in values]
    return [v / total for v in values]


def normalize_centroids(model: ClusterModel, activities: Sequence[str]) -> NormalizedCentroids:
    columns = [normalize_vector([float(x) for x in c]) for c in model.centroids]
    matrix = np.array(columns, dtype=float).T.reshape(len(activities), model.n_clusters)
    return NormalizedCentroids(matrix, tuple(activities), tuple(range(model.n_clusters)))


def filter_rows(nc: NormalizedCentroids, threshold: float) -> NormalizedCentroids:
    """Drop activities whose value is below ``threshold`` in every cluster."""
    if nc.matrix.size == 0:
        return nc
    keep = np.flatnonzero(nc.matrix.max(axis=1) >= threshold)
    return NormalizedCentroids(nc.matrix[keep], tuple(nc.activities[i] for i in keep), nc.cluster_ids)


# -- naming ------------------------------------------------------------------


def auto_name(nc: NormalizedCentroids, concat_ratio: float = DEFAULT_CONCAT_RATIO) -> ClusterNaming:
    """
    Name each cluster after its strongest activity, joined with ``" & "`` to
    every other activity reaching ``concat_ratio`` times the strongest value.
    """
    if not 0 < concat_ratio <= 1:
        raise ValueError(f"concat_ratio must lie in (0, 1], got {concat_ratio}")
    names = {}
    for j, cid in enumerate(nc.cluster_ids):
        names[cid] = _name_column(nc.matrix[:, j], nc.activities, cid, concat_ratio)
    return ClusterNaming(names, "automatic")


def _name_column(col, activities, cid, ratio) -> str:
    top = float(col.max()) if len(col) else 0.0
    if top <= 0:
        logger.warning("cluster %d has an all-zero centroid, naming it cluster_%d", cid, cid)
        return f"cluster_{cid}"
    picked = [(-float(v), a) for v, a in zip(col, activities) if v >= ratio * top]
    return " & ".join(a for _, a in sorted(picked))


def top_dimensions(nc: NormalizedCentroids, cluster_id: int, n: int = 5) -> list[tuple[str, float]]:
    col = nc.column(cluster_id)
    ranked = sorted(zip(nc.activities, col), key=lambda p: (-p[1], p[0]))
    return [(a, float(v)) for a, v in ranked[:n] if v > 0]


def load_names(path: str | os.PathLike, cluster_ids: Sequence[int] | int) -> ClusterNaming:
    """
    Read a ``cluster_id<TAB>name`` file. Every id in ``cluster_ids`` must
    appear exactly once; ``#`` starts a comment line.
    """
    with open(path, encoding="utf-8") as fh:
        return parse_names(fh.read(), cluster_ids)


def parse_names(text: str, cluster_ids: Sequence[int] | int) -> ClusterNaming:
    expected = set(range(cluster_ids)) if isinstance(cluster_ids, int) else set(cluster_ids)
    names: dict[int, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cid_text, sep, name = line.partition("\t")
        if not sep:
            raise NamingError(f"line {lineno}: expected cluster_id<TAB>name")
        try:
            cid = int(cid_text.strip())
        except ValueError:
            raise NamingError(f"line {lineno}: cluster id {cid_text!r} is not an integer") from None
        name = name.strip()
        if not name:
            raise NamingError(f"line {lineno}: empty name for cluster {cid}")
        if cid in names:
            raise NamingError(f"line {lineno}: cluster {cid} named twice")
        names[cid] = name
    unknown = sorted(set(names) - expected)
    if unknown:
        raise NamingError(f"unknown cluster id(s): {', '.join(map(str, unknown))}")
    missing = sorted(expected - set(names))
    if missing:
        raise NamingError(f"no name for cluster id(s): {', '.join(map(str, missing))}")
    return ClusterNaming(names, "user")


# -- heatmap -----------------------------------------------------------------

CELL = 28
FONT = 11


def cell_fill(value: float) -> str:
    """White at 0, pure red at 1, linear in between."""
    v = min(max(float(value), 0.0), 1.0)
    fade = round(255 * (1 - v))
    return f"#ff{fade:02x}{fade:02x}"


def heatmap_svg(nc: NormalizedCentroids, names: ClusterNaming | None = None) -> str:
    n_rows, n_cols = nc.matrix.shape
    if n_rows == 0 or n_cols == 0:
        raise ValueError("heatmap needs at least one activity row and one cluster column")
    label_w = 8 + int(FONT * 0.62 * max(len(a) for a in nc.activities))
    head_h = 2 * CELL
    width = label_w + n_cols * CELL + 8
    height = head_h + n_rows * CELL + 8

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>\n',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="{FONT}">\n',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>\n',
    ]
    for j, cid in enumerate(nc.cluster_ids):
        x = label_w + j * CELL + CELL // 2
        title = f"<title>{escape(names[cid])}</title>" if names else ""
        out.append(f'<text class="col" x="{x}" y="{head_h - 8}" text-anchor="middle">{title}{cid}</text>\n')
    for i, activity in enumerate(nc.activities):
        y = head_h + i * CELL
        out.append(
            f'<text class="row" x="{label_w - 6}" y="{y + CELL // 2 + FONT // 3}" '
            f'text-anchor="end">{escape(activity)}</text>\n'
        )
        for j, cid in enumerate(nc.cluster_ids):
            v = float(nc.matrix[i, j])
            label = quoteattr(f"{activity} / cluster {cid}: {v:.4f}")
            out.append(
                f'<rect class="cell" x="{label_w + j * CELL}" y="{y}" width="{CELL}" height="{CELL}" '
                f'fill="{cell_fill(v)}" stroke="#dddddd" data-value="{v!r}" aria-label={label}/>\n'
            )
    out.append("</svg>\n")
    return "".join(out)


def render_heatmap(nc: NormalizedCentroids, path: str | os.PathLike, names: ClusterNaming | None = None) -> str:
    svg = heatmap_svg(nc, names)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
    return svg
