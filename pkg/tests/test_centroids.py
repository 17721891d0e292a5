import logging
import re
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sessionlift.centroids import (
    ClusterNaming,
    NormalizedCentroids,
    auto_name,
    cell_fill,
    filter_rows,
    heatmap_svg,
    load_names,
    normalize_centroids,
    normalize_vector,
    parse_names,
    render_heatmap,
)
from sessionlift.clustering import ClusterModel
from sessionlift.errors import NamingError

from conftest import EXAMPLE2_CENTROIDS

ACTS6 = ("p1", "p2", "p3", "p4", "p5", "p6")


def model_of(centroids):
    c = np.asarray(centroids, dtype=float)
    return ClusterModel(np.arange(len(c)), c, "kmeans")


def nc_of(columns, activities):
    return NormalizedCentroids(np.asarray(columns, dtype=float).T, tuple(activities), tuple(range(len(columns))))


def test_normalize_example2_first_two():
    assert normalize_vector([Fraction(x) for x in (1, 0, 1, 1, 0, 1)]) == [Fraction(1, 4), 0, Fraction(1, 4),
                                                                         Fraction(1, 4), 0, Fraction(1, 4)]
    assert normalize_vector([Fraction(x) for x in (40, 0, 2, 0, 0, 0)]) == [Fraction(40, 42), 0, Fraction(2, 42),
                                                                          0, 0, 0]


def test_normalize_zero_vector():
    assert normalize_vector([0, 0, 0, 0]) == [0, 0, 0, 0]
    nc = normalize_centroids(model_of([[0, 0], [1, 3]]), ("a", "b"))
    assert nc.matrix.tolist() == [[0, 0.25], [0, 0.75]]


def test_normalize_centroids_layout():
    nc = normalize_centroids(model_of(EXAMPLE2_CENTROIDS), ACTS6)
    assert nc.matrix.shape == (6, 5)
    assert nc.cluster_ids == (0, 1, 2, 3, 4)
    assert nc.matrix[0, 1] == 40 / 42


@settings(max_examples=100, deadline=None)
@given(st.lists(st.lists(st.floats(0, 1e6), min_size=3, max_size=3), min_size=1, max_size=6))
def test_normalize_sum_and_argmax(cents):
    nc = normalize_centroids(model_of(cents), ("x", "y", "z"))
    for j, raw in enumerate(cents):
        col = nc.matrix[:, j]
        if sum(raw) > 0:
            assert abs(col.sum() - 1) < 1e-9
            assert int(np.argmax(col)) == int(np.argmax(raw))
        else:
            assert not col.any()


def test_filter_identity_at_zero():
    nc = normalize_centroids(model_of(EXAMPLE2_CENTROIDS), ACTS6)
    out = filter_rows(nc, 0)
    assert out.activities == nc.activities and np.array_equal(out.matrix, nc.matrix)


def test_filter_drops_faint_row():
    nc = nc_of([[0.999, 0.001], [0.9, 0.0]], ("big", "faint"))
    assert filter_rows(nc, 0.05).activities == ("big",)


def test_filter_example2_at_0_3():
    # row maxima by hand: p1 40/42, p2 2/3, p3 2/7, p4 10/11, p5 2/7, p6 1/4
    nc = normalize_centroids(model_of(EXAMPLE2_CENTROIDS), ACTS6)
    out = filter_rows(nc, 0.3)
    assert out.activities == ("p1", "p2", "p4")
    assert (out.matrix.max(axis=1) >= 0.3).all()


def test_auto_name_single_dominant():
    assert auto_name(nc_of([[0.9, 0.05, 0.05]], "xyz"), 0.5)[0] == "x"


def test_auto_name_ratio_concatenation():
    # 0.35 >= 0.8 * 0.4 = 0.32 qualifies, 0.25 does not
    assert auto_name(nc_of([[0.4, 0.35, 0.25]], "xyz"), 0.8)[0] == "x & y"


def test_auto_name_tie_alphabetical():
    assert auto_name(nc_of([[0.5, 0.5]], ("y", "x")), 1.0)[0] == "x & y"


def test_auto_name_zero_centroid(caplog):
    with caplog.at_level(logging.WARNING, logger="sessionlift"):
        naming = auto_name(nc_of([[0, 0], [1, 0]], "ab"))
    assert naming.names == {0: "cluster_0", 1: "a"}
    assert "all-zero" in caplog.text


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.001, 1), min_size=2, max_size=6, unique=True))
def test_auto_name_ratio_one_is_argmax(col):
    acts = [f"a{i}" for i in range(len(col))]
    assert auto_name(nc_of([col], acts), 1.0)[0] == acts[int(np.argmax(col))]


def test_duplicate_names_warn(caplog):
    with caplog.at_level(logging.WARNING, logger="sessionlift"):
        ClusterNaming({0: "x", 1: "x"})
    assert "share a name" in caplog.text


def test_load_names(tmp_path):
    p = tmp_path / "names.tsv"
    p.write_text("# cluster names\n0\tVisit page mijn_cv\n", encoding="utf-8")
    naming = load_names(p, 1)
    assert naming[0] == "Visit page mijn_cv" and naming.provenance == "user"


def test_load_names_missing_id():
    with pytest.raises(NamingError, match=r"\b3\b"):
        parse_names("0\ta\n1\tb\n2\tc\n", 4)


def test_load_names_unknown_id():
    with pytest.raises(NamingError, match="99"):
        parse_names("0\ta\n99\tb\n", 1)


@pytest.mark.parametrize("text", ["0\ta\n0\tb\n", "0\t \n", "zero\ta\n", "0 a\n"])
def test_load_names_bad_lines(text):
    with pytest.raises(NamingError):
        parse_names(text, 1)


def test_names_tsv_round_trip():
    naming = ClusterNaming({1: "b", 0: "a c"})
    assert parse_names(naming.to_tsv(), 2).names == naming.names


def test_cell_fill_ramp():
    assert cell_fill(0.0) == "#ffffff"
    assert cell_fill(1.0) == "#ff0000"
    assert cell_fill(0.5) == "#ff8080"


def cells(svg):
    return [(m.group(1), float(m.group(2))) for m in re.finditer(r'fill="(#[0-9a-f]{6})"[^>]*data-value="([^"]+)"', svg)]


def test_heatmap_single_cells():
    assert cells(heatmap_svg(nc_of([[1.0]], ["a"]))) == [("#ff0000", 1.0)]
    assert cells(heatmap_svg(nc_of([[0.0]], ["a"]))) == [("#ffffff", 0.0)]


def test_heatmap_example2(tmp_path):
    nc = normalize_centroids(model_of(EXAMPLE2_CENTROIDS), ACTS6)
    svg = render_heatmap(nc, tmp_path / "hm.svg", ClusterNaming({i: f"n{i}" for i in range(5)}))
    grid = cells(svg)
    assert len(grid) == 30
    values = [v for _, v in grid]
    darkest = int(np.argmax(values))
    # cells are emitted row by row: row 1, column 2 in 1-based terms
    assert divmod(darkest, 5) == (0, 1)
    assert values[darkest] == 40 / 42
    assert (tmp_path / "hm.svg").read_text(encoding="utf-8") == svg
    assert svg == heatmap_svg(nc, ClusterNaming({i: f"n{i}" for i in range(5)}))
    for label in ACTS6:
        assert f">{label}</text>" in svg


def test_heatmap_escapes_labels():
    svg = heatmap_svg(nc_of([[1.0]], ["<a&b>"]))
    assert "&lt;a&amp;b&gt;" in svg


def test_heatmap_rejects_empty():
    with pytest.raises(ValueError):
        heatmap_svg(NormalizedCentroids(np.zeros((0, 1)), (), (0,)))
