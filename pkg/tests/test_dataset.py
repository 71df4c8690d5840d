"""Ingestion, contiguity, and knn distance tests."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from esdakit.dataset import (
    GeoFeatureTable,
    knn_distances,
    load_geojson,
    queen_adjacency,
)
from esdakit.errors import (
    EmptyInputError,
    GeometryError,
    ParseError,
    RangeError,
    UnsupportedGeometryError,
)
from esdakit.synthetic import grid_geojson


def square(x0, y0, size=1.0):
    return {
        "type": "Polygon",
        "coordinates": [
            [
                [x0, y0],
                [x0 + size, y0],
                [x0 + size, y0 + size],
                [x0, y0 + size],
                [x0, y0],
            ]
        ],
    }


def collection(features):
    return json.dumps({"type": "FeatureCollection", "features": features}).encode()


def feature(geom, props):
    return {"type": "Feature", "geometry": geom, "properties": props}


def test_minimal_two_squares():
    raw = collection(
        [
            feature(square(0, 0), {"pop": 10}),
            feature(square(2, 0), {"pop": 20}),
        ]
    )
    table = load_geojson(raw)
    assert table.n == 2
    assert set(table.columns) == {"pop"}
    assert table.columns["pop"].tolist() == [10.0, 20.0]


def test_string_property_kept_as_metadata():
    raw = collection(
        [
            feature(square(0, 0), {"pop": 1, "name": "a"}),
            feature(square(2, 0), {"pop": 2, "name": "b"}),
        ]
    )
    table = load_geojson(raw)
    assert "name" not in table.columns
    assert table.metadata["name"] == ["a", "b"]


def test_bool_property_is_not_numeric():
    raw = collection(
        [
            feature(square(0, 0), {"flag": True}),
            feature(square(2, 0), {"flag": False}),
        ]
    )
    table = load_geojson(raw)
    assert "flag" not in table.columns


def test_missing_numeric_value_flags_row():
    raw = collection(
        [
            feature(square(0, 0), {"pop": 1}),
            feature(square(2, 0), {}),
            feature(square(4, 0), {"pop": 3}),
        ]
    )
    table = load_geojson(raw)
    assert table.flagged_rows == (1,)
    assert table.fitting_rows().tolist() == [0, 2]
    assert table.exclusion_report()["flagged_rows"] == ["1"]


def test_id_property_used_when_present():
    raw = collection(
        [
            feature(square(0, 0), {"GEOID": "061", "pop": 1}),
            feature(square(2, 0), {"GEOID": "043", "pop": 2}),
        ]
    )
    table = load_geojson(raw, id_property="GEOID")
    assert table.region_ids == ("061", "043")


def test_duplicate_region_ids_rejected():
    raw = collection(
        [
            feature(square(0, 0), {"GEOID": "x"}),
            feature(square(2, 0), {"GEOID": "x"}),
        ]
    )
    with pytest.raises(ParseError):
        load_geojson(raw, id_property="GEOID")


def test_malformed_document_reports_offset():
    with pytest.raises(ParseError) as err:
        load_geojson(b'{"type": "FeatureCollection", "features": [')
    assert "byte_offset" in err.value.detail


def test_zero_features_is_empty_input():
    with pytest.raises(EmptyInputError):
        load_geojson(collection([]))


def test_point_geometry_rejected_naming_feature():
    raw = collection(
        [feature({"type": "Point", "coordinates": [0, 0]}, {"pop": 1})]
    )
    with pytest.raises(UnsupportedGeometryError) as err:
        load_geojson(raw)
    assert err.value.detail["feature"] == "0"


def test_degenerate_polygon_rejected():
    geom = {
        "type": "Polygon",
        "coordinates": [[[0, 0], [0, 0], [0, 0], [0, 0]]],
    }
    with pytest.raises(GeometryError):
        load_geojson(collection([feature(geom, {})]))


def test_deterministic_reload():
    raw = grid_geojson(4, 4, {"v": np.arange(16.0)})
    t1 = load_geojson(raw, id_property="id")
    t2 = load_geojson(raw, id_property="id")
    assert t1.region_ids == t2.region_ids
    assert np.array_equal(t1.centroids_xy, t2.centroids_xy)
    assert np.array_equal(t1.columns["v"], t2.columns["v"])


# --- queen adjacency ---


def test_edge_contact_is_neighbor():
    raw = collection([feature(square(0, 0), {}), feature(square(1, 0), {})])
    w = queen_adjacency(load_geojson(raw))
    assert w.neighbors == ((1,), (0,))


def test_corner_contact_is_neighbor():
    raw = collection([feature(square(0, 0), {}), feature(square(1, 1), {})])
    w = queen_adjacency(load_geojson(raw))
    assert w.neighbors == ((1,), (0,))


def test_3x3_grid_neighbor_counts():
    # hand enumeration: corners touch 3 cells, edges 5, center 8
    table = load_geojson(grid_geojson(3, 3), id_property="id")
    w = queen_adjacency(table)
    counts = [len(nb) for nb in w.neighbors]
    # row-major ids: corners 0,2,6,8; edges 1,3,5,7; center 4
    assert [counts[i] for i in (0, 2, 6, 8)] == [3, 3, 3, 3]
    assert [counts[i] for i in (1, 3, 5, 7)] == [5, 5, 5, 5]
    assert counts[4] == 8


def test_island_has_empty_neighbors():
    raw = collection([feature(square(0, 0), {}), feature(square(5, 5), {})])
    w = queen_adjacency(load_geojson(raw))
    assert w.neighbors == ((), ())
    assert w.report()["islands"] == [0, 1]


def test_overlap_treated_as_adjacency_and_reported():
    raw = collection(
        [feature(square(0, 0), {}), feature(square(0.5, 0.5), {})]
    )
    w = queen_adjacency(load_geojson(raw))
    assert w.neighbors == ((1,), (0,))
    assert w.overlap_pairs == ((0, 1),)


def test_t_junction_vertex_on_edge_is_neighbor():
    # upper square's corner lands in the middle of the lower square's top edge
    raw = collection([feature(square(0, 0, 2.0), {}), feature(square(1, 2), {})])
    w = queen_adjacency(load_geojson(raw))
    assert w.neighbors == ((1,), (0,))


def test_queen_symmetry_on_grid():
    table = load_geojson(grid_geojson(5, 7), id_property="id")
    w = queen_adjacency(table)
    for i, row in enumerate(w.neighbors):
        assert i not in row
        for j in row:
            assert i in w.neighbors[j]


def test_row_standardized_rows_sum_to_one():
    table = load_geojson(grid_geojson(3, 3), id_property="id")
    w = queen_adjacency(table).row_standardized()
    m = w.to_sparse()
    sums = np.asarray(m.sum(axis=1)).ravel()
    assert np.allclose(sums, 1.0)


# --- knn distances ---


def collinear_table():
    # three unit squares whose centroids project to a line at spacing 0, 1, 3
    feats = [
        feature(square(0.0, 0.0, 0.2), {}),
        feature(square(1.0, 0.0, 0.2), {}),
        feature(square(3.0, 0.0, 0.2), {}),
    ]
    return load_geojson(collection(feats))


def test_knn_collinear_hand_enumeration():
    table = collinear_table()
    res = knn_distances(table, 1)
    d = res.distances
    # spacing is 1 degree; on the projected plane compare ratios
    assert d[0] == pytest.approx(d[1], rel=1e-6)
    assert d[2] == pytest.approx(2 * d[0], rel=1e-3)


def test_knn_k_equals_n_minus_1_is_farthest():
    table = load_geojson(grid_geojson(3, 3), id_property="id")
    res = knn_distances(table, table.n - 1)
    xy = table.centroids_xy
    for i in range(table.n):
        dists = np.linalg.norm(xy - xy[i], axis=1)
        assert res.distances[i] == pytest.approx(dists.max())


def test_knn_duplicate_centroids_flagged():
    feats = [
        feature(square(0, 0), {}),
        feature(square(0, 0), {}),
        feature(square(3, 0), {}),
    ]
    res = knn_distances(load_geojson(collection(feats)), 1)
    assert res.has_duplicate_centroids
    assert res.distances[0] == 0.0


def test_knn_out_of_range():
    table = collinear_table()
    with pytest.raises(RangeError):
        knn_distances(table, 0)
    with pytest.raises(RangeError):
        knn_distances(table, 3)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=2, max_value=4), st.integers(min_value=2, max_value=4))
def test_knn_monotone_in_k(rows, cols):
    table = load_geojson(grid_geojson(rows, cols), id_property="id")
    n = table.n
    prev = None
    for k in range(1, n):
        d = knn_distances(table, k).distances
        if prev is not None:
            assert np.all(d >= prev - 1e-9)
        prev = d
