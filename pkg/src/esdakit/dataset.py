"""Spatially referenced data ingestion and spatial weights.

Parses GeoJSON FeatureCollections into an immutable columnar table with
polygon geometry, derives planar-projected centroids, k-nearest-neighbor
distances, and queen-contiguity spatial weights (two regions are neighbors
iff their boundaries share at least one point, corner contact included).

Distances are Euclidean on a local azimuthal equidistant plane centered on
the dataset bounding-box midpoint; raw lon/lat degrees are never used as a
metric.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from shapely.geometry import MultiPolygon, Polygon
from shapely.strtree import STRtree

from .errors import (
    EmptyInputError,
    GeometryError,
    ParseError,
    RangeError,
    UnsupportedGeometryError,
)

EARTH_RADIUS_M = 6_371_000.0

# Shapefile-derived GeoJSON carries float noise on shared boundaries;
# coordinates are snapped to 1e-9 degrees before any contact test.
COORD_DECIMALS = 9


@dataclass(frozen=True)
class GeoFeatureTable:
    """Immutable table of regions with polygon geometry and numeric columns.

    ``centroids_xy`` are planar (azimuthal equidistant, meters);
    ``centroids_lonlat`` keep the geographic position for labeling.
    """

    region_ids: tuple[str, ...]
    geometries: tuple  # shapely Polygon/MultiPolygon, coordinates snapped
    centroids_xy: np.ndarray  # (n, 2) meters
    centroids_lonlat: np.ndarray  # (n, 2) degrees, (lon, lat)
    columns: dict[str, np.ndarray]
    metadata: dict[str, list]  # non-numeric properties, kept out of columns
    flagged_rows: tuple[int, ...]  # rows with any missing numeric value
    projection_center: tuple[float, float]  # (lon, lat) of the projection origin

    @property
    def n(self) -> int:
        return len(self.region_ids)

    def index_of(self, region_id: str) -> int:
        try:
            return self.region_ids.index(region_id)
        except ValueError:
            raise RangeError(f"unknown region_id {region_id!r}") from None

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise RangeError(f"unknown column {name!r}", column=name)
        return self.columns[name]

    def fitting_rows(self) -> np.ndarray:
        """Row indices usable for model fitting (missing-value rows excluded)."""
        mask = np.ones(self.n, dtype=bool)
        mask[list(self.flagged_rows)] = False
        return np.nonzero(mask)[0]

    def exclusion_report(self) -> dict:
        return {
            "flagged_rows": [self.region_ids[i] for i in self.flagged_rows],
            "reason": "missing numeric value in at least one loaded column",
        }


@dataclass(frozen=True)
class SpatialWeights:
    """Queen-contiguity weights: symmetric adjacency, no self-loops.

    ``standardization`` is "binary" for the constructed object; the
    row-standardized view is produced by :meth:`row_standardized`.
    """

    neighbors: tuple[tuple[int, ...], ...]
    standardization: str = "binary"
    overlap_pairs: tuple[tuple[int, int], ...] = ()

    @property
    def n(self) -> int:
        return len(self.neighbors)

    def weight_rows(self) -> list[np.ndarray]:
        """Per-row weight vectors aligned to the neighbor lists."""
        out = []
        for row in self.neighbors:
            k = len(row)
            if self.standardization == "row" and k:
                out.append(np.full(k, 1.0 / k))
            else:
                out.append(np.ones(k))
        return out

    def row_standardized(self) -> "SpatialWeights":
        return SpatialWeights(self.neighbors, "row", self.overlap_pairs)

    def subset(self, keep_rows) -> "SpatialWeights":
        """Induced subgraph over ``keep_rows``, renumbered to 0..len-1."""
        keep = {int(r): i for i, r in enumerate(keep_rows)}
        sub = tuple(
            tuple(keep[j] for j in self.neighbors[r] if j in keep)
            for r in keep
        )
        pairs = tuple(
            (keep[a], keep[b])
            for a, b in self.overlap_pairs
            if a in keep and b in keep
        )
        return SpatialWeights(sub, self.standardization, pairs)

    def to_sparse(self):
        """CSR matrix of the weights under the current standardization."""
        from scipy.sparse import csr_matrix

        rows, cols, vals = [], [], []
        for i, row in enumerate(self.neighbors):
            k = len(row)
            w = 1.0 / k if (self.standardization == "row" and k) else 1.0
            for j in row:
                rows.append(i)
                cols.append(j)
                vals.append(w)
        return csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))

    def report(self) -> dict:
        return {
            "islands": [i for i, row in enumerate(self.neighbors) if not row],
            "overlap_pairs": [list(p) for p in self.overlap_pairs],
        }


@dataclass(frozen=True)
class KnnResult:
    distances: np.ndarray
    k: int
    has_duplicate_centroids: bool


def _ring_centroid(ring: list[tuple[float, float]]) -> tuple[float, float, float]:
    """Area-weighted (shoelace) centroid of one ring; returns (cx, cy, |area|)."""
    area2 = 0.0
    cx = 0.0
    cy = 0.0
    m = len(ring)
    for i in range(m):
        x0, y0 = ring[i]
        x1, y1 = ring[(i + 1) % m]
        cross = x0 * y1 - x1 * y0
        area2 += cross
        cx += (x0 + x1) * cross
        cy += (y0 + y1) * cross
    if abs(area2) < 1e-30:
        # zero-area ring: fall back to the vertex mean
        xs = [p[0] for p in ring]
        ys = [p[1] for p in ring]
        return sum(xs) / m, sum(ys) / m, 0.0
    cx /= 3.0 * area2
    cy /= 3.0 * area2
    return cx, cy, abs(area2) / 2.0


def _largest_exterior_ring(geom) -> list[tuple[float, float]]:
    if isinstance(geom, Polygon):
        return list(geom.exterior.coords)[:-1]
    rings = [(list(p.exterior.coords)[:-1], p.area) for p in geom.geoms]
    rings.sort(key=lambda t: -t[1])
    return rings[0][0]


def _snap(coords, decimals=COORD_DECIMALS):
    return [(round(float(x), decimals), round(float(y), decimals)) for x, y in coords]


def _geometry_from_geojson(gj: dict, label: str):
    gtype = gj.get("type")
    if gtype == "Polygon":
        rings = gj.get("coordinates") or []
        if not rings:
            raise GeometryError(f"feature {label}: empty polygon", feature=label)
        snapped = [_snap(r) for r in rings]
        if len({tuple(p) for p in snapped[0]}) < 3:
            raise GeometryError(
                f"feature {label}: degenerate geometry (<3 distinct vertices)",
                feature=label,
            )
        return Polygon(snapped[0], snapped[1:])
    if gtype == "MultiPolygon":
        polys = []
        for rings in gj.get("coordinates") or []:
            snapped = [_snap(r) for r in rings]
            if len({tuple(p) for p in snapped[0]}) < 3:
                raise GeometryError(
                    f"feature {label}: degenerate geometry (<3 distinct vertices)",
                    feature=label,
                )
            polys.append(Polygon(snapped[0], snapped[1:]))
        if not polys:
            raise GeometryError(f"feature {label}: empty multipolygon", feature=label)
        return MultiPolygon(polys)
    raise UnsupportedGeometryError(
        f"feature {label}: unsupported geometry type {gtype!r}",
        feature=label,
        geometry_type=gtype,
    )


def project_azimuthal_equidistant(
    lonlat: np.ndarray, center: tuple[float, float]
) -> np.ndarray:
    """Project (lon, lat) degrees to a local azimuthal equidistant plane (meters)."""
    lon0, lat0 = math.radians(center[0]), math.radians(center[1])
    lon = np.radians(lonlat[:, 0])
    lat = np.radians(lonlat[:, 1])
    cos_c = np.sin(lat0) * np.sin(lat) + np.cos(lat0) * np.cos(lat) * np.cos(lon - lon0)
    cos_c = np.clip(cos_c, -1.0, 1.0)
    c = np.arccos(cos_c)
    with np.errstate(invalid="ignore", divide="ignore"):
        k = np.where(c > 1e-12, c / np.sin(c), 1.0)
    x = EARTH_RADIUS_M * k * np.cos(lat) * np.sin(lon - lon0)
    y = EARTH_RADIUS_M * k * (
        np.cos(lat0) * np.sin(lat) - np.sin(lat0) * np.cos(lat) * np.cos(lon - lon0)
    )
    return np.column_stack([x, y])


def load_geojson(raw: bytes | str, id_property: str | None = None) -> GeoFeatureTable:
    """Parse a GeoJSON FeatureCollection of polygonal features.

    Numeric properties become columns; everything else is retained as
    metadata. Rows with a missing value in any numeric column are flagged,
    not dropped. ``id_property`` selects the region-id key; the feature
    index is the fallback.
    """
    if isinstance(raw, bytes):
        text = raw.decode("utf-8")
    else:
        text = raw
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"malformed GeoJSON: {exc.msg}", byte_offset=exc.pos, line=exc.lineno
        ) from exc
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise ParseError("document is not a FeatureCollection", byte_offset=0)
    features = doc.get("features") or []
    if not features:
        raise EmptyInputError("FeatureCollection contains zero features")

    n = len(features)
    region_ids: list[str] = []
    geometries = []
    prop_rows: list[dict] = []
    for idx, feat in enumerate(features):
        props = feat.get("properties") or {}
        prop_rows.append(props)
        geom = feat.get("geometry")
        if geom is None:
            raise UnsupportedGeometryError(
                f"feature {idx}: missing geometry", feature=str(idx)
            )
        if id_property is not None and id_property in props:
            rid = str(props[id_property])
        else:
            rid = str(idx)
        region_ids.append(rid)
        geometries.append(_geometry_from_geojson(geom, rid))

    if len(set(region_ids)) != n:
        dupes = sorted({r for r in region_ids if region_ids.count(r) > 1})
        raise ParseError(
            f"region ids are not unique: {dupes[:5]}", duplicates=dupes[:20]
        )

    # Column split: a property is numeric iff every present value is an
    # int/float (bools excluded). Missing entries flag the row.
    keys: list[str] = []
    for props in prop_rows:
        for key in props:
            if key not in keys:
                keys.append(key)
    columns: dict[str, np.ndarray] = {}
    metadata: dict[str, list] = {}
    flagged: set[int] = set()
    for key in keys:
        values = [props.get(key) for props in prop_rows]
        numeric = all(
            v is None or (isinstance(v, (int, float)) and not isinstance(v, bool))
            for v in values
        )
        present = [v for v in values if v is not None]
        if numeric and present:
            col = np.array(
                [float(v) if v is not None else np.nan for v in values], dtype=float
            )
            columns[key] = col
            flagged.update(np.nonzero(np.isnan(col))[0].tolist())
        else:
            metadata[key] = values

    lonlat = np.empty((n, 2))
    for i, geom in enumerate(geometries):
        ring = _largest_exterior_ring(geom)
        cx, cy, _ = _ring_centroid(ring)
        lonlat[i] = (cx, cy)
    if not np.all(np.isfinite(lonlat)):
        bad = int(np.nonzero(~np.isfinite(lonlat).all(axis=1))[0][0])
        raise GeometryError(
            f"feature {region_ids[bad]}: non-finite centroid", feature=region_ids[bad]
        )

    all_x = []
    all_y = []
    for geom in geometries:
        minx, miny, maxx, maxy = geom.bounds
        all_x.extend((minx, maxx))
        all_y.extend((miny, maxy))
    center = (
        (min(all_x) + max(all_x)) / 2.0,
        (min(all_y) + max(all_y)) / 2.0,
    )
    xy = project_azimuthal_equidistant(lonlat, center)

    return GeoFeatureTable(
        region_ids=tuple(region_ids),
        geometries=tuple(geometries),
        centroids_xy=xy,
        centroids_lonlat=lonlat,
        columns=columns,
        metadata=metadata,
        flagged_rows=tuple(sorted(flagged)),
        projection_center=center,
    )


def queen_adjacency(table: GeoFeatureTable) -> SpatialWeights:
    """Queen contiguity: neighbors iff boundaries share at least one point.

    Uses exact geometric intersection on the snapped coordinates, so corner
    contact counts and T-junction contacts (a vertex interior to another
    polygon's edge) are detected. Overlapping (not merely touching)
    geometries are treated as adjacent and recorded in the report.
    """
    geoms = list(table.geometries)
    tree = STRtree(geoms)
    pairs = tree.query(geoms, predicate="intersects")
    neighbors: list[set[int]] = [set() for _ in geoms]
    overlap: set[tuple[int, int]] = set()
    for a, b in zip(pairs[0].tolist(), pairs[1].tolist()):
        if a == b:
            continue
        neighbors[a].add(b)
        neighbors[b].add(a)
        if a < b and not geoms[a].touches(geoms[b]):
            overlap.add((a, b))
    return SpatialWeights(
        neighbors=tuple(tuple(sorted(s)) for s in neighbors),
        standardization="binary",
        overlap_pairs=tuple(sorted(overlap)),
    )


def knn_distances(table: GeoFeatureTable, k: int) -> KnnResult:
    """Distance from each region's centroid to its kth nearest other centroid."""
    n = table.n
    if not 1 <= k <= n - 1:
        raise RangeError(f"k={k} outside [1, {n - 1}]", k=k, n=n)
    tree = cKDTree(table.centroids_xy)
    # query k+1 including self; self distance is 0 and sorts first
    dists, _ = tree.query(table.centroids_xy, k=k + 1)
    out = dists[:, k].astype(float)
    dup = bool(np.any(dists[:, 1] <= 0.0))
    return KnnResult(distances=out, k=k, has_duplicate_centroids=dup)
