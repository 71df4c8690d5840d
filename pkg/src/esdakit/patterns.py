"""Spatial clusters in significance-masked coefficient surfaces.

Pipeline: split significant regions by coefficient sign, induce the queen
subgraph on each sign group, run Leiden community detection per subgraph,
demote communities below the minimum size to "isolated", and summarize each
surviving community (size, back-transformed mean coefficient, centroid,
extent, default location identifier).

The Leiden implementation is self-contained and deterministic for a fixed
seed: local moving uses a seeded processing queue, refinement merges
singletons greedily along edges (so refined communities stay connected),
and a final connected-component split enforces the connectivity guarantee
outright.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dataset import GeoFeatureTable, SpatialWeights
from .errors import NotFoundError, RangeError
from .regression import CalibratedModel, raw_scale_coefficients

DEFAULT_RESOLUTION = 1.0
MIN_CLUSTER_SIZE = 2


@dataclass(frozen=True)
class SignSplit:
    """Significant row indices partitioned by coefficient sign.

    Rows with a coefficient of exactly 0.0 land in ``positive`` and are
    flagged in ``zero_flagged``.
    """

    positive: tuple[int, ...]
    negative: tuple[int, ...]
    zero_flagged: tuple[int, ...]


@dataclass(frozen=True)
class Cluster:
    cluster_id: str
    surface: str
    sign: str  # "positive" | "negative"
    region_ids: tuple[str, ...]
    size: int
    mean_coefficient: float  # back-transformed (raw data) scale
    centroid: tuple[float, float]  # (lat, lon)
    extent: tuple[float, float, float, float]  # (lon_min, lat_min, lon_max, lat_max)
    location_identifier: str


@dataclass(frozen=True)
class ClusterSet:
    surface: str
    positive_clusters: tuple[Cluster, ...]
    negative_clusters: tuple[Cluster, ...]
    isolated: tuple[str, ...]  # significant but below minimum cluster size
    zero_flagged: tuple[str, ...]

    @property
    def clusters(self) -> tuple[Cluster, ...]:
        return self.positive_clusters + self.negative_clusters

    def cluster(self, cluster_id: str) -> Cluster:
        for c in self.clusters:
            if c.cluster_id == cluster_id:
                return c
        raise NotFoundError(f"no cluster {cluster_id!r} in surface {self.surface!r}")


def split_significant(values: np.ndarray, mask: np.ndarray) -> SignSplit:
    """Partition significant indices of ``values`` by sign; 0.0 goes positive."""
    values = np.asarray(values, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if values.shape != mask.shape:
        raise RangeError(
            f"mask shape {mask.shape} does not match surface shape {values.shape}"
        )
    idx = np.flatnonzero(mask)
    pos = idx[values[idx] >= 0.0]
    neg = idx[values[idx] < 0.0]
    zero = idx[values[idx] == 0.0]
    return SignSplit(
        positive=tuple(int(i) for i in pos),
        negative=tuple(int(i) for i in neg),
        zero_flagged=tuple(int(i) for i in zero),
    )


class _Graph:
    """Weighted undirected graph with ordered-pair self weights.

    ``self_w[v]`` stores the ordered-pair internal weight (2x the intra edge
    count when v aggregates a community), so total weight ``two_m`` is
    invariant under aggregation and modularity is preserved exactly.
    """

    def __init__(self, adj: list[dict[int, float]], self_w: list[float]):
        self.adj = adj
        self.self_w = self_w
        self.n = len(adj)
        self.strength = [
            self_w[v] + sum(adj[v].values()) for v in range(self.n)
        ]
        self.two_m = float(sum(self.strength))

    @classmethod
    def simple(cls, n: int, edges: Iterable[tuple[int, int]]) -> "_Graph":
        adj: list[dict[int, float]] = [dict() for _ in range(n)]
        for a, b in edges:
            if a == b:
                continue
            adj[a][b] = adj[a].get(b, 0.0) + 1.0
            adj[b][a] = adj[b].get(a, 0.0) + 1.0
        return cls(adj, [0.0] * n)

    def aggregate(self, groups: list[list[int]]) -> "_Graph":
        comm_of = {}
        for g, members in enumerate(groups):
            for v in members:
                comm_of[v] = g
        k = len(groups)
        adj: list[dict[int, float]] = [dict() for _ in range(k)]
        self_w = [0.0] * k
        for g, members in enumerate(groups):
            for v in members:
                self_w[g] += self.self_w[v]
                for u, w in self.adj[v].items():
                    h = comm_of[u]
                    if h == g:
                        self_w[g] += w  # counted once per direction -> 2x per edge
                    else:
                        adj[g][h] = adj[g].get(h, 0.0) + w
        return _Graph(adj, self_w)


def _local_move(
    graph: _Graph, comm: list[int], resolution: float, rng: random.Random
) -> bool:
    """Queue-based local moving; mutates ``comm``. Returns True if any move."""
    n = graph.n
    k_tot = [0.0] * (max(comm) + 1 if n else 0)
    for v in range(n):
        k_tot[comm[v]] += graph.strength[v]
    order = list(range(n))
    rng.shuffle(order)
    queue = deque(order)
    queued = [True] * n
    moved_any = False
    inv_2m = 1.0 / graph.two_m if graph.two_m else 0.0
    while queue:
        v = queue.popleft()
        queued[v] = False
        a = comm[v]
        kv = graph.strength[v]
        k_tot[a] -= kv
        links: dict[int, float] = {a: 0.0}
        for u, w in graph.adj[v].items():
            c = comm[u]
            links[c] = links.get(c, 0.0) + w
        best_c, best_gain = a, links[a] - resolution * kv * k_tot[a] * inv_2m
        for c, wl in links.items():
            if c == a:
                continue
            gain = wl - resolution * kv * k_tot[c] * inv_2m
            if gain > best_gain + 1e-12 or (
                abs(gain - best_gain) <= 1e-12 and c < best_c
            ):
                best_c, best_gain = c, gain
        comm[v] = best_c
        k_tot[best_c] += kv
        if best_c != a:
            moved_any = True
            for u in graph.adj[v]:
                if comm[u] != best_c and not queued[u]:
                    queue.append(u)
                    queued[u] = True
    return moved_any


def _refine(graph: _Graph, comm: list[int], resolution: float) -> list[list[int]]:
    """Greedy singleton merges inside each community; connected by design."""
    n = graph.n
    ref = list(range(n))
    ref_strength = list(graph.strength)
    ref_size = [1] * n
    inv_2m = 1.0 / graph.two_m if graph.two_m else 0.0
    for v in range(n):
        if ref_size[ref[v]] != 1:
            continue
        kv = graph.strength[v]
        links: dict[int, float] = {}
        for u, w in graph.adj[v].items():
            if comm[u] != comm[v]:
                continue
            r = ref[u]
            if r == ref[v]:
                continue
            links[r] = links.get(r, 0.0) + w
        best_r, best_gain = -1, 0.0
        for r, wl in sorted(links.items()):
            gain = wl - resolution * kv * ref_strength[r] * inv_2m
            if gain > best_gain + 1e-12:
                best_r, best_gain = r, gain
        if best_r >= 0:
            old = ref[v]
            ref_strength[best_r] += kv
            ref_size[best_r] += 1
            ref_size[old] -= 1
            ref[v] = best_r
    groups: dict[int, list[int]] = {}
    for v in range(n):
        groups.setdefault(ref[v], []).append(v)
    return [groups[r] for r in sorted(groups)]


def _connected_components(
    nodes: Sequence[int], adjacency: Mapping[int, Iterable[int]]
) -> list[list[int]]:
    node_set = set(nodes)
    seen: set[int] = set()
    comps: list[list[int]] = []
    for start in nodes:
        if start in seen:
            continue
        comp = []
        stack = [start]
        seen.add(start)
        while stack:
            v = stack.pop()
            comp.append(v)
            for u in adjacency.get(v, ()):
                if u in node_set and u not in seen:
                    seen.add(u)
                    stack.append(u)
        comps.append(sorted(comp))
    return comps


def modularity(
    nodes: Sequence[int],
    adjacency: Mapping[int, Iterable[int]],
    partition: Iterable[Iterable[int]],
    resolution: float = DEFAULT_RESOLUTION,
) -> float:
    """Newman modularity of a partition of the unweighted undirected graph."""
    node_set = set(nodes)
    deg = {v: 0 for v in nodes}
    m2 = 0
    for v in nodes:
        for u in adjacency.get(v, ()):
            if u in node_set and u != v:
                deg[v] += 1
                m2 += 1
    if m2 == 0:
        return 0.0
    q = 0.0
    for group in partition:
        members = set(group)
        intra2 = sum(
            1
            for v in members
            for u in adjacency.get(v, ())
            if u in members and u != v
        )
        k_c = sum(deg[v] for v in members)
        q += intra2 / m2 - resolution * (k_c / m2) ** 2
    return q


def leiden_communities(
    nodes: Sequence,
    adjacency: Mapping,
    resolution: float = DEFAULT_RESOLUTION,
    seed: int = 0,
) -> tuple[tuple, ...]:
    """Community detection over an undirected graph given as adjacency lists.

    Returns communities as tuples of node ids, each internally connected,
    ordered by (descending size, smallest member). Deterministic for a
    fixed seed. Empty input gives an empty result.
    """
    ids = sorted(nodes)
    if not ids:
        return ()
    index = {v: i for i, v in enumerate(ids)}
    edges = set()
    for v in ids:
        for u in adjacency.get(v, ()):
            if u in index and u != v:
                a, b = index[v], index[u]
                edges.add((min(a, b), max(a, b)))
    graph = _Graph.simple(len(ids), edges)
    rng = random.Random(seed)

    comm = list(range(graph.n))
    membership = [[i] for i in range(len(ids))]  # original indices per node
    if graph.two_m > 0:
        while True:
            moved = _local_move(graph, comm, resolution, rng)
            groups = _refine(graph, comm, resolution)
            if not moved and len(groups) == graph.n:
                break
            membership = [
                sorted(x for g in group for x in membership[g]) for group in groups
            ]
            # carry each aggregate node's community from local moving
            carry = [comm[group[0]] for group in groups]
            remap = {c: i for i, c in enumerate(sorted(set(carry)))}
            graph = graph.aggregate(groups)
            comm = [remap[c] for c in carry]
            if graph.n == 1:
                break

    # final flat partition from the last community assignment
    flat: dict[int, list[int]] = {}
    for v, c in enumerate(comm):
        flat.setdefault(c, []).extend(membership[v])

    # hard connectivity guarantee: split any disconnected community
    adj_idx: dict[int, list[int]] = {i: [] for i in range(len(ids))}
    for a, b in edges:
        adj_idx[a].append(b)
        adj_idx[b].append(a)
    final: list[list[int]] = []
    for members in flat.values():
        final.extend(_connected_components(sorted(members), adj_idx))
    final.sort(key=lambda ms: (-len(ms), ms[0]))
    return tuple(tuple(ids[i] for i in ms) for ms in final)


def _summarize(
    surface: str,
    sign: str,
    ordinal: int,
    members: Sequence[int],
    table: GeoFeatureTable,
    rows: Sequence[int],
    raw_coef: np.ndarray,
) -> Cluster:
    table_rows = [rows[i] for i in members]
    ids = tuple(table.region_ids[r] for r in table_rows)
    lonlat = table.centroids_lonlat[table_rows]
    lat = float(lonlat[:, 1].mean())
    lon = float(lonlat[:, 0].mean())
    extent = (
        float(lonlat[:, 0].min()),
        float(lonlat[:, 1].min()),
        float(lonlat[:, 0].max()),
        float(lonlat[:, 1].max()),
    )
    short = "pos" if sign == "positive" else "neg"
    return Cluster(
        cluster_id=f"{surface}:{short}:{ordinal}",
        surface=surface,
        sign=sign,
        region_ids=ids,
        size=len(ids),
        mean_coefficient=float(np.mean(raw_coef[list(members)])),
        centroid=(lat, lon),
        extent=extent,
        location_identifier=f"Cluster {ordinal + 1} near ({lat:.2f}, {lon:.2f})",
    )


def detect_clusters(
    surface: str,
    model: CalibratedModel,
    mask: np.ndarray,
    weights: SpatialWeights,
    table: GeoFeatureTable,
    *,
    resolution: float = DEFAULT_RESOLUTION,
    min_size: int = MIN_CLUSTER_SIZE,
    seed: int = 0,
) -> ClusterSet:
    """Full detection pipeline for one coefficient surface.

    ``mask`` is the significance column aligned to the model's rows;
    ``weights`` may cover either the full table or just the fitting rows.
    The split runs on back-transformed coefficients so every cluster's mean
    sign matches its group on the reported scale.
    """
    if surface not in model.surfaces:
        raise NotFoundError(
            f"no surface {surface!r}; have {', '.join(model.surfaces)}"
        )
    rows = model.row_index
    if weights.n != len(rows):
        weights = weights.subset(rows)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (len(rows),):
        raise RangeError(
            f"mask length {mask.shape} does not match model rows {len(rows)}"
        )
    raw = raw_scale_coefficients(model, surface)
    split = split_significant(raw, mask)
    adjacency = {i: weights.neighbors[i] for i in range(weights.n)}

    grouped: dict[str, list[tuple]] = {}
    isolated: list[int] = []
    for sign, members in (("positive", split.positive), ("negative", split.negative)):
        found = leiden_communities(members, adjacency, resolution, seed)
        kept = []
        for com in found:
            if len(com) >= min_size:
                kept.append(com)
            else:
                isolated.extend(com)
        kept.sort(key=lambda com: (-len(com), min(com)))
        grouped[sign] = kept

    ordinal = 0
    out: dict[str, list[Cluster]] = {"positive": [], "negative": []}
    for sign in ("positive", "negative"):
        for com in grouped[sign]:
            out[sign].append(
                _summarize(surface, sign, ordinal, com, table, rows, raw)
            )
            ordinal += 1
    return ClusterSet(
        surface=surface,
        positive_clusters=tuple(out["positive"]),
        negative_clusters=tuple(out["negative"]),
        isolated=tuple(table.region_ids[rows[i]] for i in sorted(isolated)),
        zero_flagged=tuple(
            table.region_ids[rows[i]] for i in split.zero_flagged
        ),
    )
