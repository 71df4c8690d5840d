import numpy as np
import pytest

from esdakit.dataset import load_geojson, queen_adjacency
from esdakit.errors import NotFoundError, RangeError
from esdakit.patterns import (
    ClusterSet,
    detect_clusters,
    leiden_communities,
    modularity,
    split_significant,
)
from esdakit.regression import CalibratedModel, ModelSpec
from esdakit.synthetic import grid_geojson


def grid_table(rows, cols, columns):
    return load_geojson(grid_geojson(rows, cols, columns))


# independent modularity evaluation, deliberately naive
def q_oracle(n, edges, partition):
    deg = [0] * n
    for a, b in edges:
        deg[a] += 1
        deg[b] += 1
    m = len(edges)
    q = 0.0
    for group in partition:
        gs = set(group)
        intra = sum(1 for a, b in edges if a in gs and b in gs)
        kc = sum(deg[v] for v in gs)
        q += intra / m - (kc / (2 * m)) ** 2
    return q


def adjacency_from_edges(n, edges):
    adj = {i: [] for i in range(n)}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    return adj


def grid_edges(rows, cols, offset=0):
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = offset + r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return edges


def assert_connected(community, adjacency):
    members = set(community)
    seen = {community[0]}
    stack = [community[0]]
    while stack:
        v = stack.pop()
        for u in adjacency[v]:
            if u in members and u not in seen:
                seen.add(u)
                stack.append(u)
    assert seen == members


def fake_model(n, coefficients, row_index=None):
    coefficients = np.asarray(coefficients, dtype=float)
    return CalibratedModel(
        spec=ModelSpec(dependent="y", independents=("x",)),
        surfaces=("intercept", "x"),
        row_index=tuple(row_index if row_index is not None else range(n)),
        coefficients=coefficients,
        bandwidths=float(n),
        fitted=np.zeros(n),
        residuals=np.zeros(n),
        hat_trace=2.0,
        hat_diagonal=np.full(n, 2.0 / n),
        enp_per_surface=(1.0, 1.0),
        local_se=np.ones((n, 2)),
        sigma2=1.0,
        rss=1.0,
        standardization_params={"y": (0.0, 1.0), "x": (0.0, 1.0)},
    )


class TestSplit:
    def test_all_insignificant_empty(self):
        split = split_significant(np.arange(6.0) - 3.0, np.zeros(6, bool))
        assert split.positive == ()
        assert split.negative == ()

    def test_alternating_signs_equal_sets(self):
        values = np.tile([1.0, -1.0], 10)
        split = split_significant(values, np.ones(20, bool))
        assert len(split.positive) == len(split.negative) == 10
        assert set(split.positive) == set(range(0, 20, 2))

    def test_zero_goes_positive_flagged(self):
        values = np.array([0.0, -1.0, 2.0])
        split = split_significant(values, np.ones(3, bool))
        assert 0 in split.positive
        assert split.zero_flagged == (0,)

    def test_mask_respected(self):
        values = np.array([5.0, -5.0, 5.0, -5.0])
        mask = np.array([True, True, False, False])
        split = split_significant(values, mask)
        assert split.positive == (0,)
        assert split.negative == (1,)

    def test_shape_mismatch(self):
        with pytest.raises(RangeError):
            split_significant(np.ones(4), np.ones(3, bool))


class TestLeiden:
    def test_empty_graph(self):
        assert leiden_communities([], {}) == ()

    def test_two_disjoint_blobs(self):
        edges = grid_edges(2, 3) + grid_edges(2, 3, offset=6)
        adj = adjacency_from_edges(12, edges)
        found = leiden_communities(range(12), adj, seed=1)
        as_sets = {frozenset(c) for c in found}
        assert as_sets == {frozenset(range(6)), frozenset(range(6, 12))}

    def test_single_clique(self):
        edges = [(a, b) for a in range(5) for b in range(a + 1, 5)]
        adj = adjacency_from_edges(5, edges)
        found = leiden_communities(range(5), adj, seed=0)
        assert len(found) == 1
        assert set(found[0]) == set(range(5))

    def test_planted_two_community_grid(self):
        # two 4x8 grids joined by a single bridge edge, 64 nodes
        edges = grid_edges(4, 8) + grid_edges(4, 8, offset=32) + [(31, 32)]
        adj = adjacency_from_edges(64, edges)
        found = leiden_communities(range(64), adj, seed=3)
        planted = [list(range(32)), list(range(32, 64))]
        q_found = q_oracle(64, edges, found)
        q_planted = q_oracle(64, edges, planted)
        assert q_found >= q_planted - 0.02
        for com in found:
            assert_connected(com, adj)

    def test_beats_singletons(self):
        edges = grid_edges(5, 5)
        adj = adjacency_from_edges(25, edges)
        found = leiden_communities(range(25), adj, seed=2)
        q_found = q_oracle(25, edges, found)
        q_single = q_oracle(25, edges, [[v] for v in range(25)])
        assert q_found >= q_single

    def test_deterministic_for_seed(self):
        edges = grid_edges(6, 6)
        adj = adjacency_from_edges(36, edges)
        a = leiden_communities(range(36), adj, seed=9)
        b = leiden_communities(range(36), adj, seed=9)
        assert a == b

    def test_isolated_nodes_become_singletons(self):
        adj = {0: [1], 1: [0], 2: [], 3: []}
        found = leiden_communities(range(4), adj, seed=0)
        as_sets = {frozenset(c) for c in found}
        assert frozenset({0, 1}) in as_sets
        assert frozenset({2}) in as_sets

    def test_partition_property(self):
        edges = grid_edges(4, 4) + [(0, 15)]
        adj = adjacency_from_edges(16, edges)
        found = leiden_communities(range(16), adj, seed=5)
        flat = sorted(v for com in found for v in com)
        assert flat == list(range(16))

    def test_module_modularity_agrees_with_oracle(self):
        edges = grid_edges(3, 5)
        adj = adjacency_from_edges(15, edges)
        part = [list(range(5)), list(range(5, 15))]
        assert modularity(range(15), adj, part) == pytest.approx(
            q_oracle(15, edges, part), abs=1e-12
        )


def pocket_mask(rows, cols, blocks):
    mask = np.zeros(rows * cols, dtype=bool)
    for r0, r1, c0, c1 in blocks:
        for r in range(r0, r1):
            for c in range(c0, c1):
                mask[r * cols + c] = True
    return mask


class TestDetect:
    def setup_method(self):
        self.table = grid_table(12, 12, {"y": np.zeros(144), "x": np.zeros(144)})
        self.weights = queen_adjacency(self.table)

    def test_fully_insignificant_empty(self):
        model = fake_model(144, np.ones((144, 2)))
        cs = detect_clusters(
            "x", model, np.zeros(144, bool), self.weights, self.table
        )
        assert cs.positive_clusters == ()
        assert cs.negative_clusters == ()
        assert cs.isolated == ()

    def test_four_pockets(self):
        blocks = [(1, 3, 1, 3), (1, 3, 8, 10), (8, 10, 1, 3), (8, 10, 8, 10)]
        mask = pocket_mask(12, 12, blocks)
        model = fake_model(144, np.ones((144, 2)) * 2.0)
        cs = detect_clusters("x", model, mask, self.weights, self.table)
        assert len(cs.positive_clusters) == 4
        assert cs.negative_clusters == ()
        assert cs.isolated == ()
        sizes = [c.size for c in cs.positive_clusters]
        assert sizes == [4, 4, 4, 4]

    def test_partition_property(self):
        rng = np.random.default_rng(4)
        mask = rng.random(144) < 0.4
        coef = np.column_stack([np.ones(144), rng.standard_normal(144)])
        model = fake_model(144, coef)
        cs = detect_clusters("x", model, mask, self.weights, self.table)
        covered = set(cs.isolated)
        for c in cs.positive_clusters + cs.negative_clusters:
            assert covered.isdisjoint(c.region_ids)
            covered.update(c.region_ids)
        expect = {self.table.region_ids[i] for i in np.flatnonzero(mask)}
        assert covered == expect

    def test_sign_split_and_mean_sign(self):
        coef_x = np.zeros(144)
        blocks_pos = [(1, 3, 1, 3), (8, 10, 8, 10)]
        blocks_neg = [(1, 3, 8, 10), (8, 10, 1, 3)]
        mpos = pocket_mask(12, 12, blocks_pos)
        mneg = pocket_mask(12, 12, blocks_neg)
        coef_x[mpos] = 1.5
        coef_x[mneg] = -2.5
        model = fake_model(144, np.column_stack([np.ones(144), coef_x]))
        cs = detect_clusters(
            "x", model, mpos | mneg, self.weights, self.table
        )
        assert len(cs.positive_clusters) == 2
        assert len(cs.negative_clusters) == 2
        assert all(c.mean_coefficient > 0 for c in cs.positive_clusters)
        assert all(c.mean_coefficient < 0 for c in cs.negative_clusters)
        assert all(c.sign == "negative" for c in cs.negative_clusters)

    def test_singletons_go_isolated(self):
        mask = np.zeros(144, dtype=bool)
        mask[0] = True  # lone corner cell
        mask[70] = True
        mask[71] = True  # adjacent pair stays a cluster
        model = fake_model(144, np.ones((144, 2)))
        cs = detect_clusters("x", model, mask, self.weights, self.table)
        assert len(cs.positive_clusters) == 1
        assert cs.positive_clusters[0].size == 2
        assert cs.isolated == (self.table.region_ids[0],)

    def test_every_cluster_connected(self):
        rng = np.random.default_rng(6)
        mask = rng.random(144) < 0.5
        model = fake_model(144, np.ones((144, 2)))
        cs = detect_clusters("x", model, mask, self.weights, self.table)
        idx = {rid: i for i, rid in enumerate(self.table.region_ids)}
        adj = {i: self.weights.neighbors[i] for i in range(144)}
        for c in cs.positive_clusters:
            assert_connected([idx[r] for r in c.region_ids], adj)

    def test_identifiers_and_ids(self):
        blocks = [(1, 3, 1, 3), (8, 10, 8, 10)]
        mask = pocket_mask(12, 12, blocks)
        model = fake_model(144, np.ones((144, 2)))
        cs = detect_clusters("x", model, mask, self.weights, self.table)
        ids = [c.cluster_id for c in cs.positive_clusters]
        assert ids == ["x:pos:0", "x:pos:1"]
        assert cs.positive_clusters[0].location_identifier.startswith(
            "Cluster 1 near ("
        )
        got = cs.cluster("x:pos:1")
        assert got.size == 4
        with pytest.raises(NotFoundError):
            cs.cluster("x:pos:9")

    def test_deterministic(self):
        rng = np.random.default_rng(7)
        mask = rng.random(144) < 0.5
        model = fake_model(144, np.ones((144, 2)))
        a = detect_clusters("x", model, mask, self.weights, self.table, seed=2)
        b = detect_clusters("x", model, mask, self.weights, self.table, seed=2)
        assert a == b

    def test_unknown_surface(self):
        model = fake_model(144, np.ones((144, 2)))
        with pytest.raises(NotFoundError):
            detect_clusters(
                "z", model, np.zeros(144, bool), self.weights, self.table
            )

    def test_zero_coefficient_flagged(self):
        coef_x = np.ones(144)
        coef_x[70] = 0.0
        mask = np.zeros(144, dtype=bool)
        mask[70] = True
        mask[71] = True
        model = fake_model(144, np.column_stack([np.ones(144), coef_x]))
        cs = detect_clusters("x", model, mask, self.weights, self.table)
        assert cs.zero_flagged == (self.table.region_ids[70],)
        assert len(cs.positive_clusters) == 1


class TestClusterSetEquality:
    def test_dataclass_roundtrip_fields(self):
        cs = ClusterSet(
            surface="x",
            positive_clusters=(),
            negative_clusters=(),
            isolated=("a",),
            zero_flagged=(),
        )
        assert cs.clusters == ()
        assert cs.isolated == ("a",)
