import numpy as np
import pytest

from graphcoarsen import (DisconnectedGraphError, WeightedGraph,
                          graph_distance_oversample, oversample, partition_balanced)
from graphcoarsen.partition import Partition
from graphcoarsen.problems import lattice_graph


def brute_force_oversample(graph, members, delta_h):
    """Oracle: scan every vertex-member pair."""
    out = set(members.tolist())
    for v in range(graph.n_vertices):
        d = np.linalg.norm(graph.coords[members] - graph.coords[v], axis=1)
        if d.min() <= delta_h:
            out.add(v)
    return out


class TestBalancedPartition:
    def test_single_subdomain(self):
        g = lattice_graph(4, 4)
        part = partition_balanced(g, 1, seed=0)
        assert len(part.subdomain(0)) == 16

    def test_singletons(self):
        g = lattice_graph(3, 3)
        part = partition_balanced(g, 9, seed=0)
        assert np.array_equal(np.sort(part.sizes), np.ones(9))

    def test_grid_sizes_balanced(self):
        g = lattice_graph(20, 20)
        part = partition_balanced(g, 4, seed=0)
        assert part.sizes.min() >= 90 and part.sizes.max() <= 110

    def test_cover_and_disjoint(self):
        g = lattice_graph(11, 7)
        part = partition_balanced(g, 5, seed=3)
        counted = np.zeros(g.n_vertices, dtype=int)
        for k in range(5):
            counted[part.subdomain(k).ids] += 1
        assert np.all(counted == 1)

    def test_deterministic_per_seed(self):
        g = lattice_graph(12, 12)
        a = partition_balanced(g, 6, seed=5).assignment
        b = partition_balanced(g, 6, seed=5).assignment
        assert np.array_equal(a, b)

    def test_disconnected_input_names_components(self):
        g = WeightedGraph.build(4, [(0, 1, 1.0), (2, 3, 1.0)])
        with pytest.raises(DisconnectedGraphError, match="2 connected components"):
            partition_balanced(g, 2)

    def test_coordinate_free_bfs_growth(self):
        g = lattice_graph(8, 8)
        bare = WeightedGraph(g.n_vertices, g.edge_index, g.edge_weight)
        part = partition_balanced(bare, 4, seed=0)
        assert part.sizes.sum() == 64
        assert part.sizes.max() - part.sizes.min() <= 1

    def test_weighted_refinement_avoids_cutting_heavy_edges(self):
        # two cliques joined by one light edge: the natural bipartition
        # cuts only the bridge
        edges = []
        for i in range(4):
            for j in range(i + 1, 4):
                edges.append((i, j, 10.0))
                edges.append((4 + i, 4 + j, 10.0))
        edges.append((3, 4, 0.1))
        coords = np.array([[i % 4, i // 4] for i in range(8)], dtype=float)
        g = WeightedGraph.build(8, edges, coords=coords)
        part = partition_balanced(g, 2, seed=0)
        cut = sum(abs(w) for (i, j), w in zip(g.edge_index, g.edge_weight)
                  if part.assignment[i] != part.assignment[j])
        assert cut == pytest.approx(0.1)

    def test_validation_rejects_imbalance(self):
        with pytest.raises(ValueError, match="unbalanced"):
            Partition(10, 2, np.array([0] * 8 + [1] * 2))


class TestOversample:
    def test_zero_radius_is_identity(self):
        g = lattice_graph(6, 6, spacing=0.2)
        part = partition_balanced(g, 4, seed=0)
        part = oversample(g, part, 0.0)
        for k in range(4):
            assert np.array_equal(part.oversampled[k].ids, part.subdomain(k).ids)

    def test_domain_diameter_covers_everything(self):
        g = lattice_graph(5, 5, spacing=0.25)
        part = partition_balanced(g, 3, seed=0)
        part = oversample(g, part, 10.0)
        for k in range(3):
            assert len(part.oversampled[k]) == g.n_vertices

    def test_matches_brute_force_scan(self):
        g = lattice_graph(10, 10, spacing=1.0 / 9.0)  # unit square
        part = partition_balanced(g, 4, seed=0)
        for delta in (0.1, 0.12, 0.25):
            part_os = oversample(g, part, delta)
            for k in range(4):
                expected = brute_force_oversample(g, part.subdomain(k).ids, delta)
                assert set(part_os.oversampled[k].ids.tolist()) == expected

    def test_monotone_in_radius(self):
        g = lattice_graph(9, 9, spacing=0.125)
        part = partition_balanced(g, 4, seed=0)
        prev = None
        for delta in (0.0, 0.13, 0.3, 0.6):
            cur = oversample(g, part, delta)
            if prev is not None:
                for k in range(4):
                    assert np.all(cur.oversampled[k].contains(
                        prev.oversampled[k].ids))
            prev = cur

    def test_closure_mode_contains_vertex_mode(self):
        g = lattice_graph(8, 8, spacing=0.15)
        part = partition_balanced(g, 4, seed=0)
        v = oversample(g, part, 0.2, mode="vertex")
        c = oversample(g, part, 0.2, mode="closure")
        for k in range(4):
            assert np.all(c.oversampled[k].contains(v.oversampled[k].ids))
        # closure consists of whole subdomains
        for k in range(4):
            subs = np.unique(part.assignment[c.oversampled[k].ids])
            expect = np.flatnonzero(np.isin(part.assignment, subs))
            assert np.array_equal(c.oversampled[k].ids, expect)

    def test_missing_coordinates_points_to_hop_variant(self):
        g = lattice_graph(4, 4)
        bare = WeightedGraph(g.n_vertices, g.edge_index, g.edge_weight)
        part = partition_balanced(bare, 2, seed=0)
        with pytest.raises(ValueError, match="graph_distance_oversample"):
            oversample(bare, part, 0.1)


class TestGraphDistanceOversample:
    def _path_partition(self):
        g = WeightedGraph.build(10, [(i, i + 1, 1.0) for i in range(9)])
        assignment = np.array([0, 0, 0, 0, 1, 1, 2, 2, 2, 2])
        return g, Partition(10, 3, assignment, balance_tol=1.0)

    def test_zero_hops(self):
        g, part = self._path_partition()
        out = graph_distance_oversample(g, part, 0)
        assert np.array_equal(out.oversampled[1].ids, [4, 5])

    def test_two_hops_on_path(self):
        g, part = self._path_partition()
        out = graph_distance_oversample(g, part, 2)
        assert np.array_equal(out.oversampled[1].ids, [2, 3, 4, 5, 6, 7])

    def test_diameter_many_hops_covers_all(self):
        g, part = self._path_partition()
        out = graph_distance_oversample(g, part, 9)
        for k in range(3):
            assert len(out.oversampled[k]) == 10
