import itertools
import math

import numpy as np
import pytest
import scipy.sparse as sp

from ehhnet.errors import ResourceBound
from ehhnet.graph import (adjacency_matrix, check_adjacency, from_adjacency,
                          full_connection_network, interaction_matrix, kept_nodes,
                          prune, validate)
from ehhnet.network import EhhNetwork, NormalizationParams, SourceNode, data_matrix, min_form

from conftest import EXAMPLE_ADJ, EXAMPLE_IR, four_input_network, random_network, sample_inputs


def reachability(adj, n_sources):
    """Transitive closure by repeated edge relaxation, source rows only."""
    a = np.asarray(adj.todense() if sp.issparse(adj) else adj, dtype=bool)
    r = a.copy()
    while True:
        nxt = r | (r.astype(int) @ a.astype(int) > 0)
        if np.array_equal(nxt, r):
            break
        r = nxt
    r[n_sources:] = False
    return r.astype(int)


class TestAdjacency:
    def test_example(self):
        np.testing.assert_array_equal(adjacency_matrix(four_input_network()).toarray(), EXAMPLE_ADJ)

    def test_round_trip(self):
        net = four_input_network(np.arange(9.0))
        back = from_adjacency(EXAMPLE_ADJ, net.normalizer, net.sources, net.weights)
        assert back.parents == net.parents

    def test_column_with_three_ones(self):
        adj = EXAMPLE_ADJ.copy()
        adj[3, 4] = 1
        v = check_adjacency(adj, 4)
        assert [(x.node, x.rule) for x in v] == [(4, "column-degree")]
        with pytest.raises(ValueError):
            from_adjacency(adj, NormalizationParams.identity(4),
                           four_input_network().sources)

    def test_lower_triangle_edge(self):
        adj = EXAMPLE_ADJ.copy()
        adj[6, 6] = 0
        adj[6, 4] = 1
        adj[2, 4] = 0
        rules = {x.rule for x in check_adjacency(adj, 4)}
        assert "upper-triangular" in rules

    def test_edge_into_source(self):
        adj = EXAMPLE_ADJ.copy()
        adj[0, 1] = 1
        assert [x.rule for x in check_adjacency(adj, 4)] == ["source-column"]


class TestValidate:
    def test_example_valid(self):
        assert validate(four_input_network()) == []

    def test_shared_variable(self):
        net = EhhNetwork(NormalizationParams.identity(2),
                         [SourceNode(0, 0.0), SourceNode(0, 0.5), SourceNode(1, 0.0)],
                         [(0, 1)])
        v = validate(net)
        assert [(x.node, x.rule) for x in v] == [(3, "rule2")]

    def test_shared_variable_through_intermediate(self):
        sources = four_input_network().sources
        # C1 covers {x1, x3}; pairing it with D3 repeats x3
        net = EhhNetwork(NormalizationParams.identity(4), sources, [(0, 2), (2, 4)])
        assert [x.rule for x in validate(net)] == ["rule2"]

    def test_parent_after_child(self):
        net = EhhNetwork(NormalizationParams.identity(4), four_input_network().sources,
                         [(0, 5), (1, 2)])
        assert "rule1" in {x.rule for x in validate(net)}

    def test_same_parent_twice(self):
        net = EhhNetwork(NormalizationParams.identity(4), four_input_network().sources, [(1, 1)])
        assert "column-degree" in {x.rule for x in validate(net)}

    def test_offset_out_of_range(self):
        net = EhhNetwork(NormalizationParams.identity(1), [SourceNode(0, 1.0)])
        assert [x.rule for x in validate(net)] == ["offset-range"]

    def test_duplicates_only_flagged_on_request(self):
        net = EhhNetwork(NormalizationParams.identity(4), four_input_network().sources,
                         [(0, 2), (2, 0)])
        assert validate(net) == []
        dup = validate(net, flag_duplicates=True)
        assert [(x.node, x.rule) for x in dup] == [(5, "duplicate")]

    def test_random_networks_valid(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            assert validate(random_network(rng), flag_duplicates=True) == []


class TestInteraction:
    def test_example_golden(self):
        ir = interaction_matrix(adjacency_matrix(four_input_network()), 4)
        np.testing.assert_array_equal(ir.toarray(), EXAMPLE_IR)

    def test_no_intermediates(self):
        net = EhhNetwork(NormalizationParams.identity(3),
                         [SourceNode(v, 0.0) for v in range(3)])
        adj = adjacency_matrix(net)
        np.testing.assert_array_equal(interaction_matrix(adj, 3).toarray(), adj.toarray())

    def test_matches_reachability_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            net = random_network(rng)
            adj = adjacency_matrix(net)
            ir = interaction_matrix(adj, net.n_sources).toarray()
            np.testing.assert_array_equal(ir, reachability(adj, net.n_sources))

    def test_columns_are_min_form_sets(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            net = random_network(rng)
            ir = interaction_matrix(adjacency_matrix(net), net.n_sources).toarray()
            for j in range(net.n_sources, net.n_nodes):
                assert set(np.flatnonzero(ir[:, j])) == min_form(net, j)


class TestPrune:
    def test_output_weight_zero_cascades(self):
        w = np.arange(9.0) + 1
        w[8] = 0.0
        net = prune(four_input_network(w))
        assert net.n_nodes == 7
        w[6] = 0.0
        net = prune(four_input_network(w))
        assert net.n_nodes == 6
        assert net.n_sources == 4
        # remaining intermediates are C1 and C3, with C3's parent reindexed
        assert net.parents == ((0, 2), (1, 4))

    def test_fed_node_is_kept(self):
        w = np.arange(9.0) + 1
        w[6] = 0.0
        net = four_input_network(w)
        assert prune(net) is net
        np.testing.assert_array_equal(kept_nodes(net), np.arange(8))

    def test_all_nonzero_unchanged(self, four_input):
        assert prune(four_input) is four_input

    def test_unused_source_removed(self):
        w = np.arange(9.0) + 1
        w[8] = w[7] = w[6] = w[2] = 0.0  # C4, C3, C2 gone, then D2
        net = prune(four_input_network(w))
        assert [s.var for s in net.sources] == [0, 2, 3]
        assert net.parents == ((0, 1),)

    def test_output_unchanged(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            net = random_network(rng)
            w = net.weights.copy()
            w[1:][rng.random(net.n_nodes) < 0.5] = 0.0
            net = net.with_weights(w)
            small = prune(net)
            assert validate(small) == []
            x = sample_inputs(net, rng, 1000, margin=0.1)
            assert np.max(np.abs(small.predict(x) - net.predict(x))) <= 1e-12
            assert np.count_nonzero(small.weights) == np.count_nonzero(w)

    def test_idempotent(self):
        rng = np.random.default_rng(4)
        net = random_network(rng, n_inter=20)
        w = net.weights.copy()
        w[1:][::2] = 0.0
        once = prune(net.with_weights(w))
        assert prune(once) is once


class TestFullConnection:
    def test_three_inputs_two_offsets(self):
        net = full_connection_network(3, 2)
        assert net.n_sources == 6
        assert net.n_nodes - net.n_sources == 20
        assert validate(net, flag_duplicates=True) == []

    @pytest.mark.parametrize("n,q,n_inter", [(1, 2, 0), (2, 1, 1), (2, 2, 4), (4, 1, 11)])
    def test_counts(self, n, q, n_inter):
        net = full_connection_network(n, q)
        assert net.n_sources == n * q
        assert net.n_nodes - net.n_sources == n_inter
        total = sum(math.comb(n, r) * q ** r for r in range(1, n + 1))
        assert net.n_nodes == total
        assert net.n_nodes + 1 == (q + 1) ** n

    def test_all_distinct_variable_combinations_present(self):
        n, q = 3, 2
        net = full_connection_network(n, q)
        got = {frozenset(min_form(net, j)) for j in range(net.n_nodes)}
        want = set()
        for r in range(1, n + 1):
            for vars_ in itertools.combinations(range(n), r):
                for ks in itertools.product(range(q), repeat=r):
                    want.add(frozenset(v * q + k for v, k in zip(vars_, ks)))
        assert got == want

    def test_offsets(self):
        net = full_connection_network(2, 4)
        assert [s.offset for s in net.sources[:4]] == [0.0, 0.25, 0.5, 0.75]

    def test_vertex_interpolation(self):
        rng = np.random.default_rng(5)
        net = full_connection_network(2, 2)
        g = np.linspace(0.0, 1.0, 3)
        verts = np.array(list(itertools.product(g, g)))
        target = rng.standard_normal(len(verts))
        z = data_matrix(net, verts)
        assert z.shape == (9, 9)
        w = np.linalg.solve(z, target)
        assert np.max(np.abs(net.with_weights(w).predict(verts) - target)) <= 1e-8

    def test_cap(self):
        with pytest.raises(ResourceBound):
            full_connection_network(20, 5)
