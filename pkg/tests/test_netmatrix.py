"""Network coupling matrices: channel weights, coupling operator, Laplacian."""

from __future__ import annotations

import numpy as np
import pytest

from rol.errors import ScenarioError
from rol.model import Edge, NetworkGraph
from rol.netmatrix import (
    coupling_matrices,
    coupling_operator,
    edge_channel_weight,
    in_degree_laplacian,
    layer_coupling,
)
from rol.synthesis import graph_shape_penalty


def _bare_graph(n_nodes: int, keys, n: int = 2) -> tuple[NetworkGraph, dict]:
    """Graph with identity message maps and no link noise (W=I, H=Hc=0)."""
    edges = tuple(
        Edge(j=j, i=i, W=np.eye(n), H=np.zeros((n, 1)), Hc=np.zeros((n, 1)))
        for (j, i) in keys
    )
    Z = {(j, i): np.eye(n) for (j, i) in keys}
    return NetworkGraph(n_nodes=n_nodes, edges=edges), Z


def _random_connected_digraph(rng, n_nodes: int, n: int = 2):
    """Random digraph containing a directed ring (hence weakly connected)."""
    keys = {(j, j % n_nodes + 1) for j in range(1, n_nodes + 1)}
    for j in range(1, n_nodes + 1):
        for i in range(1, n_nodes + 1):
            if i != j and rng.random() < 0.4:
                keys.add((j, i))
    return _bare_graph(n_nodes, sorted(keys), n)


class TestChannelWeights:
    def test_builtin_detector_weight(self, scenario):
        # H = Hc = (0.1/sqrt 2)·ones gives HH' + HcHc' = 0.01 J; Z = 0.01 I
        e = scenario.graph.edges[0]
        U = edge_channel_weight(e, scenario.weights.Z[e.key], "detector")
        expect = 0.01 * (np.ones((6, 6)) + np.eye(6))
        assert np.allclose(U, expect, atol=1e-15)

    def test_builtin_observer_weight_drops_extra_channel(self, scenario):
        e = scenario.graph.edges[0]
        U = edge_channel_weight(e, scenario.weights.Zbar[e.key], "observer")
        expect = 0.005 * np.ones((6, 6)) + 0.01 * np.eye(6)
        assert np.allclose(U, expect, atol=1e-15)

    def test_unknown_layer_rejected(self, scenario):
        e = scenario.graph.edges[0]
        with pytest.raises(ValueError, match="layer"):
            edge_channel_weight(e, scenario.weights.Z[e.key], "uplink")

    def test_singular_weight_raises(self):
        graph, _ = _bare_graph(2, [(1, 2)])
        with pytest.raises(ScenarioError, match="singular"):
            layer_coupling(graph, {(1, 2): np.zeros((2, 2))}, "detector")


class TestNodeCoupling:
    def test_delta_matches_brute_force_sandwich(self, scenario):
        Z = scenario.weights.Z
        nodes = layer_coupling(scenario.graph, Z, "detector")
        for nc in nodes:
            expect = np.zeros((6, 6))
            for e in scenario.graph.in_edges(nc.i):
                U = edge_channel_weight(e, Z[e.key], "detector")
                Ui = np.linalg.inv(U)
                expect += e.W.T @ Ui @ Z[e.key] @ Ui @ e.W
            assert np.allclose(nc.delta, expect, atol=1e-12)

    def test_penalty_matches_brute_force(self, scenario):
        Z = scenario.weights.Z
        nodes = layer_coupling(scenario.graph, Z, "detector")
        for nc in nodes:
            expect = np.zeros((6, 6))
            for e in scenario.graph.in_edges(nc.i):
                U = edge_channel_weight(e, Z[e.key], "detector")
                expect += e.W.T @ np.linalg.inv(U) @ e.W
            assert np.allclose(nc.penalty, expect, atol=1e-12)

    def test_node_without_incoming_links_has_zero_coupling(self):
        graph, Z = _bare_graph(3, [(1, 2), (2, 3)])  # node 1 receives nothing
        nodes = layer_coupling(graph, Z, "observer")
        nc1 = nodes[0]
        assert nc1.i == 1 and nc1.edges == ()
        assert not nc1.delta.any() and not nc1.penalty.any()


class TestCouplingOperator:
    def test_ring_reduces_to_laplacian_kron_identity(self):
        keys = [(j, j % 6 + 1) for j in range(1, 7)]
        graph, Z = _bare_graph(6, keys, n=3)
        L, _ = in_degree_laplacian(graph)
        for layer in ("detector", "observer"):
            Phi = coupling_operator(graph, Z, layer)
            assert np.array_equal(Phi, np.kron(L, np.eye(3)))

    def test_random_digraphs_reduce_to_laplacian_kron_identity(self):
        rng = np.random.default_rng(17)
        for _ in range(5):
            n_nodes = int(rng.integers(3, 7))
            graph, Z = _random_connected_digraph(rng, n_nodes)
            L, _ = in_degree_laplacian(graph)
            for layer in ("detector", "observer"):
                Phi = coupling_operator(graph, Z, layer)
                assert np.array_equal(Phi, np.kron(L, np.eye(2)))

    def test_block_sparsity_follows_edges(self):
        rng = np.random.default_rng(5)
        graph, Z = _random_connected_digraph(rng, 5, n=2)
        Phi = coupling_operator(graph, Z, "detector")
        for i in range(1, 6):
            for j in range(1, 6):
                block = Phi[2 * (i - 1): 2 * i, 2 * (j - 1): 2 * j]
                if i == j:
                    continue
                assert block.any() == graph.has_edge(j, i)

    def test_penalty_is_exactly_symmetric(self, scenario):
        cm = coupling_matrices(scenario.graph, scenario.weights.Z, "detector")
        assert np.array_equal(cm.penalty, cm.penalty.T)

    def test_penalty_combines_phi_and_delta(self, scenario):
        cm = coupling_matrices(scenario.graph, scenario.weights.Z, "detector")
        Delta = np.zeros_like(cm.Phi)
        for nc in cm.nodes:
            b = 6 * (nc.i - 1)
            Delta[b: b + 6, b: b + 6] = nc.delta
        assert np.allclose(cm.penalty, cm.Phi + cm.Phi.T - Delta, atol=1e-14)

    def test_noise_free_penalty_matches_graph_shape_penalty(self):
        keys = [(j, j % 6 + 1) for j in range(1, 7)]
        graph, Z = _bare_graph(6, keys, n=2)
        cm = coupling_matrices(graph, Z, "observer")
        assert np.array_equal(cm.penalty, graph_shape_penalty(graph, 2))


class TestInDegreeLaplacian:
    def test_complete_digraph_on_three_nodes(self):
        keys = [(j, i) for j in range(1, 4) for i in range(1, 4) if i != j]
        graph, _ = _bare_graph(3, keys)
        L, order = in_degree_laplacian(graph)
        assert order == (1, 2, 3)
        J = np.ones((3, 3))
        assert np.array_equal(L, 2.0 * np.eye(3) - (J - np.eye(3)))

    def test_row_sums_vanish(self, scenario):
        L, _ = in_degree_laplacian(scenario.graph)
        assert np.array_equal(L.sum(axis=1), np.zeros(6))

    def test_ring_in_degrees_are_one(self, scenario):
        L, _ = in_degree_laplacian(scenario.graph)
        assert np.array_equal(np.diag(L), np.ones(6))
