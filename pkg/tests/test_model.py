"""Scenario data model: builtin example content, validation, serialization."""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from rol.errors import ScenarioError
from rol.model import (
    Edge,
    MatrixSchedule,
    NetworkGraph,
    builtin_example_scenario,
    example_disturbance_suite,
    load_scenario,
    save_scenario,
    scenario_synthesis_hash,
    scenario_to_dict,
    scenario_from_dict,
    validate_scenario,
)


# ---------------------------------------------------------------------------
# Builtin example content
# ---------------------------------------------------------------------------


class TestBuiltinExample:
    def test_plant_dimensions_and_entries(self, scenario):
        A = scenario.plant.A.constant_value
        B = scenario.plant.B.constant_value
        assert A.shape == (6, 6)
        assert A[0, 0] == pytest.approx(0.3775, abs=0.0)
        assert np.array_equal(B, 0.1 * np.eye(6))
        assert scenario.n == 6 and scenario.n_w == 6

    def test_sensors_have_two_rows_and_uniform_noise(self, scenario):
        for i in range(1, 7):
            s = scenario.sensor(i)
            C = s.C.constant_value
            assert C.shape == (2, 6)
            # each row selects exactly one state
            for row in C:
                assert np.count_nonzero(row) == 1 and row.max() == 1.0
            assert np.array_equal(s.D.constant_value, 0.01 * np.eye(2))

    def test_graph_is_directed_ring(self, scenario):
        g = scenario.graph
        assert g.n_nodes == 6
        expected = {(1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 1)}
        assert set(g.edge_keys) == expected
        for i in range(1, 7):
            pred = 6 if i == 1 else i - 1
            assert g.in_neighbors(i) == (pred,)
        assert g.is_weakly_connected()

    def test_edge_channels(self, scenario):
        for e in scenario.graph.edges:
            assert np.array_equal(e.W, np.eye(6))
            assert e.H.shape == (6, 1) and e.Hc.shape == (6, 1)
            assert np.allclose(e.H, 0.1 / np.sqrt(2.0))
            assert np.allclose(e.Hc, 0.1 / np.sqrt(2.0))

    def test_attack_class_identical_across_nodes(self, scenario):
        for i in range(1, 7):
            ac = scenario.attack_class.node(i)
            assert ac.num == (410.0,)
            assert ac.den == (1.0, 40.0)
            assert np.array_equal(ac.F, np.ones((6, 1)))
            assert not ac.Fbar.any()

    def test_recorded_attack_is_node2_step(self, scenario):
        assert len(scenario.attacks) == 1
        atk = scenario.attacks[0]
        assert atk.node == 2
        (seg,) = atk.bias
        assert seg.value.tolist() == [5.0]
        assert (seg.start, seg.end) == (4.0, 7.0)
        assert atk.masking == ()

    def test_weights(self, scenario):
        w = scenario.weights
        assert w.alpha == 1.0
        for key in scenario.graph.edge_keys:
            assert np.array_equal(w.Z[key], 0.01 * np.eye(6))
            assert np.array_equal(w.Zbar[key], 0.01 * np.eye(6))
        for X in w.X + w.Xbar:
            assert np.array_equal(X, np.eye(6))

    def test_error_weight_is_laplacian_kron_identity(self, scenario):
        from rol.netmatrix import in_degree_laplacian

        L, _ = in_degree_laplacian(scenario.graph)
        Lr, _ = in_degree_laplacian(scenario.graph.reversed())
        P = np.kron(L + Lr, np.eye(6))
        assert np.array_equal(scenario.weights.P, P)
        # symmetric positive semidefinite with a consensus null direction
        assert np.array_equal(P, P.T)
        eigs = np.linalg.eigvalsh(P)
        assert eigs[0] == pytest.approx(0.0, abs=1e-12)
        ones = np.ones(36) / np.sqrt(36)
        assert np.linalg.norm(P @ ones) < 1e-12

    def test_simulation_grid(self, scenario):
        sim = scenario.simulation
        assert sim.t_end == 8.0
        assert sim.step == 1e-5
        assert sim.store_decimation == 20
        assert not sim.x0.any()
        assert all(not xi.any() for xi in sim.xi)

    def test_builtin_validates_cleanly(self, scenario):
        report = validate_scenario(scenario)
        assert report.ok
        assert report.empty, [str(i) for i in report.issues]

    def test_plant_is_unstable_so_estimation_matters(self, scenario):
        eigs = np.linalg.eigvals(scenario.plant.A.constant_value)
        assert eigs.real.max() > 0.0


# ---------------------------------------------------------------------------
# Validation diagnostics
# ---------------------------------------------------------------------------


def _replace_graph_edges(scenario, edges):
    graph = NetworkGraph(n_nodes=scenario.graph.n_nodes, edges=tuple(edges))
    return dataclasses.replace(scenario, graph=graph)


class TestValidation:
    def test_disconnected_graph_is_warning_not_error(self, scenario):
        keep = [e for e in scenario.graph.edges if e.key in {(1, 2), (2, 3)}]
        sc = _replace_graph_edges(scenario, keep)
        w = scenario.weights
        z = {e.key: w.Z[e.key] for e in keep}
        zb = {e.key: w.Zbar[e.key] for e in keep}
        sc = dataclasses.replace(
            sc, weights=dataclasses.replace(w, Z=z, Zbar=zb)
        )
        report = validate_scenario(sc)
        assert report.ok
        assert any("connected" in i.message for i in report.warnings)

    def test_indefinite_edge_weight_is_error(self, scenario):
        w = scenario.weights
        bad = dict(w.Z)
        key = scenario.graph.edge_keys[0]
        bad[key] = -0.01 * np.eye(6)
        sc = dataclasses.replace(scenario, weights=dataclasses.replace(w, Z=bad))
        report = validate_scenario(sc)
        assert not report.ok
        assert any("positive definite" in i.message for i in report.errors)

    def test_singular_measurement_noise_is_error(self, scenario):
        s1 = scenario.sensors[0]
        D_bad = np.array([[0.01, 0.0], [0.0, 0.0]])
        sensors = (
            dataclasses.replace(s1, D=MatrixSchedule.constant(D_bad)),
        ) + scenario.sensors[1:]
        sc = dataclasses.replace(scenario, sensors=sensors)
        report = validate_scenario(sc)
        assert not report.ok
        assert any("singular at node 1" in i.message for i in report.errors)

    def test_wrong_edge_row_space_is_error(self, scenario):
        e0 = scenario.graph.edges[0]
        bad = Edge(j=e0.j, i=e0.i, W=np.eye(5, 4), H=e0.H[:5], Hc=e0.Hc[:5])
        edges = (bad,) + scenario.graph.edges[1:]
        sc = _replace_graph_edges(scenario, edges)
        report = validate_scenario(sc)
        assert not report.ok
        assert any("column count 4" in i.message for i in report.errors)

    def test_attack_on_unknown_node_is_error(self, scenario):
        atk = dataclasses.replace(scenario.attacks[0], node=9)
        sc = dataclasses.replace(scenario, attacks=(atk,))
        report = validate_scenario(sc)
        assert any("out of range" in i.message for i in report.errors)

    def test_nonpositive_step_is_error(self, scenario):
        sim = dataclasses.replace(scenario.simulation, step=0.0)
        sc = dataclasses.replace(scenario, simulation=sim)
        report = validate_scenario(sc)
        assert any(i.field == "simulation.step" for i in report.errors)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


class TestSerialization:
    def test_round_trip_is_bit_identical(self, scenario, tmp_path):
        path = tmp_path / "scenario.json"
        save_scenario(scenario, path)
        back = load_scenario(path)
        assert np.array_equal(
            back.plant.A.constant_value, scenario.plant.A.constant_value
        )
        assert back.graph.edge_keys == scenario.graph.edge_keys
        assert back.attacks[0].node == 2
        assert scenario_synthesis_hash(back) == scenario_synthesis_hash(scenario)
        assert validate_scenario(back).ok
        # a second save of the loaded scenario reproduces the file exactly
        path2 = tmp_path / "again.json"
        save_scenario(back, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_dict_round_trip(self, scenario):
        d = scenario_to_dict(scenario)
        back = scenario_from_dict(d)
        assert scenario_synthesis_hash(back) == scenario_synthesis_hash(scenario)

    def test_malformed_matrix_raises_scenario_error(self, scenario):
        d = scenario_to_dict(scenario)
        d["plant"]["A"] = [[1.0, 2.0]]  # bare list where a schedule object belongs
        with pytest.raises(ScenarioError, match="plant.A"):
            scenario_from_dict(d)

    def test_non_numeric_entries_raise_scenario_error(self, scenario):
        d = scenario_to_dict(scenario)
        d["plant"]["A"]["constant"] = [[1.0, "oops"]]
        with pytest.raises(ScenarioError):
            scenario_from_dict(d)


# ---------------------------------------------------------------------------
# Synthesis hash: covers design inputs only
# ---------------------------------------------------------------------------


class TestSynthesisHash:
    def test_simulation_and_attack_edits_keep_hash(self, scenario):
        h0 = scenario_synthesis_hash(scenario)
        sc = dataclasses.replace(
            scenario,
            attacks=(),
            simulation=dataclasses.replace(scenario.simulation, t_end=2.0),
        )
        assert scenario_synthesis_hash(sc) == h0

    def test_weight_edit_changes_hash(self, scenario):
        h0 = scenario_synthesis_hash(scenario)
        w = dataclasses.replace(scenario.weights, alpha=2.0)
        sc = dataclasses.replace(scenario, weights=w)
        assert scenario_synthesis_hash(sc) != h0

    def test_plant_edit_changes_hash(self, scenario):
        h0 = scenario_synthesis_hash(scenario)
        A = scenario.plant.A.constant_value.copy()
        A[0, 0] += 1e-9
        plant = dataclasses.replace(scenario.plant, A=MatrixSchedule.constant(A))
        sc = dataclasses.replace(scenario, plant=plant)
        assert scenario_synthesis_hash(sc) != h0


# ---------------------------------------------------------------------------
# Disturbance suite
# ---------------------------------------------------------------------------


class TestDisturbanceSuite:
    def test_suite_targets_exist_and_validate(self, scenario):
        suite = example_disturbance_suite()
        sc = dataclasses.replace(scenario, disturbances=suite)
        assert validate_scenario(sc).ok
        channels = {d.channel for d in suite}
        assert {"w", "v", "v_edge", "vc_edge"} <= channels

    def test_all_terms_die_out_before_horizon_end(self, scenario):
        for d in example_disturbance_suite():
            t = d.term
            if t.kind == "burst":
                assert t.end is not None and t.end <= 4.5
            else:
                # decaying envelope: a·e^{−bt} with b > 0
                assert t.kind == "decaying_sin" and t.b > 0.0


# ---------------------------------------------------------------------------
# Matrix schedules
# ---------------------------------------------------------------------------


class TestMatrixSchedule:
    def test_constant_schedule(self):
        M = np.arange(6.0).reshape(2, 3)
        s = MatrixSchedule.constant(M)
        assert s.is_constant
        assert s.shape == (2, 3)
        assert np.array_equal(s(0.0), M)
        assert np.array_equal(s(123.4), M)

    def test_sampled_hold_semantics(self):
        times = [0.0, 1.0, 2.0]
        vals = [np.eye(2) * k for k in (1.0, 2.0, 3.0)]
        s = MatrixSchedule.sampled(times, vals, hold=True)
        assert not s.is_constant
        assert np.array_equal(s(-1.0), vals[0])
        assert np.array_equal(s(0.5), vals[0])
        assert np.array_equal(s(1.0), vals[1])
        assert np.array_equal(s(5.0), vals[2])

    def test_sampled_linear_interpolation(self):
        s = MatrixSchedule.sampled(
            [0.0, 2.0], [np.zeros((1, 1)), 2.0 * np.ones((1, 1))], hold=False
        )
        assert s(1.0)[0, 0] == pytest.approx(1.0, rel=1e-15)

    def test_json_round_trip(self):
        s = MatrixSchedule.sampled(
            [0.0, 1.0], [np.eye(2), 2.0 * np.eye(2)], hold=False
        )
        back = MatrixSchedule.from_json(s.to_json(), "test")
        assert np.array_equal(back.values, s.values)
        assert np.array_equal(back.times, s.times)
        assert back.hold == s.hold
