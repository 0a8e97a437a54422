import math

import networkx as nx
import numpy as np
import pytest

from noisycircuits import (
    CircuitSpec,
    CircuitFormatError,
    Gate,
    ball,
    boundary_size,
    brickwork_circuit,
    build_interaction_graph,
    graph_distance,
)
from noisycircuits.circuit import (
    brickwork_pairs,
    circuit_from_dict,
    circuit_to_dict,
    coords_site,
    gate_matrix,
    site_coords,
)


def single_layer_spec():
    # one layer of gates on (0,1) and (2,3)
    return CircuitSpec(
        h=2,
        geometry=(4,),
        layers=((Gate((0, 1), "cshift"), Gate((2, 3), "cshift")),),
        noise=0.1,
    )


def to_networkx(graph):
    g = nx.Graph()
    g.add_nodes_from(graph.vertices)
    for e in graph.edges():
        g.add_edge(*tuple(e))
    return g


class TestGeometry:
    def test_coords_roundtrip(self):
        geometry = (3, 4, 5)
        for site in range(60):
            assert coords_site(geometry, site_coords(geometry, site)) == site

    def test_ball_radius_zero(self):
        spec = brickwork_circuit((9,), 2, 1, 0.0, kind="cshift")
        assert ball(spec, 5, 0) == {5}

    def test_ball_1d_chain(self):
        spec = brickwork_circuit((12,), 2, 1, 0.0, kind="cshift")
        assert ball(spec, 5, 2) == {3, 4, 5, 6, 7}

    def test_ball_2d_von_neumann(self):
        spec = brickwork_circuit((4, 4), 2, 1, 0.0, kind="cshift")
        center = spec.site((1, 1))
        got = ball(spec, center, 1)
        expected = {
            spec.site(c) for c in [(1, 1), (0, 1), (2, 1), (1, 0), (1, 2)]
        }
        assert got == expected
        assert len(got) == 5

    def test_ball_monotone_in_radius(self):
        spec = brickwork_circuit((5, 5), 2, 1, 0.0, kind="cshift")
        for center in [0, 7, 12, 24]:
            for radius in range(4):
                assert ball(spec, center, radius) <= ball(spec, center, radius + 1)

    def test_ball_chebyshev_flag(self):
        spec = brickwork_circuit((5, 5), 2, 1, 0.0, kind="cshift")
        center = spec.site((2, 2))
        cheb = ball(spec, center, 1, metric="chebyshev")
        assert len(cheb) == 9  # Moore neighborhood


class TestInteractionGraph:
    def test_single_layer_edges(self):
        g = build_interaction_graph(single_layer_spec())
        assert g.edges() == {
            frozenset({(0, 0), (1, 0)}),
            frozenset({(2, 0), (3, 0)}),
        }

    def test_no_gates_no_edges(self):
        spec = CircuitSpec(h=2, geometry=(2,), layers=((),), noise=0.0)
        assert build_interaction_graph(spec).edges() == set()

    def test_brickwork_degree_bound(self):
        # nearest-neighbor two-qubit brickwork in one dimension: degree <= 4
        spec = brickwork_circuit((4,), 2, 2, 0.1, kind="cshift")
        g = build_interaction_graph(spec)
        assert g.max_degree() <= 4

    @pytest.mark.parametrize("n,depth", [(6, 3), (8, 2), (5, 4)])
    def test_degree_bound_various(self, n, depth):
        spec = brickwork_circuit((n,), 2, depth, 0.1, kind="cshift")
        assert build_interaction_graph(spec).max_degree() <= 4

    def test_edge_symmetry(self):
        spec = brickwork_circuit((6,), 2, 3, 0.1, kind="cshift")
        g = build_interaction_graph(spec)
        for v, nbrs in g.adjacency.items():
            for w in nbrs:
                assert v in g.adjacency[w]

    def test_distance_adjacent_is_one(self):
        g = build_interaction_graph(single_layer_spec())
        assert graph_distance(g, [0], [1]) == 1

    def test_distance_disconnected(self):
        g = build_interaction_graph(single_layer_spec())
        assert graph_distance(g, [0, 1], [2, 3]) == math.inf

    def test_distance_matches_bfs_oracle(self):
        spec = brickwork_circuit((8,), 2, 2, 0.1, kind="cshift")
        g = build_interaction_graph(spec)
        nxg = to_networkx(g)
        lengths = dict(nx.all_pairs_shortest_path_length(nxg))
        rng = np.random.default_rng(4)
        for _ in range(30):
            a = int(rng.integers(0, 8))
            c = int(rng.integers(0, 8))
            if a == c:
                continue
            expected = min(
                (
                    lengths[(a, j)].get((c, j2), math.inf)
                    for j in range(2)
                    for j2 in range(2)
                ),
                default=math.inf,
            )
            assert graph_distance(g, [a], [c]) == expected

    def test_distance_metric_properties(self):
        rng = np.random.default_rng(11)
        spec = brickwork_circuit((7,), 2, 3, 0.1, kind="cshift")
        g = build_interaction_graph(spec)
        for _ in range(40):
            a, b, c = rng.choice(7, size=3, replace=False)
            dab = graph_distance(g, [a], [b])
            dba = graph_distance(g, [b], [a])
            assert dab == dba
            dac = graph_distance(g, [a], [c])
            dcb = graph_distance(g, [c], [b])
            if math.isfinite(dac) and math.isfinite(dcb):
                assert dab <= dac + dcb

    def test_1d_distance_tracks_site_gap(self):
        spec = brickwork_circuit((10,), 2, 3, 0.1, kind="cshift")
        g = build_interaction_graph(spec)
        for a in range(10):
            for c in range(a + 1, 10):
                d = graph_distance(g, [a], [c])
                assert abs(d - (c - a)) <= 2

    def test_boundary_all_sites(self):
        g = build_interaction_graph(single_layer_spec())
        assert boundary_size(g, range(4)) == 0

    def test_boundary_single_site(self):
        g = build_interaction_graph(single_layer_spec())
        assert boundary_size(g, [0]) == 1

    def test_boundary_empty_set(self):
        g = build_interaction_graph(single_layer_spec())
        assert boundary_size(g, []) == 0

    def test_deterministic_output(self):
        spec = brickwork_circuit((6,), 2, 3, 0.1, kind="cshift")
        g1 = build_interaction_graph(spec)
        g2 = build_interaction_graph(spec)
        assert g1.adjacency == g2.adjacency


class TestCircuitSpecValidation:
    def test_overlapping_supports_rejected(self):
        with pytest.raises(CircuitFormatError, match="layer 0.*site 1"):
            CircuitSpec(
                h=2,
                geometry=(4,),
                layers=((Gate((0, 1), "cshift"), Gate((1, 2), "cshift")),),
                noise=0.0,
            )

    def test_out_of_range_site_rejected(self):
        with pytest.raises(CircuitFormatError):
            CircuitSpec(
                h=2, geometry=(2,), layers=((Gate((1, 2), "cshift"),),), noise=0.0
            )

    def test_noise_rate_out_of_range(self):
        with pytest.raises(CircuitFormatError):
            CircuitSpec(h=2, geometry=(2,), layers=((),), noise=1.5)

    def test_non_neighbor_gate_rejected(self):
        with pytest.raises(CircuitFormatError, match="nearest-neighbor"):
            CircuitSpec(
                h=2, geometry=(4,), layers=((Gate((0, 3), "cshift"),),), noise=0.0
            )

    def test_nonunitary_matrix_rejected(self):
        gate = Gate((0,), "unitary", matrix=np.array([[1.0, 0.0], [0.0, 2.0]]))
        with pytest.raises(CircuitFormatError, match="unitary"):
            gate_matrix(gate, 2)

    def test_seeded_gate_requires_seed(self):
        with pytest.raises(CircuitFormatError, match="seed"):
            Gate((0, 1), "haar")


class TestGates:
    def test_seeded_gates_reproducible(self):
        g1 = Gate((0, 1), "haar", seed=(3, 0, 0))
        g2 = Gate((0, 1), "haar", seed=(3, 0, 0))
        assert np.array_equal(gate_matrix(g1, 2), gate_matrix(g2, 2))
        g3 = Gate((0, 1), "haar", seed=(4, 0, 0))
        assert not np.allclose(gate_matrix(g1, 2), gate_matrix(g3, 2))

    @pytest.mark.parametrize("kind", ["shift", "fourier", "cshift", "swap", "cz"])
    @pytest.mark.parametrize("h", [2, 3])
    def test_named_gates_unitary(self, kind, h):
        arity = 2 if kind in ("cshift", "swap", "cz") else 1
        gate = Gate(tuple(range(arity)), kind)
        u = gate_matrix(gate, h)
        assert np.allclose(u @ u.conj().T, np.eye(h**arity), atol=1e-12)

    def test_random_clifford_gate_matrix_unitary(self):
        gate = Gate((0, 1), "clifford", seed=(7, 0, 0))
        u = gate_matrix(gate, 2)
        assert np.allclose(u @ u.conj().T, np.eye(4), atol=1e-10)


class TestBrickwork:
    def test_1d_pattern(self):
        assert brickwork_pairs((4,), 0) == [(0, 1), (2, 3)]
        assert brickwork_pairs((4,), 1) == [(1, 2)]

    def test_2d_alternates_orientation(self):
        horiz = brickwork_pairs((3, 4), 0)
        vert = brickwork_pairs((3, 4), 1)
        assert all(b - a == 1 for a, b in horiz)
        assert all(b - a == 4 for a, b in vert)

    def test_layer_supports_disjoint(self):
        for layer in range(4):
            pairs = brickwork_pairs((4, 5), layer)
            flat = [s for pair in pairs for s in pair]
            assert len(flat) == len(set(flat))


class TestCircuitFiles:
    def test_roundtrip(self, tmp_path):
        spec = brickwork_circuit((6,), 2, 2, 0.2, kind="haar", seed=9)
        data = circuit_to_dict(spec)
        back = circuit_from_dict(data)
        assert back.geometry == spec.geometry
        assert back.depth == spec.depth
        assert np.array_equal(back.noise, spec.noise)
        for l1, l2 in zip(back.layers, spec.layers):
            for g1, g2 in zip(l1, l2):
                assert g1.sites == g2.sites and g1.kind == g2.kind
                assert g1.seed == g2.seed

    def test_parser_rejects_overlap_with_diagnostic(self):
        data = {
            "h": 2,
            "geometry": [4],
            "layers": [
                [
                    {"sites": [0, 1], "kind": "cshift"},
                    {"sites": [1, 2], "kind": "cshift"},
                ]
            ],
            "noise": {"uniform": 0.0},
        }
        with pytest.raises(CircuitFormatError, match="layer 0.*site 1"):
            circuit_from_dict(data)

    def test_parser_derives_position_keyed_seeds(self):
        data = {
            "h": 2,
            "geometry": [4],
            "seed": 5,
            "layers": [[{"sites": [0, 1], "kind": "haar"}]],
            "noise": {"uniform": 0.1},
        }
        spec = circuit_from_dict(data)
        assert spec.layers[0][0].seed == (5, 0, 0)

    def test_parser_rejects_inconsistent_n(self):
        data = {"n": 3, "h": 2, "geometry": [4], "layers": [], "noise": {"uniform": 0}}
        with pytest.raises(CircuitFormatError, match="geometry"):
            circuit_from_dict(data)
