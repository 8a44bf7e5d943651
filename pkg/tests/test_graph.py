import numpy as np
import pytest

from decentgrad.graph import (
    Topology,
    build_complete,
    build_random_connected,
    build_ring,
    is_connected,
    topology_from_config,
)


def test_ring8_matches_protocol_size():
    t = build_ring(8)
    assert len(t.edges) == 8
    assert all(t.degree(i) == 2 for i in range(8))


def test_ring2_is_single_edge():
    t = build_ring(2)
    assert t.edges == frozenset({(0, 1)})
    assert t.degree(0) == t.degree(1) == 1


def test_ring5_exact_edge_set():
    # the cycle enumerated by hand
    t = build_ring(5)
    assert t.edges == frozenset({(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)})


def test_complete_edge_counts():
    assert len(build_complete(2).edges) == 1
    assert len(build_complete(4).edges) == 6  # binomial(4, 2)
    t3 = build_complete(3)
    assert [t3.degree(i) for i in range(3)] == [2, 2, 2]  # complete = 3-cycle


@pytest.mark.parametrize("builder", [build_ring, build_complete])
def test_builders_reject_tiny(builder):
    with pytest.raises(ValueError):
        builder(1)


def test_random_p0_is_spanning_tree():
    t = build_random_connected(4, 0.0, seed=3)
    assert len(t.edges) == 3
    assert is_connected(t)


def test_random_p1_is_complete():
    t = build_random_connected(4, 1.0, seed=3)
    assert t.edges == build_complete(4).edges


def test_random_deterministic_per_seed():
    a = build_random_connected(9, 0.3, seed=11)
    b = build_random_connected(9, 0.3, seed=11)
    c = build_random_connected(9, 0.3, seed=12)
    assert a.edges == b.edges
    assert a.edges != c.edges


def test_random_always_connected():
    for seed in range(25):
        d = 2 + seed % 13
        t = build_random_connected(d, 0.1, seed=seed)
        assert is_connected(t)


def test_is_connected_cases():
    assert is_connected(build_ring(5))
    assert is_connected(build_complete(4))
    assert not is_connected(Topology(3, frozenset({(0, 1)})))
    assert is_connected(Topology(1, frozenset()))


def test_degree_sequence_matches_adjacency():
    t = build_random_connected(7, 0.4, seed=5)
    adj = t.adjacency()
    assert np.array_equal(adj, adj.T)
    assert np.array_equal(adj.sum(axis=1).astype(int), t.degrees())


def test_edges_reject_self_loops_and_bad_range():
    with pytest.raises(ValueError):
        Topology(3, frozenset({(1, 1)}))
    with pytest.raises(ValueError):
        Topology(3, frozenset({(0, 3)}))


def test_config_round_trip():
    t = build_random_connected(6, 0.5, seed=2)
    back = topology_from_config(t.to_config())
    assert back == t
    assert topology_from_config({"kind": "ring", "d": 5}) == build_ring(5)
    assert topology_from_config(
        {"kind": "random", "d": 6, "edge_prob": 0.5, "seed": 2}
    ) == t
    with pytest.raises(ValueError):
        topology_from_config({"kind": "torus", "d": 4})
