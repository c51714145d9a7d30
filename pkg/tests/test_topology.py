import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dgne.errors import DisconnectedGraph, InvalidWeights, NonSymmetric, NotPSD
from dgne.topology import (
    Topology,
    build_metropolis,
    complete_graph,
    consensus_gap,
    gossip_matrix,
    matrix_sqrt_psd,
    path_graph,
    random_connected,
    ring,
    spectral_bounds,
    validate_weights,
)


# -- hand-derived values ---------------------------------------------------

def test_metropolis_two_node_path():
    np.testing.assert_allclose(build_metropolis(path_graph(2)), [[0.5, 0.5], [0.5, 0.5]])


def test_metropolis_four_ring_is_uniform_thirds():
    W = build_metropolis(ring(4))
    adj = ring(4)
    assert np.allclose(W[adj], 1 / 3)
    assert np.allclose(np.diag(W), 1 / 3)
    assert np.all(W[~adj & ~np.eye(4, dtype=bool)] == 0)


def test_metropolis_complete_three():
    np.testing.assert_allclose(build_metropolis(complete_graph(3)), np.full((3, 3), 1 / 3))


def test_metropolis_rejects_disconnected_and_asymmetric():
    adj = np.zeros((4, 4), dtype=bool)
    adj[0, 1] = adj[1, 0] = adj[2, 3] = adj[3, 2] = True
    with pytest.raises(DisconnectedGraph):
        build_metropolis(adj)
    bad = path_graph(3)
    bad[0, 2] = True
    with pytest.raises(NonSymmetric):
        build_metropolis(bad)


def test_consensus_gap_examples():
    assert consensus_gap(np.full((4, 4), 0.25)) == 0.0
    assert consensus_gap([[0.5, 0.5], [0.5, 0.5]]) == 0.0
    assert consensus_gap(build_metropolis(ring(4))) == pytest.approx(1 / 3, abs=1e-12)
    # circulant eigenvalues 1/3 + (2/3) cos(2 pi k / 5)
    expected = max(abs(1 / 3 + 2 / 3 * math.cos(2 * math.pi * k / 5)) for k in range(1, 5))
    sigma5 = consensus_gap(build_metropolis(ring(5)))
    assert sigma5 == pytest.approx(expected, abs=1e-12)
    assert abs(sigma5 - 0.5387) < 1e-3


def test_gossip_matrix_examples():
    np.testing.assert_allclose(gossip_matrix([[0.5, 0.5], [0.5, 0.5]]),
                               [[0.25, -0.25], [-0.25, 0.25]])
    C = gossip_matrix(build_metropolis(ring(4)))
    assert np.allclose(np.diag(C), 1 / 3)
    assert C[0, 1] == pytest.approx(-1 / 6) and C[0, 2] == 0.0
    np.testing.assert_allclose(C.sum(axis=1), 0.0, atol=1e-15)


def test_identity_weights_rejected_as_disconnected():
    with pytest.raises(DisconnectedGraph):
        validate_weights(np.eye(3))


def test_matrix_sqrt_examples():
    np.testing.assert_array_equal(matrix_sqrt_psd(np.zeros((3, 3))), np.zeros((3, 3)))
    np.testing.assert_allclose(matrix_sqrt_psd(np.eye(3)), np.eye(3), atol=1e-15)
    a = math.sqrt(0.5) / 2
    np.testing.assert_allclose(matrix_sqrt_psd([[0.25, -0.25], [-0.25, 0.25]]),
                               [[a, -a], [-a, a]], atol=1e-15)


def test_matrix_sqrt_clamps_tiny_negative_and_rejects_indefinite():
    B = matrix_sqrt_psd(np.diag([1.0, -1e-10]))
    np.testing.assert_allclose(B, np.diag([1.0, 0.0]))
    with pytest.raises(NotPSD):
        matrix_sqrt_psd(np.diag([1.0, -1e-6]))


def test_spectral_bounds_two_node():
    B = matrix_sqrt_psd([[0.25, -0.25], [-0.25, 0.25]])
    lam_max, sv = spectral_bounds(B)
    assert lam_max == pytest.approx(math.sqrt(0.5))
    assert sv == pytest.approx(math.sqrt(0.5))


def test_validate_weights_rejections():
    with pytest.raises(NonSymmetric):
        validate_weights([[0.5, 0.5], [0.4, 0.6]])
    with pytest.raises(InvalidWeights):
        validate_weights([[0.6, 0.5], [0.5, 0.6]])
    with pytest.raises(InvalidWeights):
        validate_weights([[1.2, -0.2], [-0.2, 1.2]])
    with pytest.raises(InvalidWeights):
        validate_weights([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(InvalidWeights):
        validate_weights(build_metropolis(complete_graph(3)), adjacency=path_graph(3))


def test_topology_invariants_and_json_roundtrip(tmp_path):
    topo = Topology.from_adjacency(ring(6))
    np.testing.assert_allclose(topo.B @ topo.B, topo.C, atol=1e-12)
    np.testing.assert_allclose(topo.B @ np.ones(6), 0.0, atol=1e-12)
    assert 0 < topo.sigma < 1 and topo.lambda_max_B < 1
    path = tmp_path / "topo.json"
    topo.save(path)
    doc = json.loads(path.read_text())
    assert set(doc) == {"n", "edges", "weights", "sigma"}
    back = Topology.load(path)
    np.testing.assert_array_equal(back.W, topo.W)
    assert back.sigma == topo.sigma
    with pytest.raises(ValueError):
        topo.W[0, 0] = 1.0  # frozen arrays


def test_topology_from_edges_without_weights_uses_metropolis():
    topo = Topology.from_edges(4, [[0, 1], [1, 2], [2, 3], [3, 0]])
    np.testing.assert_allclose(topo.W, build_metropolis(ring(4)))


def test_complete_average_flag():
    assert Topology.from_weights(np.full((3, 3), 1 / 3)).is_complete_average
    assert not Topology.from_adjacency(ring(5)).is_complete_average


def test_random_connected_reproducible():
    a = random_connected(12, 0.3, np.random.default_rng(7))
    b = random_connected(12, 0.3, np.random.default_rng(7))
    np.testing.assert_array_equal(a, b)


# -- properties ------------------------------------------------------------

graphs = st.builds(
    lambda N, p, seed: random_connected(N, p, np.random.default_rng(seed)),
    st.integers(2, 20), st.floats(0.15, 1.0), st.integers(0, 2**32 - 1))


@given(graphs)
def test_metropolis_weights_valid_and_gap_below_one(adj):
    W = build_metropolis(adj)
    validate_weights(W, adj)
    assert consensus_gap(W) < 1
    evals = np.linalg.eigvalsh(W)
    assert evals[-1] == pytest.approx(1.0, abs=1e-12)
    assert evals[-2] < 1 - 1e-12 and evals[0] > -1 + 1e-12
    np.testing.assert_allclose(W @ np.ones(len(W)), 1.0, atol=1e-12)


@given(graphs, st.integers(0, 2**32 - 1))
def test_B_null_space_is_consensus(adj, seed):
    topo = Topology.from_adjacency(adj)
    rng = np.random.default_rng(seed)
    N = topo.N
    same = np.full(N, rng.normal())
    assert np.max(np.abs(topo.B @ same)) <= 1e-10
    y = rng.normal(size=N)
    assert np.ptp(y) > 1e-10
    assert np.max(np.abs(topo.B @ y)) > 1e-10


@given(st.integers(1, 20), st.integers(0, 2**32 - 1), st.integers(0, 20))
def test_matrix_sqrt_squares_back(n, seed, rank_drop):
    rng = np.random.default_rng(seed)
    G = rng.normal(size=(n, max(1, n - rank_drop)))
    C = G @ G.T
    B = matrix_sqrt_psd(C)
    assert np.linalg.norm(B @ B - C, "fro") <= 1e-10 * max(1.0, np.linalg.norm(C, 2))
    np.testing.assert_array_equal(B, B.T)
    assert np.linalg.eigvalsh(B)[0] >= -1e-10


def test_matrix_sqrt_thousand_seeded_psd_matrices():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 21))
        G = rng.normal(size=(n, int(rng.integers(1, n + 1))))
        C = G @ G.T / n
        B = matrix_sqrt_psd(C)
        worst = max(worst, float(np.linalg.norm(B @ B - C, "fro")))
    assert worst <= 1e-10
