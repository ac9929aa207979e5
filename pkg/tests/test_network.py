import numpy as np
import pytest

from coagg.errors import DegenerateError, InputError, NumericError
from coagg.network import (WeightedNetwork, build_network, read_edges_csv, shuffle_null, to_dot,
                           top_fraction_subgraph, transition_system, write_edges_csv)
from coagg.proximity import Channel, ProximityMatrix


def eg_matrix(values):
    v = np.asarray(values, dtype=float)
    return ProximityMatrix(Channel.EG, tuple(f"n{i}" for i in range(len(v))), v)


def random_eg(rng, n):
    a = rng.normal(size=(n, n))
    return eg_matrix((a + a.T) / 2)


def net_from(w):
    w = np.asarray(w, dtype=float)
    return WeightedNetwork(tuple(f"n{i}" for i in range(len(w))), w)


def test_clip_example():
    v = np.zeros((3, 3))
    v[0, 1] = v[1, 0] = 0.3
    v[0, 2] = v[2, 0] = -0.2
    net = build_network(eg_matrix(v))
    assert net.edges() == [(0, 1, 0.3)]
    assert net.isolated() == [2]


def test_all_positive_is_identity():
    rng = np.random.default_rng(1)
    a = rng.random((6, 6)) + 0.1
    v = (a + a.T) / 2
    net = build_network(eg_matrix(v))
    off = ~np.eye(6, dtype=bool)
    np.testing.assert_array_equal(net.weights[off], v[off])
    assert np.all(np.diag(net.weights) == 0)


@pytest.mark.parametrize("policy", ["clip", "shift-min", "abs"])
def test_policies_give_valid_networks(policy):
    net = build_network(random_eg(np.random.default_rng(2), 8), policy)
    assert (net.weights >= 0).all()
    assert np.array_equal(net.weights, net.weights.T)


def test_shift_min_and_abs_values():
    v = np.array([[0, 0.5, -0.2], [0.5, 0, 0.1], [-0.2, 0.1, 0]])
    shifted = build_network(eg_matrix(v), "shift-min").weights
    np.testing.assert_allclose(shifted[0, 1], 0.7)
    assert shifted[0, 2] == 0.0
    absolute = build_network(eg_matrix(v), "abs").weights
    assert absolute[0, 2] == 0.2


def test_no_edges_is_degenerate():
    with pytest.raises(DegenerateError):
        build_network(eg_matrix(-np.ones((3, 3))))


def test_unknown_policy():
    with pytest.raises(InputError):
        build_network(eg_matrix(np.ones((2, 2))), "round")


def test_network_invariants_enforced():
    with pytest.raises(InputError):
        net_from([[0, 1], [2, 0]])
    with pytest.raises(InputError):
        net_from([[1, 1], [1, 0]])
    with pytest.raises(InputError):
        net_from([[0, -1], [-1, 0]])


def test_degrees_match_row_sum_oracle():
    net = build_network(random_eg(np.random.default_rng(3), 10))
    for i in range(10):
        total = 0.0
        for j in range(10):
            total += net.weights[i][j]
        assert net.degrees[i] == pytest.approx(total, abs=1e-14)


def test_two_node_transition():
    ts = transition_system(net_from([[0, 2.5], [2.5, 0]]))
    np.testing.assert_array_equal(ts.M, [[0, 1], [1, 0]])
    np.testing.assert_array_equal(ts.pi, [0.5, 0.5])


def test_star_stationary_distribution():
    w = np.zeros((4, 4))
    w[0, 1:] = w[1:, 0] = 1.0
    ts = transition_system(net_from(w))
    np.testing.assert_allclose(ts.pi, [1 / 2, 1 / 6, 1 / 6, 1 / 6], atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_transition_invariants(seed):
    net = build_network(random_eg(np.random.default_rng(seed), 12)).largest_component()[0]
    ts = transition_system(net)
    np.testing.assert_allclose(ts.M.sum(axis=1), 1.0, atol=1e-12)
    assert abs(ts.pi.sum() - 1) <= 1e-12
    np.testing.assert_allclose(ts.pi @ ts.M, ts.pi, atol=1e-10)


def test_isolated_node_cannot_host_walk():
    with pytest.raises(NumericError):
        transition_system(net_from([[0, 1, 0], [1, 0, 0], [0, 0, 0]]))


def test_stationarity_per_component():
    w = np.zeros((5, 5))
    w[0, 1] = w[1, 0] = 1.0
    w[1, 2] = w[2, 1] = 3.0
    w[3, 4] = w[4, 3] = 2.0
    net = net_from(w)
    labels = net.components()
    assert len(set(labels[:3])) == 1 and labels[3] == labels[4] != labels[0]
    for comp in set(labels):
        keep = np.flatnonzero(labels == comp)
        ts = transition_system(net.subnetwork(keep))
        np.testing.assert_allclose(ts.pi @ ts.M, ts.pi, atol=1e-10)
    sub, keep = net.largest_component()
    assert keep.tolist() == [0, 1, 2] and sub.nodes == ("n0", "n1", "n2")


@pytest.mark.parametrize("c", [0.5, 2.0, 3.0, 1e-3])
def test_positive_scaling(c):
    eg = random_eg(np.random.default_rng(4), 9)
    net = build_network(eg).largest_component()[0]
    scaled = build_network(eg_matrix(eg.values * c)).largest_component()[0]
    np.testing.assert_allclose(scaled.weights, net.weights * c, rtol=1e-15)
    a, b = transition_system(net), transition_system(scaled)
    np.testing.assert_allclose(a.M, b.M, atol=1e-15)
    np.testing.assert_allclose(a.pi, b.pi, atol=1e-15)


def test_shuffle_single_edge():
    w = np.zeros((4, 4))
    w[1, 2] = w[2, 1] = 0.7
    for variant in ("uniform", "degree"):
        out = shuffle_null(net_from(w), 0, variant)
        assert [e[2] for e in out.edges()] == [0.7]
    with pytest.raises(InputError):
        shuffle_null(net_from(np.zeros((3, 3))), 0)


def test_shuffle_triangle():
    w = np.ones((3, 3)) - np.eye(3)
    w[0, 1] = w[1, 0] = 2.0
    out = shuffle_null(net_from(w), 5)
    assert out.n_edges == 3
    assert sorted(e[2] for e in out.edges()) == [1.0, 1.0, 2.0]


@pytest.mark.parametrize("variant", ["uniform", "degree"])
@pytest.mark.parametrize("seed", range(3))
def test_shuffle_preserves_multiset(variant, seed):
    rng = np.random.default_rng(seed)
    net = build_network(random_eg(rng, 50))
    out = shuffle_null(net, seed, variant)
    assert out.n == net.n and out.n_edges == net.n_edges
    assert sorted(e[2] for e in out.edges()) == sorted(e[2] for e in net.edges())
    total = sum(e[2] for e in out.edges())
    assert abs(total - net.total_weight) <= 1e-12
    if variant == "degree":
        counts = lambda g: np.count_nonzero(g.weights, axis=1)  # noqa: E731
        np.testing.assert_array_equal(counts(out), counts(net))
    else:
        assert not np.array_equal(out.degrees, net.degrees)


def test_shuffle_is_seeded():
    net = build_network(random_eg(np.random.default_rng(8), 20))
    np.testing.assert_array_equal(shuffle_null(net, 3).weights, shuffle_null(net, 3).weights)
    assert not np.array_equal(shuffle_null(net, 3).weights, shuffle_null(net, 4).weights)


def test_top_fraction_identity_and_count():
    rng = np.random.default_rng(6)
    net = build_network(random_eg(rng, 8))
    np.testing.assert_array_equal(top_fraction_subgraph(net, 1.0).weights, net.weights)
    n = 46  # 1035 pairs; take exactly 1000 edges
    w = np.zeros((n, n))
    iu = np.triu_indices(n, k=1)
    pick = rng.choice(len(iu[0]), 1000, replace=False)
    w[iu[0][pick], iu[1][pick]] = rng.random(1000) + 0.01
    big = net_from(w + w.T)
    assert big.n_edges == 1000
    assert top_fraction_subgraph(big, 0.02).n_edges == 20


def test_top_fraction_tie_break():
    w = np.ones((4, 4)) - np.eye(4)
    kept = top_fraction_subgraph(net_from(w), 0.5).edges()
    assert [(i, j) for i, j, _ in kept] == [(0, 1), (0, 2), (0, 3)]


def test_edge_csv_round_trip_and_dot(tmp_path):
    net = build_network(random_eg(np.random.default_rng(7), 6))
    path = write_edges_csv(net, tmp_path / "edges.csv")
    back = read_edges_csv(path, net.nodes)
    np.testing.assert_array_equal(back.weights, net.weights)
    dot = to_dot(net, labels=np.arange(6))
    assert dot.startswith("graph EG {") and dot.count(" -- ") == net.n_edges
    assert '"n0" [community=0];' in dot
