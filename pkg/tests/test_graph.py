import numpy as np
import pytest

from corp_lab import graph
from corp_lab.errors import AssumptionError

D1_EDGES = ((0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 1, 1.0))


def d1_graph():
    return graph.Digraph(n_followers=3, edges=D1_EDGES)


def random_connected_digraph(rng, n_max=5):
    """Random leader-rooted digraph: a spanning arborescence plus extra edges
    (cycles allowed)."""
    n = int(rng.integers(2, n_max + 1))
    edges = {}
    order = rng.permutation(np.arange(1, n + 1))
    for idx, node in enumerate(order):
        parent = 0 if idx == 0 else int(rng.choice([0, *order[:idx]]))
        edges[(parent, int(node))] = float(rng.uniform(0.5, 2.0))
    for _ in range(int(rng.integers(0, 2 * n))):
        src = int(rng.integers(0, n + 1))
        dst = int(rng.integers(1, n + 1))
        if src != dst:
            edges[(src, dst)] = float(rng.uniform(0.5, 2.0))
    return graph.Digraph(
        n_followers=n, edges=tuple((s, d, w) for (s, d), w in edges.items())
    )


def test_digraph_validation():
    with pytest.raises(ValueError, match="self-loop"):
        graph.Digraph(1, ((1, 1, 1.0),))
    with pytest.raises(ValueError, match="leader"):
        graph.Digraph(1, ((1, 0, 1.0),))
    with pytest.raises(ValueError, match="weight"):
        graph.Digraph(1, ((0, 1, -1.0),))
    with pytest.raises(ValueError, match="duplicate"):
        graph.Digraph(1, ((0, 1, 1.0), (0, 1, 2.0)))


def test_build_matrices_d1():
    gm = graph.build_matrices(d1_graph())
    assert np.array_equal(gm.h, [[2, 0, -1], [-1, 1, 0], [0, -1, 1]])
    assert np.array_equal(gm.d, np.diag([0.5, 1.0, 1.0]))
    assert np.array_equal(gm.dh, [[1, 0, -0.5], [-1, 1, 0], [0, -1, 1]])


def test_dh_spectrum_d1():
    # Characteristic polynomial is (1 - lam)^3 = 0.5.
    gm = graph.build_matrices(d1_graph())
    min_re = min(gm.spectrum_dh.real)
    assert abs(min_re - (1.0 - 2.0 ** (-1.0 / 3.0))) < 1e-9
    assert abs(min_re - 0.20630) < 1e-4
    complex_pair = sorted(gm.spectrum_dh, key=lambda lam: lam.real)[1:]
    for lam in complex_pair:
        assert abs(lam.real - 1.39685) < 1e-4
        assert abs(abs(lam.imag) - 0.68740) < 1e-4


def test_build_matrices_requires_in_neighbors():
    g = graph.Digraph(n_followers=2, edges=((0, 1, 1.0),))
    with pytest.raises(AssumptionError, match="normalization undefined"):
        graph.build_matrices(g)


def test_omega_bound():
    gm = graph.build_matrices(d1_graph())
    assert abs(graph.omega_bound(gm) - 0.41260) < 1e-4
    star = graph.Digraph(2, ((0, 1, 1.0), (0, 2, 1.0)))
    assert abs(graph.omega_bound(graph.build_matrices(star)) - 2.0) < 1e-12
    chain = graph.Digraph(2, ((0, 1, 1.0), (1, 2, 1.0)))
    assert abs(graph.omega_bound(graph.build_matrices(chain)) - 2.0) < 1e-9


def test_check_spanning_tree():
    assert graph.check_spanning_tree(d1_graph())
    isolated = graph.Digraph(2, ((0, 1, 1.0),))
    assert not graph.check_spanning_tree(isolated)
    cycle = graph.Digraph(2, ((0, 1, 1.0), (1, 2, 1.0), (2, 1, 1.0)))
    assert graph.check_spanning_tree(cycle)


def test_row_sum_invariants():
    rng = np.random.default_rng(7)
    for _ in range(20):
        g = random_connected_digraph(rng)
        gm = graph.build_matrices(g)
        adj = g.adjacency()
        ones = np.ones(g.n_followers)
        assert np.allclose(gm.h @ ones, adj[1:, 0], atol=1e-12)
        row_sums = gm.dh @ ones
        assert np.all(row_sums > -1e-12)
        assert np.all(row_sums < 1.0 + 1e-12)


def test_connected_implies_positive_real_parts():
    rng = np.random.default_rng(8)
    for _ in range(25):
        g = random_connected_digraph(rng)
        assert graph.check_spanning_tree(g)
        gm = graph.build_matrices(g)
        assert np.min(gm.spectrum_dh.real) > 0.0
