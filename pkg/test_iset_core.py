import math
from collections import Counter
from itertools import combinations

import networkx as nx
import numpy as np
import pytest
from scipy.stats import chisquare

from analytic import expected_count_gnm
from errors import BudgetExceeded, InvalidParameter, TruncatedLayer
from graph_core import Graph, complete_graph, cycle_graph, empty_graph, gen_gnm, gen_gnp, path_graph
from iset_core import (VertexSet, count_layer, enumerate_layer, greedy_mis, is_independent, is_maximal,
                       max_independent_within, max_is_exact, min_degree_mis, require_independent,
                       sample_greedy_subset, sample_uk)
from utils import make_rng


def brute_layer(graph, k):
    edges = set(graph.edge_list())
    return [c for c in combinations(range(graph.n), k)
            if not any((u, v) in edges for u, v in combinations(c, 2))]


def test_vertex_set_basics():
    s = VertexSet.from_indices([4, 1, 1], 6)
    assert s.size == 2
    assert s.to_list() == [1, 4]
    assert 4 in s and 0 not in s and 9 not in s
    assert s.to_mask().tolist() == [False, True, False, False, True, False]
    assert VertexSet.from_mask(s.to_mask()) == s
    assert s.with_vertex(0).to_list() == [0, 1, 4]
    assert s.without_vertex(4).to_list() == [1]


def test_vertex_set_operators():
    a = VertexSet.from_indices([0, 1, 2], 5)
    b = VertexSet.from_indices([2, 3], 5)
    assert (a | b).to_list() == [0, 1, 2, 3]
    assert (a & b).to_list() == [2]
    assert (a - b).to_list() == [0, 1]
    assert (a ^ b).to_list() == [0, 1, 3]
    with pytest.raises(InvalidParameter):
        a | VertexSet.empty(6)


def test_vertex_set_rejects_out_of_range():
    with pytest.raises(InvalidParameter):
        VertexSet.from_indices([5], 5)
    with pytest.raises(InvalidParameter):
        VertexSet(1 << 5, 5)


def test_independence_and_maximality():
    g = path_graph(4)
    assert is_independent(g, VertexSet.from_indices([0, 2], 4))
    assert not is_independent(g, VertexSet.from_indices([1, 2], 4))
    assert is_maximal(g, VertexSet.from_indices([0, 2], 4))
    assert not is_maximal(g, VertexSet.from_indices([0], 4))
    with pytest.raises(InvalidParameter):
        require_independent(g, VertexSet.from_indices([2, 3], 4))
    with pytest.raises(InvalidParameter):
        is_independent(g, VertexSet.empty(5))


@pytest.mark.parametrize("seed", range(10))
def test_greedy_is_maximal(seed):
    g = gen_gnm(80, 160, seed)
    s = greedy_mis(g, seed)
    assert is_maximal(g, s)
    assert greedy_mis(g, seed) == s


def test_min_degree_on_star():
    # centre 0 joined to 1..5: min-degree greedy takes all leaves
    star = Graph(6, [(0, v) for v in range(1, 6)])
    assert min_degree_mis(star).to_list() == [1, 2, 3, 4, 5]


@pytest.mark.parametrize("seed", range(5))
def test_min_degree_is_maximal(seed):
    g = gen_gnp(100, 0.05, seed)
    assert is_maximal(g, min_degree_mis(g))


def test_sample_greedy_subset():
    g = gen_gnm(60, 90, seed=1)
    s = sample_greedy_subset(g, 10, seed=4)
    assert s.size == 10 and is_independent(g, s)
    assert sample_greedy_subset(g, 10, seed=4) == s
    assert sample_greedy_subset(complete_graph(5), 2, seed=0) is None


def test_exact_small_graphs():
    assert max_is_exact(cycle_graph(5)).size == 2
    assert max_is_exact(complete_graph(6)).size == 1
    assert max_is_exact(empty_graph(7)).size == 7
    assert max_is_exact(empty_graph(0)).size == 0


@pytest.mark.parametrize("seed", range(50))
def test_enumeration_matches_brute_force(seed):
    g = gen_gnm(12, 18, seed)
    best = 0
    for k in range(13):
        expected = brute_layer(g, k)
        layer = enumerate_layer(g, k)
        assert [m.members() for m in layer.members] == expected
        assert count_layer(g, k) == len(expected)
        if expected:
            best = k
    alpha = max_is_exact(g)
    assert alpha.size == best
    assert is_independent(g, alpha)


@pytest.mark.parametrize("seed", range(10))
def test_exact_matches_networkx_clique_number(seed):
    g = gen_gnp(30, 0.15, seed)
    clique, _ = nx.max_weight_clique(nx.complement(g.to_networkx()), weight=None)
    assert max_is_exact(g).size == len(clique)


def test_exact_budget_gives_lower_bound():
    g = gen_gnp(90, 0.1, seed=3)
    with pytest.raises(BudgetExceeded) as err:
        max_is_exact(g, node_budget=5)
    partial = err.value.partial
    assert isinstance(partial, VertexSet)
    assert is_independent(g, partial)
    assert partial.size >= min_degree_mis(g).size


def test_max_independent_within_candidate_mask():
    g = path_graph(6)
    bits, nodes = max_independent_within(g, 0b011110)
    assert bits.bit_count() == 2
    assert bits & ~0b011110 == 0
    assert nodes >= 1


def test_layer_truncation():
    layer = enumerate_layer(empty_graph(6), 2, cap=5)
    assert layer.truncated
    assert len(layer) == 5
    assert [m.to_list() for m in layer.members] == [[0, 1], [0, 2], [0, 3], [0, 4], [0, 5]]
    with pytest.raises(TruncatedLayer):
        layer.require_complete("test")
    exact = enumerate_layer(empty_graph(6), 2, cap=15)
    assert not exact.truncated and len(exact) == 15


def test_layer_edge_cases():
    g = path_graph(3)
    assert [m.to_list() for m in enumerate_layer(g, 0).members] == [[]]
    assert enumerate_layer(g, 4).members == []
    assert count_layer(g, 0) == 1
    assert count_layer(g, 4) == 0
    with pytest.raises(InvalidParameter):
        enumerate_layer(g, -1)


def test_count_layer_edgeless_is_binomial():
    assert count_layer(empty_graph(20), 10) == math.comb(20, 10)
    assert count_layer(empty_graph(20), 2) == 190


def test_sample_uk_uniform():
    g = cycle_graph(6)
    members = [m.sort_key() for m in enumerate_layer(g, 2).members]
    counts = Counter(sample_uk(g, 2, seed).sort_key() for seed in range(3000))
    assert set(counts) == set(members)
    assert chisquare([counts[m] for m in members]).pvalue > 1e-4


def test_sample_uk_empty_and_truncated():
    assert sample_uk(complete_graph(4), 2, seed=0) is None
    with pytest.raises(TruncatedLayer):
        sample_uk(empty_graph(10), 3, seed=0, cap=10)


@pytest.mark.slow
def test_monte_carlo_layer_count():
    runs = 100_000
    counts = np.array([count_layer(gen_gnm(10, 5, seed), 3) for seed in range(runs)], dtype=float)
    expected = expected_count_gnm(10, 5, 3).to_float()
    assert expected == pytest.approx(83.5518, abs=1e-4)
    stderr = counts.std(ddof=1) / np.sqrt(runs)
    assert abs(counts.mean() - expected) < 3 * stderr


@pytest.mark.parametrize("seed", range(40))
def test_greedy_never_beats_exact(seed):
    rng = make_rng(seed)
    n = int(rng.integers(1, 17))
    m = int(rng.integers(0, n * (n - 1) // 2 + 1))
    g = gen_gnm(n, m, seed)
    alpha = max_is_exact(g)
    clique, _ = nx.max_weight_clique(nx.complement(g.to_networkx()), weight=None)
    assert alpha.size == len(clique)
    for s in range(5):
        assert greedy_mis(g, s).size <= alpha.size


@pytest.mark.parametrize("seed", range(20))
def test_count_layer_small_k(seed):
    rng = make_rng(1000 + seed)
    n = int(rng.integers(1, 60))
    m = int(rng.integers(0, n * (n - 1) // 2 + 1))
    g = gen_gnm(n, m, seed)
    assert count_layer(g, 0) == 1
    assert count_layer(g, 1) == n


@pytest.mark.slow
def test_greedy_mean_size_band():
    # [0.8, 1.3] * n ln(d) / d for d = 8
    sizes = [greedy_mis(gen_gnm(2000, 8000, seed), seed).size for seed in range(50)]
    assert 416 <= np.mean(sizes) <= 676
