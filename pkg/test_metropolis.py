import math

import numpy as np
import pytest
from scipy.stats import chisquare

from constants import DETAILED_BALANCE_TOL
from errors import BudgetExceeded, InvalidParameter
from graph_core import empty_graph, gen_gnm, gen_planted, path_graph
from iset_core import VertexSet, count_layer, is_independent
from metropolis import (concentration_window, detailed_balance_residual, escape_experiment, escape_medians,
                        lambda_sweep, mixing_time_exact, mp_run, mp_step, size_histogram, stationary_exact,
                        stationary_vector, transition_matrix, tv_distance, weight_profile)
from utils import make_rng


def test_lambda_below_one_rejected():
    with pytest.raises(InvalidParameter):
        mp_step(path_graph(3), VertexSet.empty(3), 0.5, make_rng(0))
    with pytest.raises(InvalidParameter):
        stationary_exact(path_graph(3), 0.99)


def test_step_from_full_edgeless_set_only_removes():
    g = empty_graph(6)
    rng = make_rng(1)
    for _ in range(50):
        nxt = mp_step(g, VertexSet.full(6), 1.5, rng)
        assert nxt.size in (5, 6)


def test_step_from_empty_set_always_adds():
    g = gen_gnm(20, 40, seed=3)
    rng = make_rng(2)
    for _ in range(50):
        assert mp_step(g, VertexSet.empty(20), 3.0, rng).size == 1


def test_one_step_frequencies_match_kernel():
    g = path_graph(3)
    lam = 2.0
    states, kernel = transition_matrix(g, lam)
    index = {s.bits: i for i, s in enumerate(states)}
    kernel = kernel.toarray()
    trials = 20_000
    for i, start in enumerate(states):
        rng = make_rng(100 + i)
        hits = np.zeros(len(states))
        for _ in range(trials):
            hits[index[mp_step(g, start, lam, rng).bits]] += 1
        support = kernel[i] > 0
        assert hits[~support].sum() == 0
        assert chisquare(hits[support], kernel[i][support] * trials).pvalue > 1e-4


def test_run_is_deterministic():
    g = gen_gnm(30, 45, seed=4)
    a = mp_run(g, VertexSet.empty(30), 2.0, 5000, stride=10, seed=9, targets=[3, 8])
    b = mp_run(g, VertexSet.empty(30), 2.0, 5000, stride=10, seed=9, targets=[3, 8])
    assert a.sizes == b.sizes and a.final == b.final and a.hit_times == b.hit_times
    assert len(a.sizes) == 501
    assert a.final.size == a.sizes[-1]


def test_run_with_zero_steps():
    start = VertexSet.from_indices([0, 2], 3)
    trace = mp_run(path_graph(3), start, 1.0, 0, seed=5)
    assert trace.sizes == [2]
    assert trace.final == start


def test_run_crosses_block_boundary_consistently():
    g = gen_gnm(25, 30, seed=6)
    long = mp_run(g, VertexSet.empty(25), 1.5, 10_000, seed=3)
    short = mp_run(g, VertexSet.empty(25), 1.5, 4096, seed=3)
    assert long.sizes[:4097] == short.sizes


def test_hit_times_and_snapshots():
    g = gen_gnm(40, 60, seed=2)
    trace = mp_run(g, VertexSet.empty(40), 3.0, 4000, seed=1, targets=[0, 1, 5, 40], snapshot_every=500)
    assert trace.hit_times[0] == 0
    assert trace.hit_times[1] == 1
    assert trace.hit_times[40] is None
    assert trace.sizes[trace.hit_times[5]] == 5
    assert all(trace.sizes[: trace.hit_times[5]][j] < 5 for j in range(trace.hit_times[5]))
    for t, snap in trace.snapshots.items():
        assert is_independent(g, snap)
        assert snap.size == trace.sizes[t]
    rows = list(trace.records())
    assert rows[500]["state"] == trace.snapshots[500].to_list()
    assert trace.summary()["hit_times"]["40"] is None


def test_run_rejects_dependent_start():
    with pytest.raises(InvalidParameter):
        mp_run(path_graph(3), VertexSet.from_indices([0, 1], 3), 1.0, 10)


def test_edgeless_long_run_mean():
    trace = mp_run(empty_graph(10), VertexSet.empty(10), 1.0, 200_000, seed=8)
    assert np.mean(trace.sizes[1000:]) == pytest.approx(5.0, abs=0.1)


def test_histogram_matches_stationary_law():
    g = path_graph(3)
    table = stationary_exact(g, 2.0)
    exact = np.array([(w / table.Z).to_float() for w in table.weights])
    trace = mp_run(g, VertexSet.empty(3), 2.0, 1_000_000, seed=21)
    hist = size_histogram(trace, burn_in=10_000)
    assert tv_distance(hist, exact) <= 0.01


def test_histogram_burn_in_and_stride():
    trace = mp_run(path_graph(3), VertexSet.empty(3), 2.0, 100, stride=10, seed=1)
    assert size_histogram(trace, burn_in=15).sum() == pytest.approx(1.0)
    with pytest.raises(InvalidParameter):
        size_histogram(trace, burn_in=101)


@pytest.mark.parametrize("lam, z, mu", [(1.0, 5, 1.0), (2.0, 11, 14 / 11)])
def test_stationary_path(lam, z, mu):
    table = stationary_exact(path_graph(3), lam)
    assert table.Z.to_float() == pytest.approx(z, rel=1e-12)
    assert table.mu == pytest.approx(mu, rel=1e-12)
    assert [s.to_list() for s in table.states] == [[], [0], [1], [2], [0, 2]]
    assert table.pi.sum() == pytest.approx(1.0, rel=1e-12)


def test_stationary_edgeless_uniform():
    table = stationary_exact(empty_graph(8), 1.0, budget=300)
    assert table.Z.to_float() == pytest.approx(256, rel=1e-12)
    assert table.mu == pytest.approx(4.0, rel=1e-12)


def test_stationary_identities():
    g = gen_gnm(12, 15, seed=3)
    table = stationary_exact(g, 1.7)
    total = sum(table.weights[1:], table.weights[0])
    assert total.log_mag == pytest.approx(table.Z.log_mag, rel=1e-10)
    mu = sum(k * (w / table.Z).to_float() for k, w in enumerate(table.weights))
    assert mu == pytest.approx(table.mu, rel=1e-10)
    assert table.to_dict()["truncated"] is False


def test_stationary_over_budget_is_truncated():
    table = stationary_exact(empty_graph(10), 1.0, budget=20)
    assert table.truncated
    assert table.pi is None
    assert len(table.weights) == 2


def test_weight_profile():
    assert [w.to_float() for w in weight_profile(empty_graph(3), 2.0)] == pytest.approx([1, 6, 12, 8])
    g = gen_gnm(10, 12, seed=1)
    counts = [w.to_float() for w in weight_profile(g, 1.0)]
    assert counts == pytest.approx([count_layer(g, k) for k in range(len(counts))])
    table = stationary_exact(g, 1.3)
    assert [w.log_mag for w in weight_profile(g, 1.3)] == pytest.approx([w.log_mag for w in table.weights])


def test_lambda_sweep_mu_increasing():
    rows = lambda_sweep(gen_gnm(12, 18, seed=2), [1.0, 1.5, 2.0, 4.0])
    mus = [row["mu"] for row in rows]
    assert all(a < b for a, b in zip(mus, mus[1:]))


def test_concentration_window():
    g = gen_gnm(14, 28, seed=5)
    window = concentration_window(g, 1.5)
    table = stationary_exact(g, 1.5)
    radius = 2 * g.n / g.average_degree
    expected = sum((w / table.Z).to_float() for k, w in enumerate(table.weights) if abs(table.mu - k) > radius)
    assert window.outside_probability == pytest.approx(expected, abs=1e-12)
    assert window.high - window.low == pytest.approx(2 * radius)


def test_tv_distance():
    assert tv_distance([0.2, 0.8], [0.2, 0.8]) == 0
    assert tv_distance([1, 0, 0], [0, 0, 1]) == 1
    assert tv_distance([0.5, 0.5], [1.0, 0.0]) == 0.5
    with pytest.raises(InvalidParameter):
        tv_distance([0.5, 0.4], [0.5, 0.5])
    with pytest.raises(InvalidParameter):
        tv_distance([1.0], [0.5, 0.5])


def test_tv_distance_triangle_inequality():
    rng = make_rng(7)
    for _ in range(100):
        p, q, r = (x / x.sum() for x in rng.random((3, 6)))
        assert tv_distance(p, r) <= tv_distance(p, q) + tv_distance(q, r) + 1e-12


@pytest.mark.parametrize("lazy", [False, True])
def test_kernel_rows_and_detailed_balance(lazy):
    g = gen_gnm(9, 12, seed=4)
    lam = 2.5
    states, kernel = transition_matrix(g, lam, lazy=lazy)
    assert np.asarray(kernel.sum(axis=1)).ravel() == pytest.approx(np.ones(len(states)))
    pi = stationary_vector(states, lam)
    assert detailed_balance_residual(pi, kernel) <= DETAILED_BALANCE_TOL
    assert pi @ kernel.toarray() == pytest.approx(pi, abs=1e-12)


def test_detailed_balance_on_path():
    states, kernel = transition_matrix(path_graph(3), 2.0)
    assert detailed_balance_residual(stationary_vector(states, 2.0), kernel) <= DETAILED_BALANCE_TOL


def test_kernel_budget_refused():
    with pytest.raises(BudgetExceeded):
        transition_matrix(empty_graph(10), 1.0, budget=100)
    with pytest.raises(BudgetExceeded):
        mixing_time_exact(empty_graph(10), 1.0, budget=100)


def test_single_vertex_mixing():
    lazy = mixing_time_exact(empty_graph(1), 1.0, lazy=True)
    # one lazy step lands exactly on (1/2, 1/2)
    assert lazy.converged and lazy.T == 0 and lazy.per_start == [0, 0]
    periodic = mixing_time_exact(empty_graph(1), 1.0, horizon=50)
    assert not periodic.converged and periodic.T is None


def product_chain_mixing_time(n):
    """Last t with distance >= 1/e for the lazy chain on n independent two-state coordinates."""
    subsets = np.arange(2 ** n)
    weight = np.array([bin(s).count("1") for s in subsets])
    sign = np.array([[(-1) ** bin(s & z).count("1") for z in subsets] for s in subsets])
    t = 0
    while True:
        eig = (1 - weight / n) ** t
        row = (eig @ sign) / 2 ** n
        dist = 0.5 * np.abs(row - 2.0 ** -n).sum()
        if dist < math.exp(-1):
            return t - 1
        t += 1


def test_edgeless_mixing_matches_product_chain():
    report = mixing_time_exact(empty_graph(4), 1.0, lazy=True)
    expected = product_chain_mixing_time(4)
    assert report.converged
    assert report.T == expected
    assert set(report.per_start) == {expected}
    assert report.monotone


def test_edgeless_non_lazy_chain_is_periodic():
    report = mixing_time_exact(empty_graph(4), 1.0, horizon=200)
    assert not report.converged
    assert report.T is None


def test_path_mixing_is_finite_and_monotone():
    report = mixing_time_exact(path_graph(3), 2.0)
    assert report.converged and report.T is not None and report.T >= 1
    worst = report.worst_distance[1:]
    assert all(b <= a + 1e-12 for a, b in zip(worst, worst[1:]))


def test_escape_with_zero_floor_never_happens():
    g, sigma = gen_planted(60, 120, 10, seed=1)
    assert escape_experiment(g, sigma, 1.0, 0.0, 1000, seed=2) is None


def test_escape_happens_at_lambda_one():
    g, sigma = gen_planted(100, 200, 20, seed=3)
    step = escape_experiment(g, sigma, 1.0, 0.1, 200_000, seed=4)
    assert step is not None and step > 0
    assert escape_experiment(g, sigma, 1.0, 0.1, 200_000, seed=4) == step


def test_escape_immediate_below_floor():
    g, sigma = gen_planted(50, 60, 5, seed=2)
    assert escape_experiment(g, sigma, 1.0, 0.5, 10, seed=0) == 0


@pytest.mark.slow
def test_escape_medians_nondecreasing_in_lambda():
    n, d = 200, 8
    k = int(1.5 * math.log(d) / d * n)
    g, sigma = gen_planted(n, d * n // 2, k, seed=11)
    medians = escape_medians(g, sigma, [1.0, 2.0, 4.0], 0.5 * k / n, 20_000, 100, base_seed=5)
    values = [medians[lam] for lam in (1.0, 2.0, 4.0)]
    assert all(a <= b for a, b in zip(values, values[1:]))
