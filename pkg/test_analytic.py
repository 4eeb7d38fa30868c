import math
from fractions import Fraction
from itertools import combinations, product

import numpy as np
import pytest

from analytic import (LogValue, cluster_expected, delta_k, expandable_expected, expected_count_gnm,
                      expected_count_star, f_d_profile, k_epsilon, log_binom, second_moment_terms,
                      sm_term_ratio)
from errors import InfeasibleOverlap, InvalidParameter, NoRootError, UndefinedRatio
from graph_core import Graph
from iset_core import count_layer
from utils import make_rng


def placement_counts(n, m, k):
    """|S_k| under every one of the n^(2m) ordered placements of m pairs (loops included)."""
    sets = list(combinations(range(n), k))
    hits = np.array([[u in s and v in s for s in sets] for u, v in product(range(n), repeat=2)])
    destroyed = hits
    for _ in range(m - 1):
        destroyed = (destroyed[:, None, :] | hits[None, :, :]).reshape(-1, len(sets))
    return (~destroyed).sum(axis=1).astype(np.float64)


# LogValue

def test_log_value_invariants():
    with pytest.raises(InvalidParameter):
        LogValue(0, 1.0)
    with pytest.raises(InvalidParameter):
        LogValue(1, -math.inf)
    with pytest.raises(InvalidParameter):
        LogValue(2, 0.0)
    assert LogValue.zero().is_zero
    assert LogValue.from_log(-math.inf) == LogValue.zero()


def test_log_value_arithmetic():
    a, b = LogValue.from_float(6.0), LogValue.from_float(-2.5)
    assert (a + b).to_float() == pytest.approx(3.5, rel=1e-12)
    assert (b + a).to_float() == pytest.approx(3.5, rel=1e-12)
    assert (a - a).is_zero
    assert (a * b).to_float() == pytest.approx(-15.0, rel=1e-12)
    assert (a / b).to_float() == pytest.approx(-2.4, rel=1e-12)
    assert (b ** 3).to_float() == pytest.approx(-15.625, rel=1e-12)
    assert (LogValue.zero() ** 0) == LogValue.one()
    assert (1 + a).to_float() == pytest.approx(7.0, rel=1e-12)
    with pytest.raises(ZeroDivisionError):
        a / 0


def test_log_value_huge_magnitudes():
    big = LogValue.from_log(1e9)
    assert (big * big).log_mag == pytest.approx(2e9)
    assert (big + big).log_mag == pytest.approx(1e9 + math.log(2))
    assert (big / big) == LogValue.one()
    assert big.to_float() == math.inf
    assert LogValue(-1, 1e9) < LogValue.zero() < big


def test_log_value_ordering():
    values = [LogValue.from_float(x) for x in (3.0, -1.0, 0.0, -7.5, 2.0)]
    assert [v.to_float() for v in sorted(values)] == pytest.approx([-7.5, -1.0, 0.0, 2.0, 3.0])


def test_log_binom_matches_comb():
    assert math.exp(log_binom(30, 12)) == pytest.approx(math.comb(30, 12), rel=1e-12)
    assert log_binom(5, 6) == -math.inf
    exact = math.lgamma(10**6 + 1) - math.lgamma(10**5 + 1) - math.lgamma(9 * 10**5 + 1)
    assert log_binom(10**6, 10**5) == pytest.approx(exact, rel=1e-12)


# first moment

def test_expected_count_star_examples():
    assert expected_count_star(10, 5, 3).to_float() == pytest.approx(120 * 0.91 ** 5, rel=1e-12)
    assert expected_count_star(10, 5, 3).log_mag == pytest.approx(4.31601, abs=1e-4)
    assert expected_count_star(12, 0, 4).to_float() == pytest.approx(495, rel=1e-12)
    assert expected_count_star(12, 30, 0) == LogValue.one()
    assert expected_count_star(7, 3, 7).is_zero
    assert expected_count_star(7, 0, 7) == LogValue.one()


def test_expected_count_gnm_examples():
    assert expected_count_gnm(4, 2, 2).to_float() == pytest.approx(4.0, rel=1e-12)
    assert expected_count_gnm(10, 5, 3).to_float() == pytest.approx(83.5518, abs=1e-4)
    for m in (0, 10, 40):
        assert expected_count_gnm(30, m, 1).to_float() == pytest.approx(30, rel=1e-12)
    assert expected_count_gnm(5, 10, 2).is_zero
    with pytest.raises(InvalidParameter):
        expected_count_gnm(4, 7, 2)


def test_expected_count_gnm_brute_force():
    pairs = list(combinations(range(4), 2))
    counts = [count_layer(Graph(4, list(edges)), 2) for edges in combinations(pairs, 2)]
    assert len(counts) == 15
    assert Fraction(sum(counts), len(counts)) == 4


def test_expected_count_huge_arguments():
    value = expected_count_gnm(10**6, 25 * 10**6, 10**5)
    assert value.sign == 1 and math.isfinite(value.log_mag)


@pytest.mark.parametrize("n", [10, 50, 100, 200])
def test_star_and_gnm_agree_to_leading_order(n):
    m, k = 2 * n, n // 5
    gap = abs(expected_count_star(n, m, k).log_mag - expected_count_gnm(n, m, k).log_mag)
    assert gap / n < 0.05


# thresholds

def test_k_epsilon_monotone_in_eps():
    n, m = 100_000, 2_500_000
    ks = [k_epsilon(n, m, eps) for eps in (0.1, 0.3, 0.5, 1.0, 1.5)]
    assert all(a >= b for a, b in zip(ks, ks[1:]))


def test_k_epsilon_window_and_residual():
    n, d = 10**6, 50
    m = d * n // 2
    eps = 0.3
    k = k_epsilon(n, m, eps)
    scale = n * math.log(d) / d
    assert 1.0 * scale < k < 2.0 * scale

    def residual(j):
        return abs(expected_count_star(n, m, j).log_mag / j - eps)

    assert residual(k) <= residual(k - 1)
    assert residual(k) <= residual(k + 1)


def test_k_epsilon_no_root():
    with pytest.raises(NoRootError):
        k_epsilon(1000, 2500, 100.0)


def test_delta_k():
    value = delta_k(100, 10)
    assert value.value == pytest.approx(20 * math.log(10) + 20, abs=1e-4)
    assert value.value == pytest.approx(66.0517, abs=1e-4)
    assert value.meta["leading_order_only"]
    assert delta_k(50, 50).value == pytest.approx(2.0)
    with pytest.raises(InvalidParameter):
        delta_k(10, 0)


# second moment

def a_term(n, m, k, i):
    s2 = Fraction(k, n) ** 2
    base = 1 - 2 * s2 + Fraction(i, n) ** 2
    return math.comb(k, i) * math.comb(n - k, k - i) * base ** m / (math.comb(n, k) * (1 - s2) ** (2 * m))


def test_second_moment_terms_exact():
    sm = second_moment_terms(6, 4, 2)
    exact = [a_term(6, 4, 2, i) for i in range(3)]
    assert [t.to_float() for t in sm.terms] == pytest.approx([float(a) for a in exact], rel=1e-12)
    assert [t.to_float() for t in sm.terms] == pytest.approx([0.37558, 0.57624, 0.10679], abs=1e-5)
    assert sm.ratio.to_float() == pytest.approx(float(sum(exact)), rel=1e-12)
    assert sm.ratio.to_float() == pytest.approx(1.05860, abs=1e-5)


def test_second_moment_without_edges_is_one():
    assert second_moment_terms(20, 0, 5).ratio.to_float() == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("n, m, k", [(6, 4, 2), (5, 3, 2), (6, 3, 3), (4, 5, 2)])
def test_second_moment_matches_placement_enumeration(n, m, k):
    counts = placement_counts(n, m, k)
    brute = (counts ** 2).mean() / counts.mean() ** 2
    ratio = second_moment_terms(n, m, k).ratio.to_float()
    assert ratio == pytest.approx(brute, rel=1e-9)
    # Paley-Zygmund
    assert (counts > 0).mean() >= 1 / ratio - 1e-12


def test_second_moment_ratio_at_least_one():
    rng = make_rng(12)
    for _ in range(1000):
        n = int(rng.integers(4, 400))
        k = int(rng.integers(1, n))
        m = int(rng.integers(0, 3 * n))
        assert second_moment_terms(n, m, k).ratio.log_mag >= -1e-9


def test_second_moment_full_set_undefined():
    with pytest.raises(UndefinedRatio):
        second_moment_terms(6, 1, 6)


def test_term_ratio():
    sm = second_moment_terms(6, 4, 2)
    b0 = sm_term_ratio(6, 4, 2, 0)
    assert b0.value.to_float() == pytest.approx(sm.terms[1].to_float() / sm.terms[0].to_float(), rel=1e-10)
    assert b0.value.to_float() == pytest.approx(1.53425, abs=1e-5)
    assert (b0.i1, b0.i2) == (1, 1)


def test_term_ratio_crosses_one_at_most_twice():
    n, m, k = 40, 100, 8
    signs = [np.sign(sm_term_ratio(n, m, k, i).value.log_mag) for i in range(k)]
    changes = sum(1 for a, b in zip(signs, signs[1:]) if a != b)
    assert changes <= 2


def test_term_ratio_undefined():
    # C(2, 4) = 0 makes a_0 vanish
    with pytest.raises(UndefinedRatio):
        sm_term_ratio(6, 1, 4, 0)
    with pytest.raises(InvalidParameter):
        sm_term_ratio(6, 4, 2, 2)


# expandability and clustering bounds

def test_expandable_trivial_case():
    est = expandable_expected(1000, 2500, 100, 0.0, 0.0)
    assert est.value.to_float() == pytest.approx(1.0, rel=1e-9)
    assert est.meta["kept"] == 100 and est.meta["added"] == 0


def test_expandable_decreasing_in_m():
    values = [expandable_expected(1000, m, 100, 0.2, 0.1) for m in (500, 1000, 2500, 5000)]
    meta = values[2].meta
    assert (meta["kept"], meta["added"], meta["rounding"]) == (90, 30, "floor")
    logs = [v.value.log_mag for v in values]
    assert all(math.isfinite(x) for x in logs)
    assert all(a > b for a, b in zip(logs, logs[1:]))


def test_expandable_negative_base():
    with pytest.raises(InfeasibleOverlap):
        expandable_expected(10, 5, 5, 1.0, 0.5)


def test_expandable_matches_placement_average():
    # sigma = {0, 1} on 6 vertices, m = 2 pairs drawn from the 32 ordered pairs not inside sigma
    n, m, sigma = 6, 2, {0, 1}
    allowed = [(u, v) for u, v in product(range(n), repeat=2) if not (u in sigma and v in sigma)]
    targets = [t for t in combinations(range(n), 3) if len(sigma & set(t)) == 1]
    total, hit_any = 0, 0
    for placement in product(allowed, repeat=m):
        alive = sum(1 for t in targets if not any(u in t and v in t for u, v in placement))
        total += alive
        hit_any += alive > 0
    average = Fraction(total, len(allowed) ** m)
    est = expandable_expected(n, m, 2, 0.5, 0.5)
    assert average == Fraction(27, 4)
    assert est.value.to_float() == pytest.approx(6.75, rel=1e-12)
    # Markov
    assert hit_any / len(allowed) ** m <= est.value.to_float()


def test_cluster_full_overlap_is_one():
    n, k = 200, 20
    est = cluster_expected(n, 400, k, k / n, 0.0)
    assert est.value.to_float() == pytest.approx(1.0, rel=1e-9)
    assert est.meta["overlap_size"] == k


def test_cluster_monotone_in_lambda():
    logs = [cluster_expected(500, 1000, 60, 0.04, lam).value.log_mag for lam in (0.0, 0.01, 0.1, 1.0)]
    assert all(a <= b for a, b in zip(logs, logs[1:]))


def test_cluster_overlap_rounding():
    # 0.3 * 10 must floor to 3, not 2
    assert cluster_expected(10, 5, 4, 0.3, 0.0).meta["overlap_size"] == 3
    with pytest.raises(InvalidParameter):
        cluster_expected(10, 5, 4, 0.5, 0.0)


def test_cluster_forbidden_window():
    n, d, eps = 10**5, 50, 0.9
    m = d * n // 2
    k = int((1 + eps) * math.log(d) / d * n)
    xs = np.linspace(0, k / n, 61)[:-1]
    negative = [cluster_expected(n, m, k, x, 0.0).value.log_mag < 0 for x in xs]
    assert any(negative)
    assert not all(negative)
    first = negative.index(True)
    last = len(negative) - 1 - negative[::-1].index(True)
    assert all(negative[first:last + 1])


# profile

def test_f_d_profile_decreasing():
    n, d = 10**5, 20
    grid = np.linspace(0.01, 0.45, 100)
    values = [v for _, v in f_d_profile(n, d * n // 2, grid)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_f_d_profile_grows_like_log_near_zero():
    n, m = 10**6, 10**6
    (s1, v1), (s2, v2) = f_d_profile(n, m, [1e-3, 1e-4])
    assert v2 - v1 == pytest.approx(math.log(10), abs=0.05)


def test_f_d_profile_slope_bound():
    n, d = 10**5, 20
    grid = np.linspace(0.05, 0.45, 41)
    profile = f_d_profile(n, d * n // 2, grid)

    def bound(s):
        return -(d / (2 * (1 - s * s)) + 1 / s)

    for (a, fa), (b, fb) in zip(profile, profile[1:]):
        slope = (fb - fa) / (b - a)
        assert slope <= max(bound(a), bound(b)) + 0.1


def test_f_d_profile_rejects_grid_outside_unit_interval():
    with pytest.raises(InvalidParameter):
        f_d_profile(100, 200, [0.0])
