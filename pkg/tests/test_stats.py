import random
from collections import Counter

import pytest

from ambigtrace.group import LARGE, TOY
from ambigtrace.protocol import BroadcastToken, make_token
from ambigtrace.stats import (
    Distribution, Theorem, binomial_interval, check_theorem1_surrogate, check_theorem2,
    check_theorem3, chi_square_uniform, dishonest_pairs, exhaustive_shuff_distribution,
    poisson_binomial_interval, poisson_binomial_pmf, sweep_theorem1, sweep_theorem3,
    theorem2_reference, top_byte_buckets,
)

from oracles import chi_square_statistic, g_to, naive_pow, shuff_by_exponents


def oracle_distribution(x, y, s):
    return Counter(shuff_by_exponents(x, y, b, c, s) for b in range(11) for c in range(11))


def test_distribution_honest_token(toy):
    d = exhaustive_shuff_distribution(toy, make_token(toy, 3, 2), 3)
    assert d.total == 121
    assert len(d.counts) == 11
    assert set(d.counts.values()) == {11}
    assert set(d.counts) == {(z, naive_pow(z, 3)) for z in toy.elements()}
    assert d.counts == oracle_distribution(4, 18, 3)


def test_distribution_dishonest_token(toy):
    d = exhaustive_shuff_distribution(toy, BroadcastToken(2, 9), 3)
    assert d.total == 121 and len(d.counts) == 121
    assert set(d.counts.values()) == {1}
    assert d.counts == oracle_distribution(2, 9, 3)


def test_distribution_refused_on_large(large):
    with pytest.raises(ValueError):
        exhaustive_shuff_distribution(large, (2, 2), 1)


def test_theorem2_examples(toy):
    assert check_theorem2(toy, 3, 2, 7).passed
    ref = theorem2_reference(toy, 3)
    assert ref == Distribution(Counter({(g_to(k), g_to(3 * k)): 11 for k in range(11)}))


def test_theorem2_detects_broken_shuff(toy, monkeypatch):
    import ambigtrace.stats as st

    def broken(group, t, b, c, pk):  # second component misses pk^gamma
        return (group.mul(group.pow(t[0], b), group.pow(2, c)), group.pow(t[1], b))

    monkeypatch.setattr(st, "shuff", broken)
    o = check_theorem2(toy, 3, 2, 7)
    assert not o.passed and "deviates" in o.detail


def test_theorem3_examples(toy):
    o = check_theorem3(toy, BroadcastToken(2, 9), 3)
    assert o.passed and not o.honest_case
    o = check_theorem3(toy, BroadcastToken(4, 18), 3)
    assert o.passed and o.honest_case
    with pytest.raises(ValueError):
        check_theorem3(toy, BroadcastToken(1, 4), 3)


def test_theorem3_detects_broken_shuff(toy, monkeypatch):
    import ambigtrace.stats as st

    def broken(group, t, b, c, pk):  # reuses beta for both blinding exponents
        return (group.mul(group.pow(t[0], b), group.pow(2, b)), group.mul(group.pow(t[1], b), group.pow(pk, b)))

    monkeypatch.setattr(st, "shuff", broken)
    assert not check_theorem3(toy, BroadcastToken(2, 9), 3).passed


def test_case_split_partitions_domain(toy):
    for s in range(11):
        dishonest = set(dishonest_pairs(toy, s))
        honest = {make_token(toy, s, a) for a in range(1, 11)}
        assert len(dishonest) == 100 and len(honest) == 10
        assert not dishonest & honest
        domain = {(x, y) for x in toy.elements()[1:] for y in toy.elements()}
        assert dishonest | honest == domain


def test_theorem3_sweep_count(toy):
    outs = sweep_theorem3(toy)
    assert len(outs) == 1100 and all(o.passed and not o.honest_case for o in outs)


def test_theorem1_surrogate(toy):
    assert check_theorem1_surrogate(toy, 3).passed
    outs = sweep_theorem1(toy)
    assert len(outs) == 11 and all(o.passed for o in outs)
    assert all(o.theorem is Theorem.T1_SURROGATE for o in outs)
    assert all(make_token(toy, 0, a).y == 1 for a in range(1, 11))


def test_chi_square_examples():
    stat, ok = chi_square_uniform([100] * 11)
    assert stat == 0 and ok
    stat, ok = chi_square_uniform([10, 10, 10, 10, 200], 0.001)
    assert stat == pytest.approx(chi_square_statistic([10, 10, 10, 10, 200]))
    assert stat == pytest.approx((3 * 38**2 + 38**2 + 152**2) / 48)
    assert not ok


def test_chi_square_degrees_of_freedom():
    # 5 cells -> 4 dof; tabulated 0.999 quantile is 18.467
    seen = set()
    for extra in range(20, 60):
        counts = [50, 50, 50, 50, 50 + extra]
        stat, ok = chi_square_uniform(counts, 0.001)
        assert stat == pytest.approx(chi_square_statistic(counts))
        assert ok == (chi_square_statistic(counts) < 18.467)
        seen.add(ok)
    assert seen == {True, False}


def test_chi_square_undersampled():
    with pytest.raises(ValueError):
        chi_square_uniform([1, 2, 3])


def test_chi_square_canary_rejects_biased_rng():
    r = random.Random(1)
    counts = [0] * 11
    for _ in range(11_000):
        v = r.randrange(11)
        counts[v if v != 10 or r.random() < 0.5 else 0] += 1  # halves the last cell
    assert not chi_square_uniform(counts)[1]


def test_chi_square_accepts_large_group_draws():
    r = random.Random(5)
    bits = LARGE.order.bit_length()
    counts = top_byte_buckets((LARGE.random_scalar(r) for _ in range(25_600)), bits)
    assert sum(counts) == 25_600 and min(counts) > 0
    assert chi_square_uniform(counts, 0.001)[1]


def test_binomial_interval_contains_mean():
    lo, hi = binomial_interval(1000, 0.1)
    assert lo < 100 < hi


def test_poisson_binomial_reduces_to_binomial():
    assert poisson_binomial_interval([0.1] * 1000) == binomial_interval(1000, 0.1)
    pmf = poisson_binomial_pmf([0.5, 1.0])
    assert list(pmf) == pytest.approx([0, 0.5, 0.5])
