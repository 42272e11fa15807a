"""Exhaustive and sampled checks of the rerandomization's distributional claims.

On the toy group every (beta, gamma) pair can be enumerated, so the statements
about the output distribution of ``shuff`` are checked as exact multiset
equalities rather than statistically.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .protocol import BroadcastToken, is_honest_form, make_token, shuff

EXHAUSTIVE_LIMIT = 1 << 12


class Theorem(enum.Enum):
    T1_SURROGATE = "t1"
    T2 = "t2"
    T3 = "t3"


@dataclass
class Distribution:
    counts: Counter = field(default_factory=Counter)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def __eq__(self, other):
        return isinstance(other, Distribution) and self.counts == other.counts


@dataclass
class TheoremOutcome:
    theorem: Theorem
    params: dict
    passed: bool
    detail: str = ""
    honest_case: bool = False


def _require_small(group):
    if group.order > EXHAUSTIVE_LIMIT:
        raise ValueError(f"exhaustive enumeration is infeasible on group {group.name!r}")


def exhaustive_shuff_distribution(group, t: BroadcastToken, s: int) -> Distribution:
    _require_small(group)
    pk = group.pow(group.generator, s)
    p = group.order
    return Distribution(Counter(shuff(group, t, b, c, pk) for b in range(p) for c in range(p)))


def theorem2_reference(group, s: int) -> Distribution:
    """Each (z, z^s) exactly p times."""
    return Distribution(Counter({(z, group.pow(z, s)): group.order for z in group.elements()}))


def check_theorem2(group, s: int, a1: int, a2: int, _cache=None) -> TheoremOutcome:
    params = {"s": s, "alpha1": a1, "alpha2": a2}

    def dist(a):
        key = (s, a)
        if _cache is not None and key in _cache:
            return _cache[key]
        d = exhaustive_shuff_distribution(group, make_token(group, s, a), s)
        if _cache is not None:
            _cache[key] = d
        return d

    ref = theorem2_reference(group, s)
    d1, d2 = dist(a1), dist(a2)
    if d1 != ref:
        return TheoremOutcome(Theorem.T2, params, False, f"alpha={a1} deviates from reference")
    if d2 != ref:
        return TheoremOutcome(Theorem.T2, params, False, f"alpha={a2} deviates from reference")
    return TheoremOutcome(Theorem.T2, params, d1 == d2)


def check_theorem3(group, t: BroadcastToken, s: int) -> TheoremOutcome:
    params = {"s": s, "x": t.x, "y": t.y}
    if t.x == group.identity():
        raise ValueError("token with identity first component is outside the domain")
    if is_honest_form(group, t, s):
        return TheoremOutcome(Theorem.T3, params, True, "honest token; Theorem 2 case", honest_case=True)
    d = exhaustive_shuff_distribution(group, t, s)
    n = group.order ** 2
    if len(d.counts) != n:
        dup = next(k for k, v in d.counts.items() if v > 1)
        return TheoremOutcome(Theorem.T3, params, False, f"output {dup} repeats; {len(d.counts)}/{n} distinct")
    return TheoremOutcome(Theorem.T3, params, True)


def check_theorem1_surrogate(group, s: int) -> TheoremOutcome:
    """alpha -> g^alpha is a bijection onto G minus e, and y = x^s throughout."""
    _require_small(group)
    toks = [make_token(group, s, a) for a in range(1, group.order)]
    xs = [t.x for t in toks]
    want = set(group.elements()) - {group.identity()}
    params = {"s": s}
    if len(set(xs)) != len(xs):
        return TheoremOutcome(Theorem.T1_SURROGATE, params, False, "repeated first component")
    if set(xs) != want:
        return TheoremOutcome(Theorem.T1_SURROGATE, params, False, "first components miss part of G minus e")
    bad = [t for t in toks if group.pow(t.x, s) != t.y]
    if bad:
        return TheoremOutcome(Theorem.T1_SURROGATE, params, False, f"y != x^s for {bad[0]}")
    return TheoremOutcome(Theorem.T1_SURROGATE, params, True)


def sweep_theorem1(group):
    return [check_theorem1_surrogate(group, s) for s in range(group.order)]


def sweep_theorem2(group):
    cache = {}
    p = group.order
    return [check_theorem2(group, s, a1, a2, cache)
            for s in range(p) for a1 in range(1, p) for a2 in range(1, p)]


def dishonest_pairs(group, s: int):
    e = group.identity()
    for x in group.elements():
        if x == e:
            continue
        xs = group.pow(x, s)
        for y in group.elements():
            if y != xs:
                yield BroadcastToken(x, y)


def sweep_theorem3(group):
    return [check_theorem3(group, t, s) for s in range(group.order) for t in dishonest_pairs(group, s)]


def chi_square_uniform(counts, significance: float = 0.001) -> tuple[float, bool]:
    """Pearson statistic against equal cell probabilities; pass iff below the critical value."""
    counts = np.asarray(counts, dtype=float)
    k = counts.size
    if k < 2:
        raise ValueError("need at least two cells")
    expected = counts.sum() / k
    if expected < 5:
        raise ValueError(f"expected count {expected:.2f} per cell is below 5")
    stat = float(((counts - expected) ** 2).sum() / expected)
    critical = float(sps.chi2.ppf(1 - significance, k - 1))
    return stat, stat < critical


def top_byte_buckets(values, bits: int) -> list[int]:
    """Histogram of the top 8 bits of ``bits``-bit integers."""
    counts = [0] * 256
    for v in values:
        counts[v >> (bits - 8)] += 1
    return counts


def binomial_interval(n: int, p: float, significance: float = 0.001) -> tuple[int, int]:
    """Central acceptance region for a Binomial(n, p) count."""
    lo = int(sps.binom.ppf(significance / 2, n, p))
    hi = int(sps.binom.isf(significance / 2, n, p))
    return lo, hi


def poisson_binomial_pmf(probs) -> np.ndarray:
    pmf = np.array([1.0])
    for q in probs:
        pmf = np.convolve(pmf, [1 - q, q])
    return pmf


def poisson_binomial_interval(probs, significance: float = 0.001) -> tuple[int, int]:
    """Central acceptance region for a sum of independent Bernoulli(q_i)."""
    cdf = np.cumsum(poisson_binomial_pmf(probs))
    lo = int(np.searchsorted(cdf, significance / 2))
    hi = int(np.searchsorted(cdf, 1 - significance / 2))
    return lo, hi
