import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fragnorm.words import (
    CountingQuasimorphism,
    RankError,
    ReducedWord,
    brooks_value,
    count_occurrences,
    defect_estimate,
    essentiality_witness,
    homogenize,
    invert,
    multiply,
    power,
    reduce,
    words_up_to,
)


def W(s, rank=2):
    return ReducedWord.parse(s, rank)


def rewrite_reduce(letters, rng):
    # oracle: delete a randomly chosen cancelling pair until none are left
    w = list(letters)
    while True:
        spots = [i for i in range(len(w) - 1) if w[i] == -w[i + 1]]
        if not spots:
            return tuple(w)
        i = rng.choice(spots)
        del w[i : i + 2]


def sliding_count(p, w):
    return sum(1 for i in range(len(w)) if tuple(w[i : i + len(p)]) == tuple(p))


raw_letters = st.lists(st.sampled_from([1, -1, 2, -2, 3, -3]), max_size=30)
words3 = raw_letters.map(lambda xs: ReducedWord(tuple(xs), 3))


def test_reduce_examples():
    assert reduce([1, -1], 2) == ReducedWord.identity(2)
    assert reduce([1, 2, -2, 1], 2) == W("aa")
    assert reduce([1, -2, 2, -1, 2], 2) == W("b")


def test_reduce_rank_error():
    with pytest.raises(RankError):
        reduce([3], 2)
    with pytest.raises(RankError):
        reduce([0], 2)


@settings(max_examples=200)
@given(raw_letters, st.integers(0, 2**32 - 1))
def test_reduction_is_confluent(xs, seed):
    w = reduce(xs, 3)
    assert w.letters == rewrite_reduce(xs, random.Random(seed))
    assert reduce(w.letters, 3) == w


def test_multiply_examples():
    assert multiply(W("a"), W("A")) == ReducedWord.identity(2)
    assert multiply(W("ab"), W("Ba")) == W("aa")
    assert multiply(ReducedWord.identity(2), W("abA")) == W("abA")
    with pytest.raises(RankError):
        multiply(W("a", 2), W("a", 3))


@given(words3, words3, words3)
def test_group_axioms(u, v, w):
    assert (u * v) * w == u * (v * w)
    assert u * ~u == ReducedWord.identity(3) == ~u * u
    assert (u * v).letters == rewrite_reduce(u.letters + v.letters, random.Random(0))


def test_invert_examples():
    assert invert(ReducedWord.identity(2)) == ReducedWord.identity(2)
    assert invert(W("ab")) == W("BA")
    assert invert(W("abA")) == W("aBA")


def test_power_examples():
    assert power(W("ab"), 3) == W("ababab")
    assert power(W("Aba"), 2) == W("Abba")
    assert power(W("abA"), 0) == ReducedWord.identity(2)


@given(words3, st.integers(-6, 6))
def test_power_matches_repeated_product(u, n):
    acc = ReducedWord.identity(3)
    for _ in range(abs(n)):
        acc = acc * (u if n > 0 else ~u)
    assert power(u, n) == acc
    assert power(u, -n) == invert(power(u, n))


def test_count_occurrences_examples():
    assert count_occurrences(W("ab"), W("ababab")) == 3
    assert count_occurrences(W("ab"), ReducedWord.identity(2)) == 0
    assert count_occurrences(W("aa"), W("aaa")) == 2
    with pytest.raises(ValueError):
        count_occurrences(ReducedWord.identity(2), W("a"))


@given(words3)
def test_count_matches_sliding_window(g):
    p = ReducedWord((1, 2), 3)
    assert count_occurrences(p, g) == sliding_count(p.letters, g.letters)


def test_brooks_examples():
    psi = CountingQuasimorphism.from_string("ab", 2)
    assert brooks_value(psi, W("ababab")) == 3
    assert brooks_value(psi, ReducedWord.identity(2)) == 0
    assert brooks_value(psi, W("BA")) == -1


def test_quasimorphism_config():
    assert CountingQuasimorphism.from_string("ab", 2).defect_bound == 6.0
    assert CountingQuasimorphism.from_string("abb", 2).defect_bound == 12.0
    assert CountingQuasimorphism.from_string("a", 2).defect_bound == 1.0
    with pytest.raises(ValueError):
        CountingQuasimorphism(ReducedWord.identity(2))
    with pytest.raises(ValueError):
        CountingQuasimorphism.from_string("ab", 2, defect_bound=0.0)


@given(words3)
def test_antisymmetry(g):
    psi = CountingQuasimorphism(ReducedWord((1, -2, 3), 3))
    assert brooks_value(psi, ~g) == -brooks_value(psi, g)


@given(words3, words3)
def test_quasimorphism_bound(g, h):
    for pat in [(1, 2), (1, -2, 3), (1, 1, 2, -3)]:
        psi = CountingQuasimorphism(ReducedWord(pat, 3))
        d = abs(psi(g * h) - psi(g) - psi(h))
        assert d <= psi.defect_bound
        # the sharper raw bound 3(|w|-1) documented on the class
        assert d <= 3 * (len(pat) - 1)
        hd = abs(psi.stable_value(g * h) - psi.stable_value(g) - psi.stable_value(h))
        assert hd <= psi.defect_bound


def test_homogenize_examples():
    psi = CountingQuasimorphism.from_string("ab", 2)
    for n in (1, 2, 7, 64):
        est = homogenize(psi, W("ab"), n)
        assert est.value == 1.0
        assert est.error_bound == psi.defect_bound / n
    assert homogenize(psi, W("a"), 50).value == 0.0
    assert homogenize(psi, ReducedWord.identity(2), 10).value == 0.0
    with pytest.raises(ValueError):
        homogenize(psi, W("a"), 0)


@given(words3)
def test_homogenize_brackets_exact_stable_value(g):
    psi = CountingQuasimorphism(ReducedWord((1, -2, 1), 3))
    exact = psi.stable_value(g)
    for n in (1, 4, 32):
        est = homogenize(psi, g, n)
        assert abs(est.value - exact) <= est.error_bound + 1e-12


@given(words3, st.integers(1, 5))
def test_homogeneity_of_limit(g, m):
    psi = CountingQuasimorphism(ReducedWord((1, 2), 3))
    e1 = homogenize(psi, g, 40)
    em = homogenize(psi, power(g, m), 40)
    assert abs(em.value - m * e1.value) <= (1 + m) * e1.error_bound + 1e-12
    assert psi.stable_value(power(g, m)) == m * psi.stable_value(g)


def test_stable_value_conjugation_invariant():
    psi = CountingQuasimorphism.from_string("ab", 2)
    g = W("abab")
    for h in [W("a"), W("bA"), W("aaB")]:
        assert psi.stable_value(h * g * ~h) == psi.stable_value(g) == 2.0


def test_defect_estimate():
    psi_a = CountingQuasimorphism.from_string("a", 2)
    assert defect_estimate(psi_a, 3) == 0.0
    psi_ab = CountingQuasimorphism.from_string("ab", 2)
    d1 = defect_estimate(psi_ab, 1)
    assert 0.0 <= d1 <= psi_ab.defect_bound
    d4 = defect_estimate(psi_ab, 4)
    assert 0.0 < d4 <= psi_ab.defect_bound


def test_words_up_to_counts():
    # 1 + 4 + 4*3 + 4*9 reduced words of length <= 3 in F_2
    assert len(list(words_up_to(2, 3))) == 1 + 4 + 12 + 36


def test_essentiality_witness():
    psi = CountingQuasimorphism.from_string("ab", 2)
    wit = essentiality_witness(psi, 2)
    assert (wit.alpha, wit.beta) == (W("a"), W("b"))
    assert wit.gap == 1.0
    assert wit.certified_gap > 0
    assert essentiality_witness(CountingQuasimorphism.from_string("a", 2), 2) is None
    assert essentiality_witness(psi, 0) is None
