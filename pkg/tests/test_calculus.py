import math

import numpy as np
import pytest

from fragnorm.calculus import (
    PreconditionError,
    PsiValue,
    QuadratureSpec,
    essential_claim_check,
    frag_lower_bound,
    frag_upper_bound,
    homogenized_psi,
    power_series,
    psi_integral,
    relative_defect_audit,
    stable_norm_report,
)
from fragnorm.dynamics import BallMap, MapWord, TubeTwist, make_push_map, region_overlap
from fragnorm.fragmentation import FragmentationInfeasible, HamiltonianTwist, fragment_tube_twist
from fragnorm.plane import PuncturedPlane, Rect
from fragnorm.words import CountingQuasimorphism


@pytest.fixture(scope="module")
def M2():
    return PuncturedPlane([[0.0, 0.0], [3.0, 0.5]], [-5.0, 5.0])


@pytest.fixture(scope="module")
def psi_a():
    return CountingQuasimorphism.from_string("a", 2)


@pytest.fixture(scope="module")
def psi_ab():
    return CountingQuasimorphism.from_string("ab", 2)


@pytest.fixture(scope="module")
def twist(M2):
    return make_push_map(M2, [1], 3 * math.pi, 0.99)


Q64 = QuadratureSpec(resolution=64)
Q128 = QuadratureSpec(resolution=128)


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(mode="simpson")
    with pytest.raises(ValueError):
        QuadratureSpec(resolution=0)
    with pytest.raises(ValueError):
        PsiValue(1.0, -0.1)


def test_identity_is_zero(M2, psi_a):
    v = psi_integral(MapWord(), psi_a, M2)
    assert v.value == 0.0 and v.statistical_error == 0.0
    assert homogenized_psi(MapWord(), psi_a, M2, 4).value == 0.0


def test_rank_mismatch(M2):
    psi3 = CountingQuasimorphism.from_string("c", 3)
    with pytest.raises(ValueError, match="rank"):
        psi_integral(MapWord.of(BallMap([-3, 3], 0.5)), psi3, M2)


def test_ball_map_far_from_punctures_is_zero(M2, psi_ab):
    # the ball sits across the cut ray below puncture 1, so loops do cross it
    b = MapWord.of(BallMap([0.0, -2.0], 0.5, 1.0))
    v = psi_integral(b, psi_ab, M2, Q128)
    assert v.value == 0.0
    assert homogenized_psi(b, psi_ab, M2, 5, Q64).value == 0.0


def test_twist_value_near_core_measure(M2, psi_a, twist):
    v = psi_integral(MapWord.of(twist), psi_a, M2, Q128)
    assert abs(v.value - twist.core_measure) <= twist.peripheral_measure + 2 * v.statistical_error
    assert v.statistical_error > 0
    assert "grid 128x128" in v.note


def test_quadrature_convergence(M2, psi_a, twist):
    coarse = psi_integral(MapWord.of(twist), psi_a, M2, Q128)
    fine = psi_integral(MapWord.of(twist), psi_a, M2, QuadratureSpec(resolution=256))
    assert abs(fine.value - coarse.value) < coarse.statistical_error
    assert fine.statistical_error < coarse.statistical_error


def test_monte_carlo_mode(M2, psi_a, twist):
    f = MapWord.of(twist)
    q = QuadratureSpec(mode="monte-carlo", samples=20_000, seed=5)
    a, b = psi_integral(f, psi_a, M2, q), psi_integral(f, psi_a, M2, q)
    assert a.value == b.value
    c = psi_integral(f, psi_a, M2, QuadratureSpec(mode="monte-carlo", samples=20_000, seed=6))
    assert c.value != a.value
    assert abs(a.value - twist.core_measure) <= twist.peripheral_measure + 4 * a.statistical_error


def test_raw_integrand_toggle(M2, psi_a, psi_ab, twist):
    f = MapWord.of(twist)
    raw = QuadratureSpec(resolution=64, homogenized_integrand=False)
    # a single-letter pattern is a homomorphism: raw and homogenized agree pointwise
    assert psi_integral(f, psi_a, M2, raw).value == psi_integral(f, psi_a, M2, Q64).value
    # for ab the raw count sees the conjugating prefixes of based loops
    g = MapWord.of(make_push_map(M2, [1, 2], 6.0, 0.9))
    hom = psi_integral(g, psi_ab, M2, Q64)
    assert abs(hom.value - g.factors[0][0].core_measure) <= g.factors[0][0].peripheral_measure + 2 * hom.statistical_error
    psi_integral(g, psi_ab, M2, raw)  # evaluates without error


def test_threads_are_bit_stable(M2, psi_ab):
    f = MapWord.of(make_push_map(M2, [1, 2], 6.0, 0.9), TubeTwist([0, 0], 0.5, 1.5))
    q1 = QuadratureSpec(resolution=96)
    base = psi_integral(f, psi_ab, M2, q1)
    for t in (2, 4, 8):
        other = psi_integral(f, psi_ab, M2, QuadratureSpec(resolution=96, threads=t))
        assert (other.value, other.statistical_error) == (base.value, base.statistical_error)


def test_series_matches_direct_powers(M2, psi_ab):
    # dual route: cocycle products versus trajectories of f^k
    f = MapWord.of(TubeTwist([0, 0], 0.5, 1.5), (make_push_map(M2, [1, 2], 6.0, 0.9), -1))
    vals, errs, _, _ = power_series(f, psi_ab, M2, 3, Q64)
    for k in (1, 2, 3):
        direct = psi_integral(f**k, psi_ab, M2, QuadratureSpec(resolution=64, region=Q64.resolve_region(f)))
        assert vals[k - 1] == direct.value
        assert errs[k - 1] == direct.statistical_error


def test_homogenized_twist_constant_in_k(M2, psi_a, twist):
    hp = homogenized_psi(MapWord.of(twist), psi_a, M2, 5, Q128)
    ks, vals = zip(*hp.series)
    assert ks == (1, 2, 3, 4, 5)
    err = psi_integral(MapWord.of(twist), psi_a, M2, Q128).statistical_error
    assert max(vals) - min(vals) <= 2 * err
    assert hp.truncation_error == pytest.approx(psi_a.defect_bound * 3 * math.pi / 5)


def test_power_additivity(M2, psi_ab):
    t = make_push_map(M2, [1, 2], 6.0, 0.8)
    vals, errs, _, _ = power_series(MapWord.of(t), psi_ab, M2, 4, Q64)
    for k in range(1, 5):
        slack = k * t.peripheral_measure * psi_ab.defect_bound + errs[k - 1] + k * errs[0]
        assert abs(vals[k - 1] - k * vals[0]) <= slack


def test_conjugation_invariance(M2, psi_ab):
    f = MapWord.of(make_push_map(M2, [1, 2], 6.0, 0.9))
    rng = np.random.default_rng(0)
    base = homogenized_psi(f, psi_ab, M2, 4, Q64)
    for h in (
        MapWord.of(BallMap([1.5, 2.6], 0.5, 0.5)),
        MapWord.of(TubeTwist([0, 0], 0.4, 1.2, -1)),
        MapWord.of(BallMap([rng.uniform(0, 3), rng.uniform(2, 3)], 0.4, 1.0), TubeTwist([3, 0.5], 0.3, 1.0)),
    ):
        conj = h * f * h.inverse()
        region = Q64.resolve_region(conj)
        q = QuadratureSpec(resolution=64, region=region)
        a = homogenized_psi(conj, psi_ab, M2, 4, q)
        b = homogenized_psi(f, psi_ab, M2, 4, q)
        assert abs(a.value - b.value) <= a.statistical_error + b.statistical_error
    assert base.value > 0


def test_defect_audit_identity_and_disjoint(M2, psi_ab):
    f = MapWord.of(make_push_map(M2, [1], 4.0, 0.9))
    a = relative_defect_audit(f, MapWord(), psi_ab, M2, Q64)
    assert a.delta == 0.0 and a.mu_U == 0.0 and a.passed
    g = MapWord.of(BallMap([-3.5, 3.5], 0.5, 1))
    a = relative_defect_audit(f, g, psi_ab, M2, Q64)
    assert a.mu_U == 0.0
    assert abs(a.delta) <= a.quadrature_error and a.passed


def test_defect_audit_overlapping_twists(M2, psi_ab):
    f = MapWord.of(TubeTwist([0, 0], 0.5, 2.0))
    g = MapWord.of(TubeTwist([3, 0.5], 0.5, 2.0))
    a = relative_defect_audit(f, g, psi_ab, M2, QuadratureSpec(resolution=128))
    assert a.passed
    # U is the lens where the annuli meet: exact area, plus a Monte Carlo oracle
    lens = region_overlap(f.factors[0][0].support(), g.factors[0][0].support())
    rng = np.random.default_rng(0)
    pts = rng.uniform(-2.0, 5.0, (400_000, 2))
    mc = 49 * np.mean(f.factors[0][0].contains(pts) & g.factors[0][0].contains(pts))
    assert lens == pytest.approx(mc, abs=0.05)
    assert a.mu_U == pytest.approx(lens, rel=0.03)
    assert a.upper_f is None and not a.chain_certified


def test_defect_audit_zero_flux_chain(M2, psi_ab):
    f = MapWord.of(HamiltonianTwist([0, 0], 1.0, 1.3))
    g = MapWord.of(BallMap([0.0, 1.15], 0.3, 0.5))
    a = relative_defect_audit(f, g, psi_ab, M2, Q64)
    assert a.passed and a.chain_certified
    assert a.upper_g == 1 and a.upper_f == len(fragment_tube_twist(f.factors[0][0]))


def test_upper_bounds(M2):
    assert frag_upper_bound(MapWord.of(BallMap([0, 0], 0.5))) == 1
    assert frag_upper_bound(MapWord()) == 0
    h = MapWord.of(HamiltonianTwist([0, 0], 1.0, 1.3))
    n = frag_upper_bound(h)
    assert n == len(fragment_tube_twist(h.factors[0][0]))
    for k in (2, 3):
        assert frag_upper_bound(h**k) <= k * n
    with pytest.raises(FragmentationInfeasible):
        frag_upper_bound(MapWord.of(TubeTwist([0, 0], 1, 2)))


def test_lower_bounds(M2, psi_a, twist):
    assert frag_lower_bound(MapWord(), psi_a, M2, Q64, 4) == 0.0
    assert frag_lower_bound(MapWord.of(BallMap([-3, 3], 0.5)), psi_a, M2, Q64, 4) == 0.0
    lo = frag_lower_bound(MapWord.of(twist), psi_a, M2, Q128, 20)
    assert 0 < lo <= twist.support_measure / (3 * psi_a.defect_bound)
    assert lo == pytest.approx(0.97 * 3 * math.pi / 3, rel=0.1)


def test_soundness_ladder(M2, psi_a):
    f = MapWord.of(HamiltonianTwist([0, 0], 1.0, 1.3), BallMap([-3, 3], 0.5))
    assert frag_lower_bound(f, psi_a, M2, Q64, 4) <= frag_upper_bound(f)


def test_stable_norm_report(M2, psi_a, twist):
    with pytest.raises(ValueError):
        stable_norm_report(MapWord.of(twist), psi_a, M2, 1, Q64)
    zero = stable_norm_report(MapWord.of(HamiltonianTwist([0, 0], 1.0, 1.3)), psi_a, M2, 3, Q64)
    assert all(r.lower_bound == 0.0 for r in zero.rows)
    assert zero.consistent and all(r.certified for r in zero.rows)
    rep = stable_norm_report(MapWord.of(twist), psi_a, M2, 6, Q64)
    assert [r.k for r in rep.rows] == list(range(1, 7))
    assert rep.rate > 0 and rep.fitted_slope() == pytest.approx(rep.rate)
    assert not any(r.certified for r in rep.rows) and "flux" in rep.upper_note


def test_essential_claim(psi_ab):
    M = PuncturedPlane([[-1.0, 0.0], [1.0, 0.0]], [-5.0, 5.0])
    fa = MapWord.of(TubeTwist([-1, 0], 0.4, 1.6))
    fb = MapWord.of(TubeTwist([1, 0], 0.4, 1.6))
    r = essential_claim_check(fa, fb, psi_ab, M, QuadratureSpec(resolution=96), k_max=4)
    assert r.passed and r.margin > 0
    assert r.gap == 1.0
    assert abs(r.combination) == pytest.approx(r.overlap, rel=0.15)
    assert essential_claim_check(fa, MapWord(), psi_ab, M).degenerate
    far = MapWord.of(TubeTwist([1, 0], 0.2, 0.5))
    with pytest.raises(PreconditionError):
        essential_claim_check(MapWord.of(TubeTwist([-1, 0], 0.2, 0.5)), far, psi_ab, M)


def test_no_gap_for_nested_twists(psi_ab):
    # classes a and ab: psi-bar(ab a) = psi-bar(ab) + psi-bar(a), nothing to detect
    M = PuncturedPlane([[-1.0, 0.0], [1.0, 0.0]], [-5.0, 5.0])
    fa = MapWord.of(TubeTwist([-1, 0], 0.3, 1.5))
    fb = MapWord.of(TubeTwist([0, 0], 1.3, 2.3))
    r = essential_claim_check(fa, fb, psi_ab, M, QuadratureSpec(resolution=64), k_max=4)
    assert not r.passed


def test_region_is_used(M2, psi_a, twist):
    region = Rect(-2.5, 2.5, -2.5, 2.5)
    v = psi_integral(MapWord.of(twist), psi_a, M2, QuadratureSpec(resolution=80, region=region))
    assert "[-2.5,2.5]" in v.note
