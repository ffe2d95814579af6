from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_force_M
from porositykit.catalog import M2_FACTORS, M3_FACTORS, cluster, dyadic, geometric, harmonic, starred, starred_union
from porositykit.distance_sets import finite_set, from_sequence
from porositykit.exact import INF, ConfigurationError, Inconclusive, Q, TailWindow, VacuousError
from porositykit.porosity import (
    CSPKind,
    EquivalenceCertificate,
    IntervalSequence,
    Outcome,
    Refutation,
    C_E_estimate,
    M_of_L,
    asymp_equivalent,
    csp_verdict,
    find_interval_sequence,
    is_normal_scaling,
    is_universal,
    domination_criterion,
    porosity_witness,
    universal_candidate,
)
from porositykit.sequences import (
    DyadicGaussian,
    Explicit,
    Geometric,
    RatioRule,
    Scaled,
    StarredPerturbation,
    Subsequence,
    terms,
)

W = TailWindow(32, 256)
SHORT = TailWindow(16, 128)
HALF = Geometric(1, Q(1, 2))
DYADIC = DyadicGaussian(1)


def test_equivalence_examples():
    cert = asymp_equivalent(HALF, Scaled(3, HALF), TailWindow(1, 64))
    assert (cert.c1, cert.c2) == (Q(3, 2), Q(6))
    cert = asymp_equivalent(HALF, HALF, TailWindow(1, 64))
    assert (cert.c1, cert.c2) == (Q(1, 2), Q(2))
    ref = asymp_equivalent(HALF, DYADIC, TailWindow(5, 64))
    assert isinstance(ref, Refutation) and not ref


def test_equivalence_needs_a_real_window():
    with pytest.raises(ConfigurationError):
        asymp_equivalent(HALF, HALF, TailWindow(1, 4))


def test_domination_one_sided():
    ok, _ = domination_criterion(Scaled(3, HALF), HALF, TailWindow(1, 64))
    assert ok
    ok, why = domination_criterion(HALF, Scaled(3, HALF), TailWindow(1, 64))
    assert not ok and "gamma_n > a_n" in why
    ok, why = domination_criterion(HALF, DYADIC, TailWindow(1, 64))
    assert not ok and "unbounded" in why


def test_dyadic_witness_is_consecutive_gaps():
    s = find_interval_sequence(dyadic(), DYADIC, W)
    assert s.outcome is Outcome.ACCEPTED
    assert s.C == 1
    for n, g in zip(s.sequence.indices, s.sequence.gaps):
        assert (g.a, g.b) == (Q(1, 2 ** (n * n)), Q(1, 2 ** ((n - 1) ** 2)))


def test_geometric_has_no_witness():
    s = find_interval_sequence(geometric(Q(1, 2)), HALF, W)
    assert s.outcome is Outcome.FAILED
    assert "relative" in s.reason or "1 -" in s.reason or "length" in s.reason


def test_starred_probe_refutes_union():
    s = find_interval_sequence(starred_union(), StarredPerturbation(DYADIC), SHORT, label="starred")
    assert s.outcome is Outcome.REFUTED
    # a_n / tau*_n = 2^m(n) with m(n) = v2(n) + 1
    for d in s.diagnostics:
        n = d["n"]
        m = (n & -n).bit_length()
        assert Q(d["a_over_tau"]["num"]) / Q(d["a_over_tau"]["den"]) == 2**m


def test_porosity_witness_constants():
    w = porosity_witness(dyadic(), DYADIC, TailWindow(1, 40), Ks=[100])
    assert w.k == 1 + Q(1, 2**10)
    # b/a = 2^(2n-1) for the gap (x_n, x_(n-1)) first exceeds 100 at n = 4
    assert w.N1[Q(100)] == 4
    ref = porosity_witness(geometric(Q(1, 2)), HALF, TailWindow(1, 40), Ks=[3])
    assert isinstance(ref, Refutation)


def test_finite_set_has_no_test_sequences():
    with pytest.raises(VacuousError):
        find_interval_sequence(finite_set([Q(1, 2)]), HALF, W)


def test_universal_candidate_examples():
    L = universal_candidate(dyadic(), W, Q(2))
    assert all(g.a == Q(1, 2 ** (k * k)) and g.b == Q(1, 2 ** ((k - 1) ** 2)) for k, g in zip(range(2, 12), L.gaps))
    with pytest.raises(Inconclusive):
        universal_candidate(geometric(Q(1, 2)), W, Q(4))
    L = universal_candidate(starred(), SHORT, Q(2))
    star = terms(StarredPerturbation(DYADIC), 1, 140)
    following = dict(zip(star, star[1:]))
    assert all(following[g.b] == g.a for g in L.gaps)


def test_is_universal_examples():
    L = universal_candidate(dyadic(), W, Q(2))
    every_other = IntervalSequence(L.indices[::2], L.gaps[::2], "odd")
    assert is_universal(L, [every_other])[0]
    assert is_universal(L, [L])[0]
    shifted = [type(g)(g.a * 3, g.b * 3, g.kind) for g in L.gaps]
    ok, bad = is_universal(L, [IntervalSequence(L.indices, tuple(shifted), "alien")])
    assert not ok and bad["candidate"] == "alien"


def test_M_of_dyadic_is_exactly_one():
    for w in (TailWindow(8, 64), W):
        M = M_of_L(universal_candidate(dyadic(), w, Q(2)), w)
        assert M.tail_min == M.tail_max == 1


def test_C_E_matches_M():
    out = C_E_estimate(dyadic(), [DYADIC, Subsequence("2*n", DYADIC)], W)
    assert out["C_E"] == 1 and out["agree"]
    assert C_E_estimate(finite_set([Q(1)]), [HALF], W)["vacuous"]
    out = C_E_estimate(geometric(Q(1, 2)), [HALF], W)
    assert out["C_E"] == INF


@pytest.mark.parametrize("factors, expected", [(M2_FACTORS, Q(2)), (M3_FACTORS, Q(3))])
def test_cluster_M_against_brute_force(factors, expected):
    hi, lo = brute_force_M(factors)
    assert hi == lo == expected
    v = csp_verdict(cluster(factors), W)
    assert v.kind is CSPKind.CSP
    assert v.M.tail_max == v.M.tail_min == expected


def test_csp_verdicts():
    assert csp_verdict(dyadic(), W).kind is CSPKind.CSP
    assert csp_verdict(dyadic(), W).M.tail_max == 1
    v = csp_verdict(starred_union(), SHORT)
    assert v.kind is CSPKind.NOT_CSP and v.refuting.label == "tail[1]"
    assert csp_verdict(starred(), SHORT).kind is CSPKind.CSP
    v = csp_verdict(harmonic(), W)
    assert v.kind is CSPKind.NOT_CSP and v.refuting is None
    assert csp_verdict(geometric(Q(1, 2)), W).kind is CSPKind.NOT_CSP
    assert csp_verdict(finite_set([Q(1)]), W).kind is CSPKind.VACUOUS


def test_short_windows_are_inconclusive_not_wrong():
    for E in (cluster(M3_FACTORS), from_sequence(RatioRule(1, "1/(n+1)"))):
        v = csp_verdict(E, TailWindow(4, 12))
        assert v.kind is CSPKind.INCONCLUSIVE, str(v)
    assert csp_verdict(dyadic(), TailWindow(1, 4)).kind is CSPKind.INCONCLUSIVE


def test_normal_scaling():
    assert is_normal_scaling(dyadic(), DYADIC, W).normal
    assert not is_normal_scaling(dyadic(), Scaled(3, DYADIC), W).normal
    bumpy = Explicit(tuple(Q(1, 2 + (k % 2)) for k in range(300)), DYADIC)
    assert not is_normal_scaling(dyadic(), bumpy, W).normal


# --- equivalence laws ------------------------------------------------------

EQ_WINDOW = TailWindow(4, 48)
consts = st.fractions(min_value=Fraction(1, 16), max_value=16, max_denominator=16).map(Q)
bases = st.sampled_from([HALF, Geometric(1, Q(2, 3)), DYADIC, RatioRule(1, "1/(n+1)"), RatioRule(1, "n/(n+1)")])
comparable = st.builds(Scaled, consts, bases)


@settings(max_examples=60, deadline=None)
@given(comparable)
def test_reflexive(a):
    cert = asymp_equivalent(a, a, EQ_WINDOW)
    assert isinstance(cert, EquivalenceCertificate)


@settings(max_examples=60, deadline=None)
@given(comparable, comparable)
def test_symmetric_with_inverted_certificate(a, b):
    ab = asymp_equivalent(a, b, EQ_WINDOW)
    ba = asymp_equivalent(b, a, EQ_WINDOW)
    assert bool(ab) == bool(ba)
    if ab:
        from porositykit.porosity import window_values

        assert ab.invert().holds(window_values(b, EQ_WINDOW), window_values(a, EQ_WINDOW), EQ_WINDOW)
