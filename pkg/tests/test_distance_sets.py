from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from porositykit.distance_sets import (
    DistanceSet,
    GapKind,
    finite_set,
    from_sequence,
    gap_components,
    lambda_,
    porosity_upper,
    scale_set,
    union,
)
from porositykit.exact import Q, ResourceError, TailWindow, Verdict
from porositykit.sequences import DyadicGaussian, Explicit, Geometric, RatioRule, Scaled

from oracles import brute_gaps, brute_lambda, grid_porosity

HALF = Geometric(1, Q(1, 2))
THIRD = Geometric(1, Q(1, 3))


def test_members_in_examples():
    assert finite_set([Q(1, 2), Q(1, 4)]).members_in(0, 1) == [Q(1, 4), Q(1, 2)]
    assert from_sequence(HALF).members_in(Q(1, 8), Q(1, 2)) == [Q(1, 8), Q(1, 4), Q(1, 2)]
    E = union(from_sequence(HALF), from_sequence(THIRD))
    assert E.members_in(Q(1, 9), Q(1, 2)) == [Q(1, 9), Q(1, 8), Q(1, 4), Q(1, 3), Q(1, 2)]


def test_members_in_needs_a_floor_for_infinite_sets():
    with pytest.raises(ResourceError):
        from_sequence(HALF).members_in(0, 1)


def test_gap_components_finite_example():
    scan = gap_components(finite_set([Q(1, 4), Q(1, 2)]), 1)
    got = [(g.a, g.b, g.kind) for g in scan]
    assert got == [
        (Q(1, 2), Q(1), GapKind.TRUNCATED_AT_H),
        (Q(1, 4), Q(1, 2), GapKind.INTERIOR),
        (Q(0), Q(1, 4), GapKind.TOUCHES_ZERO),
    ]


def test_gap_components_geometric_and_dyadic():
    scan = gap_components(from_sequence(HALF), 1, floor=Q(1, 32))
    interior = [(g.a, g.b) for g in scan if g.kind is GapKind.INTERIOR]
    assert interior == [(Q(1, 2 ** (k + 1)), Q(1, 2**k)) for k in range(1, 5)]
    # h = 1/2 is itself an element, so the top gap is reported as truncated at h
    scan = gap_components(from_sequence(DyadicGaussian(1)), Q(1, 2), floor=Q(1, 2**20))
    assert scan.components[0].kind is GapKind.TRUNCATED_AT_H
    interior = [(g.a, g.b) for g in scan if g.kind is not GapKind.CLIPPED_AT_FLOOR]
    assert interior == [(Q(1, 2**4), Q(1, 2)), (Q(1, 2**9), Q(1, 2**4)), (Q(1, 2**16), Q(1, 2**9))]


@st.composite
def small_sets(draw):
    specs = draw(
        st.lists(
            st.one_of(
                st.builds(lambda a, q: Geometric(a, q), st.sampled_from([Q(1), Q(3, 4), Q(1, 3)]),
                          st.sampled_from([Q(1, 2), Q(1, 3), Q(2, 3)])),
                st.builds(lambda a: DyadicGaussian(a), st.sampled_from([Q(1), Q(5, 7)])),
                st.just(RatioRule(1, "n/(n+1)")),
            ),
            min_size=1,
            max_size=3,
        )
    )
    finite = draw(st.lists(st.fractions(min_value=Fraction(1, 50), max_value=2, max_denominator=60), max_size=3))
    return specs, [Q(f) for f in finite if f > 0]


@settings(max_examples=60, deadline=None)
@given(small_sets(), st.fractions(min_value=Fraction(1, 8), max_value=2, max_denominator=50),
       st.sampled_from([Q(1, 64), Q(1, 100), Q(1, 500)]))
def test_gap_components_match_brute_force(data, h, floor):
    specs, finite = data
    h = Q(h)
    if floor >= h:
        return
    E = DistanceSet(tuple(specs), tuple(finite))
    got = [(g.a, g.b) for g in gap_components(E, h, floor=floor)]
    assert got == sorted(brute_gaps(specs, h, floor, finite), reverse=True)


@settings(max_examples=60, deadline=None)
@given(small_sets(), st.fractions(min_value=Fraction(1, 8), max_value=2, max_denominator=50))
def test_lambda_matches_brute_force(data, h):
    specs, finite = data
    h = Q(h)
    E = DistanceSet(tuple(specs), tuple(finite))
    depth = Q(1, 2000)
    expected = brute_lambda(specs, h, depth, finite)
    assert expected >= depth  # otherwise the truncated bottom gap could matter
    assert lambda_(E, h) == expected


@settings(max_examples=40, deadline=None)
@given(small_sets(), st.fractions(min_value=Fraction(1, 20), max_value=2, max_denominator=40),
       st.fractions(min_value=Fraction(1, 20), max_value=2, max_denominator=40))
def test_lambda_is_monotone(data, h1, h2):
    specs, finite = data
    E = DistanceSet(tuple(specs), tuple(finite))
    lo, hi = sorted((Q(h1), Q(h2)))
    assert lambda_(E, lo) <= lambda_(E, hi)


def test_lambda_examples():
    assert lambda_(finite_set([Q(1, 4), Q(1, 2)]), 1) == Q(1, 2)
    assert lambda_(finite_set([Q(2)]), Q(1, 3)) == Q(1, 3)
    assert lambda_(from_sequence(HALF), Q(3, 4)) == Q(1, 4)


@pytest.mark.parametrize("q", [Q(1, 2), Q(1, 3), Q(3, 4)])
def test_geometric_porosity_equals_one_minus_q(q):
    est = porosity_upper(from_sequence(Geometric(1, q)))
    assert est.verdict is Verdict.CONVERGES
    assert est.tail_max == 1 - q
    assert grid_porosity(q) == 1 - q


def test_dyadic_is_strongly_porous():
    est = porosity_upper(from_sequence(DyadicGaussian(1)))
    assert est.verdict is Verdict.CONVERGES
    assert 1 - est.tail_min < Q(1, 2**60)


def test_harmonic_porosity_vanishes():
    est = porosity_upper(from_sequence(RatioRule(1, "n/(n+1)")))
    assert est.tail_max <= Q(1, 32)


def test_finite_set_porosity_is_one():
    assert porosity_upper(finite_set([Q(1, 2)])).tail_max == 1


def test_scale_set():
    assert scale_set(from_sequence(HALF), 2).tails == (Geometric(2, Q(1, 2)),)
    E = union(from_sequence(HALF), finite_set([Q(3)]))
    assert scale_set(E, 1) == E
    t = Q(1, 8)
    assert scale_set(from_sequence(DyadicGaussian(1)), 1 / Q(1, 16)).contains(1)
    assert scale_set(E, 1 / t).contains(1)


def test_explicit_prefix_moves_to_finite_part():
    E = from_sequence(Explicit((Q(1, 2), Q(3, 4)), Geometric(Q(1, 2), Q(1, 2))))
    assert Q(3, 4) in E.finite_part
    assert E.members_in(Q(1, 8), 1) == [Q(1, 8), Q(1, 4), Q(1, 2), Q(3, 4)]


def test_json_roundtrip():
    E = union(from_sequence(Scaled(3, DyadicGaussian(1))), finite_set([Q(1, 3)]))
    assert DistanceSet.from_json(E.to_json()) == E
