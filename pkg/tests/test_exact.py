import decimal
import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from porositykit.exact import (
    INF,
    ConfigurationError,
    Q,
    TailWindow,
    Verdict,
    as_scalar,
    decode_scalar,
    encode_scalar,
    estimate,
    format_scalar,
    growth_certificate,
    log2_approx,
    nonneg_sub,
    ratio,
    scientific,
    still_rising,
    tail_stats,
    within,
)

rationals = st.fractions(min_value=0, max_value=10**6, max_denominator=10**9)


@pytest.mark.parametrize(
    "raw, expected",
    [
        ("3/4", Q(3, 4)),
        ("0.125", Q(1, 8)),
        ("1/2^40", Q(1, 2**40)),
        (7, Q(7)),
        (Fraction(2, 6), Q(1, 3)),
        ({"num": "5", "den": "10"}, Q(1, 2)),
    ],
)
def test_as_scalar_parses(raw, expected):
    assert as_scalar(raw) == expected


@pytest.mark.parametrize("bad", [0.5, True, "x/2", {"num": "1"}, "1/0"])
def test_as_scalar_rejects(bad):
    with pytest.raises((ValueError, TypeError)):
        as_scalar(bad)


def test_sign_guards():
    with pytest.raises(ValueError):
        as_scalar("-1/2", nonnegative=True)
    with pytest.raises(ValueError):
        as_scalar(0, positive=True)
    with pytest.raises(ValueError):
        nonneg_sub(Q(1, 3), Q(1, 2))
    assert nonneg_sub(Q(1, 2), Q(1, 3)) == Q(1, 6)


@given(rationals)
def test_encode_roundtrip(x):
    q = Q(x)
    assert decode_scalar(encode_scalar(q)) == q


def test_encode_infinity_and_huge_powers():
    assert decode_scalar(encode_scalar(INF)) == INF
    tiny = Q(1, 2**70000)
    enc = encode_scalar(tiny)
    assert "2^70000" in enc["den"]
    assert decode_scalar(enc) == tiny


def test_format_far_below_float_range():
    x = Q(3, 2**65536)
    text = scientific(x)
    with decimal.localcontext() as ctx:
        ctx.prec = 40
        oracle = decimal.Decimal(3) / decimal.Decimal(2) ** 65536
    mantissa, exponent = text.split("e")
    assert int(exponent) == oracle.adjusted()
    assert abs(decimal.Decimal(mantissa) - oracle.scaleb(-oracle.adjusted())) < decimal.Decimal("1e-10")
    assert format_scalar(Q(1, 3)) == "1/3"
    assert format_scalar(INF) == "inf"
    assert log2_approx(Q(1, 2**65536)) == -65536


def test_window_parse():
    w = TailWindow.parse("32:256")
    assert (w.start, w.end, len(w), w.midpoint) == (32, 256, 225, 144)
    for bad in ("256:32", "0:5", "a:b", "12"):
        with pytest.raises(ConfigurationError):
            TailWindow.parse(bad)


def test_constant_converges_exactly():
    est = tail_stats(lambda n: Q(3, 2), TailWindow())
    assert est.verdict is Verdict.CONVERGES
    assert est.tail_min == est.tail_max == Q(3, 2)


def test_two_plus_reciprocal_needs_a_long_window():
    seq = lambda n: 2 + Q(1, n)
    tol = Q(1, 2**10)
    short = tail_stats(seq, TailWindow(32, 256), tol=tol)
    assert short.verdict is Verdict.OSCILLATES
    assert short.tail_max == 2 + Q(1, 32)
    long = tail_stats(seq, TailWindow(1024, 8192), tol=tol)
    assert long.verdict is Verdict.CONVERGES
    assert within(long.value, Q(2), Q(1, 2**10))


def test_linear_growth_diverges():
    est = tail_stats(lambda n: Q(n), TailWindow(), cap=Q(10**6))
    assert est.verdict is Verdict.DIVERGES
    assert est.unbounded


def test_alternating_oscillates():
    est = tail_stats(lambda n: Q(1 + n % 2), TailWindow())
    assert est.verdict is Verdict.OSCILLATES
    assert (est.liminf, est.limsup) == (1, 2)


def test_growth_certificate_and_rising():
    idx = list(range(32, 257))
    assert growth_certificate(idx, [Q(2) ** (n // 8) for n in idx])
    assert not growth_certificate(idx, [Q(1, n) for n in idx])
    assert still_rising(idx, [1 - Q(1, n) for n in idx], Q(1, 2**20))
    assert not still_rising(idx, [Q(1, n) for n in idx])


def test_ratio_handles_infinity():
    assert ratio(INF, Q(2)) == INF
    assert ratio(Q(1), INF) == 0
    assert math.isinf(ratio(Q(1), Q(0)))


@given(rationals, rationals)
def test_within_is_symmetric(a, b):
    tol = Q(1, 2**10)
    assert within(Q(a), Q(b), tol) == within(Q(b), Q(a), tol)
