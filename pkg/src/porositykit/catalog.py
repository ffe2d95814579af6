"""Named example distance sets used by the CLI, tests and acceptance runs."""

from __future__ import annotations

from typing import Callable

from .distance_sets import DistanceSet, from_sequence, union
from .exact import Q
from .sequences import DyadicGaussian, Expr, Geometric, RatioRule, Scaled, StarredPerturbation

DYADIC = DyadicGaussian(Q(1))
FACTORIAL = RatioRule(Q(1), Expr("1/(n+1)"))


def dyadic(a0=1) -> DistanceSet:
    """{a0 * 2^(-n^2)}; consecutive terms give the universal gaps and M = 1."""
    return from_sequence(DyadicGaussian(Q(a0)))


def geometric(q, a0=1) -> DistanceSet:
    """{a0 * q^n}: porous with p+ = 1 - q but not strongly porous."""
    return from_sequence(Geometric(Q(a0), Q(q)))


def harmonic() -> DistanceSet:
    """{1/n}: p+ = 0."""
    return from_sequence(RatioRule(Q(1), Expr("n/(n+1)")))


def ratio_rule(ratio: str, a0=1) -> DistanceSet:
    return from_sequence(RatioRule(Q(a0), Expr(ratio)))


def cluster(factors, base=DYADIC) -> DistanceSet:
    """Union of c * base over the factors c.

    With 1 = c_1 < ... < c_k and a base decaying faster than any geometric
    sequence, the clusters {c * x_n} are the only nearby points and
    M = c_k / c_1 (the ratio of the outermost points of a cluster).
    """
    return union(*(from_sequence(Scaled(Q(c), base)) for c in factors))


def starred(base=DYADIC) -> DistanceSet:
    """{2^(-m(n)) x_n} with m(n) = v2(n) + 1."""
    return from_sequence(StarredPerturbation(base))


def starred_union(base=DYADIC) -> DistanceSet:
    """{x_n} together with its starred perturbation; strongly porous but
    not completely strongly porous."""
    return union(from_sequence(base), starred(base))


M2_FACTORS = (Q(1), Q(3, 2), Q(2))
M3_FACTORS = (Q(1), Q(3, 2), Q(2), Q(5, 2), Q(3))

CATALOG: dict[str, Callable[[], DistanceSet]] = {
    "dyadic": dyadic,
    "dyadic-3/5": lambda: dyadic(Q(3, 5)),
    "dyadic-7": lambda: dyadic(7),
    "factorial": lambda: ratio_rule("1/(n+1)"),
    "half-factorial": lambda: ratio_rule("1/(2*(n+1))"),
    "triangular-dyadic": lambda: ratio_rule("2^(-n)"),
    "cluster-m2": lambda: cluster(M2_FACTORS),
    "cluster-m3": lambda: cluster(M3_FACTORS),
    "cluster-m2-factorial": lambda: cluster(M2_FACTORS, FACTORIAL),
    "starred": starred,
    "starred-union": starred_union,
    "harmonic": harmonic,
    "geometric-1/2": lambda: geometric(Q(1, 2)),
    "geometric-1/3": lambda: geometric(Q(1, 3)),
    "geometric-3/4": lambda: geometric(Q(3, 4)),
}

# Completely strongly porous sets with their exact porosity constants.
CSP_SETS: dict[str, Q] = {
    "dyadic": Q(1),
    "dyadic-3/5": Q(1),
    "dyadic-7": Q(1),
    "factorial": Q(1),
    "half-factorial": Q(1),
    "triangular-dyadic": Q(1),
    "cluster-m2": Q(2),
    "cluster-m3": Q(3),
    "cluster-m2-factorial": Q(2),
    "starred": Q(1),
}


def named(name: str) -> DistanceSet:
    try:
        factory = CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown example set {name!r}; known: {', '.join(sorted(CATALOG))}") from None
    E = factory()
    return DistanceSet(E.tails, E.finite_part, E.contains_zero, label=name)
