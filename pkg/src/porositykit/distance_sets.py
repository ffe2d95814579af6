"""Subsets of the half-line accumulating (possibly) at 0.

A :class:`DistanceSet` is a finite union of strictly decreasing tails plus a
finite set.  Everything near 0 is enumerated exactly, largest element first,
by merging the tails.
"""

from __future__ import annotations

import bisect
import enum
import heapq
import itertools
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from .exact import (
    Q,
    INF,
    LimitEstimate,
    ResourceError,
    SpecError,
    TailWindow,
    Verdict,
    as_scalar,
    decode_scalar,
    encode_scalar,
    estimate,
    format_scalar,
)
from .sequences import (
    DyadicGaussian,
    Explicit,
    Geometric,
    RatioRule,
    Scaled,
    SequenceSpec,
    describe,
    evaluate,
    spec_from_json,
    spec_to_json,
    stream,
    terms,
)

ELEMENT_CAP = 10**4
COMPONENT_CAP = 10**3
_CHECK_HORIZON = 48


class GapKind(str, enum.Enum):
    INTERIOR = "interior"
    TOUCHES_ZERO = "touches_zero"
    TRUNCATED_AT_H = "truncated_at_h"
    CLIPPED_AT_FLOOR = "clipped_at_floor"


@dataclass(frozen=True)
class GapComponent:
    """Open interval (a, b) missing E, maximal inside the queried range."""

    a: Q
    b: Q
    kind: GapKind = GapKind.INTERIOR

    @property
    def length(self) -> Q:
        return self.b - self.a

    @property
    def ratio(self):
        """b / a, infinite for a gap touching 0."""
        return INF if self.a == 0 else self.b / self.a

    @property
    def relative_length(self) -> Q:
        return (self.b - self.a) / self.b

    def to_json(self) -> dict:
        return {"a": encode_scalar(self.a), "b": encode_scalar(self.b), "kind": self.kind.value}

    def __str__(self) -> str:
        return f"({format_scalar(self.a)}, {format_scalar(self.b)})"


@dataclass(frozen=True)
class GapScan:
    components: list
    partial: bool = False
    note: str = ""

    def __iter__(self):
        return iter(self.components)

    def __len__(self):
        return len(self.components)

    def __getitem__(self, i):
        return self.components[i]


def _split_prefix(spec: SequenceSpec) -> tuple[list[Q], SequenceSpec]:
    """Separate an Explicit prefix (which may be non-monotone) from its tail."""
    if isinstance(spec, Explicit):
        head, tail = _split_prefix(spec.tail)
        return list(spec.prefix) + head, tail
    if isinstance(spec, Scaled):
        head, tail = _split_prefix(spec.base)
        if tail is not spec.base or head:
            return [spec.c * v for v in head], Scaled(spec.c, tail)
    return [], spec


def _monotone(spec: SequenceSpec) -> Iterator[Q]:
    prev = None
    for n, x in enumerate(stream(spec), start=1):
        if x <= 0 or (prev is not None and x >= prev):
            raise SpecError(f"tail {describe(spec)} is not strictly decreasing and positive at n={n}")
        prev = x
        yield x


def _first_index_at_most(spec: SequenceSpec, hi: Q) -> int:
    """Least n with spec(n) <= hi, for a strictly decreasing spec."""
    if evaluate(spec, 1) <= hi:
        return 1
    lo, step = 1, 1
    while evaluate(spec, lo + step) > hi:
        lo += step
        step *= 2
    top = lo + step
    # spec(lo) > hi >= spec(top)
    while top - lo > 1:
        mid = (lo + top) // 2
        if evaluate(spec, mid) > hi:
            lo = mid
        else:
            top = mid
    return top


@dataclass(frozen=True)
class Members:
    """Ascending exact list of every element of E that is >= ``floor``,
    plus the largest element below ``floor`` when there is one."""

    values: tuple
    floor: Q

    def index(self, x: Q) -> int | None:
        i = bisect.bisect_left(self.values, x)
        if i < len(self.values) and self.values[i] == x:
            return i
        return None

    def successor(self, x: Q):
        """Smallest element > x, or None."""
        i = bisect.bisect_right(self.values, x)
        return self.values[i] if i < len(self.values) else None

    def predecessor(self, x: Q):
        """Largest element < x, or None."""
        i = bisect.bisect_left(self.values, x)
        return self.values[i - 1] if i > 0 else None

    def nearest(self, x: Q):
        """Closest listed element to x (ties go to the larger one)."""
        i = bisect.bisect_left(self.values, x)
        above = self.values[i] if i < len(self.values) else None
        below = self.values[i - 1] if i > 0 else None
        if below is None:
            return above
        if above is None:
            return below
        return above if above - x <= x - below else below

    def between(self, lo: Q, hi: Q) -> list:
        i = bisect.bisect_left(self.values, lo)
        j = bisect.bisect_right(self.values, hi)
        return list(self.values[i:j])


@dataclass(frozen=True)
class DistanceSet:
    """E = (union of tails) u finite_part, optionally with 0.

    Tails given as Explicit specs are split at construction: the prefix
    joins ``finite_part`` and only the monotone tail is kept.
    """

    tails: tuple = ()
    finite_part: tuple = ()
    contains_zero: bool = True
    label: str = field(default="", compare=False)

    def __post_init__(self):
        finite = {as_scalar(v, positive=True) for v in self.finite_part}
        tails = []
        for spec in self.tails:
            head, tail = _split_prefix(spec)
            finite.update(head)
            tails.append(tail)
        for spec in tails:
            # fail early on obviously broken tails; later defects surface lazily
            for _ in itertools.islice(_monotone(spec), _CHECK_HORIZON):
                pass
        object.__setattr__(self, "tails", tuple(tails))
        object.__setattr__(self, "finite_part", tuple(sorted(finite, reverse=True)))

    @property
    def accumulates_at_zero(self) -> bool:
        return bool(self.tails)

    @property
    def max_element(self):
        heads = [evaluate(t, 1) for t in self.tails] + list(self.finite_part[:1])
        return max(heads) if heads else None

    # -- enumeration -----------------------------------------------------

    def iter_desc(self, hi=None) -> Iterator[Q]:
        """Elements <= hi (all elements when hi is None), largest first,
        without duplicates."""
        streams = []
        for spec in self.tails:
            start = 1 if hi is None else _first_index_at_most(spec, hi)
            streams.append(_checked_from(spec, start))
        fin = [v for v in self.finite_part if hi is None or v <= hi]
        streams.append(iter(fin))
        merged = heapq.merge(*streams, reverse=True)
        return (v for v, _ in itertools.groupby(merged))

    def materialize(self, floor: Q, cap: int = ELEMENT_CAP, hi=None) -> Members:
        """All elements in [floor, hi] plus the first one below floor."""
        out = []
        for x in self.iter_desc(hi):
            out.append(x)
            if x < floor:
                break
            if len(out) > cap:
                raise ResourceError(
                    f"more than {cap} elements of {self.describe()} above {format_scalar(floor)}"
                )
        out.reverse()
        return Members(tuple(out), Q(floor))

    def members_in(self, lo, hi, cap: int | None = None) -> list:
        """Ascending list of the elements of E in [lo, hi]."""
        lo, hi = as_scalar(lo, nonnegative=True), as_scalar(hi, nonnegative=True)
        if lo >= hi:
            raise SpecError(f"empty range [{lo}, {hi}]")
        if lo == 0 and self.tails and cap is None:
            raise ResourceError("E accumulates at 0: pass an element cap to enumerate down to 0")
        cap = ELEMENT_CAP if cap is None else cap
        out = []
        for x in self.iter_desc(hi):
            if x < lo:
                break
            out.append(x)
            if len(out) > cap:
                raise ResourceError(f"more than {cap} elements in [{format_scalar(lo)}, {format_scalar(hi)}]")
        out.reverse()
        return out

    def contains(self, x) -> bool:
        x = as_scalar(x, nonnegative=True)
        if x == 0:
            return self.contains_zero
        if x in self.finite_part:
            return True
        return any(evaluate(t, _first_index_at_most(t, x)) == x for t in self.tails)

    def neighbors(self, x: Q):
        """(largest element <= x, smallest element >= x); None where absent."""
        below, above = None, None
        for v in self.finite_part:
            if v <= x and (below is None or v > below):
                below = v
            if v >= x and (above is None or v < above):
                above = v
        for t in self.tails:
            n = _first_index_at_most(t, x)
            v = evaluate(t, n)
            if below is None or v > below:
                below = v
            w = v if v == x else (evaluate(t, n - 1) if n > 1 else None)
            if w is not None and (above is None or w < above):
                above = w
        return below, above

    def nearest(self, x: Q):
        """Element of E minimising |e - x| (ties go to the larger element)."""
        below, above = self.neighbors(x)
        if below is None:
            return above
        if above is None:
            return below
        return above if above - x <= x - below else below

    def describe(self) -> str:
        if self.label:
            return self.label
        parts = [describe(t) for t in self.tails]
        if self.finite_part:
            parts.append("{" + ", ".join(format_scalar(v) for v in self.finite_part[:6]) + (", ..." if len(self.finite_part) > 6 else "") + "}")
        return " u ".join(parts) if parts else "{}"

    # -- JSON --------------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "tails": [spec_to_json(t) for t in self.tails],
            "finite_part": [encode_scalar(v) for v in self.finite_part],
            "contains_zero": self.contains_zero,
        }

    @classmethod
    def from_json(cls, obj: dict, label: str = "") -> "DistanceSet":
        return cls(
            tuple(spec_from_json(t) for t in obj.get("tails", [])),
            tuple(decode_scalar(v) for v in obj.get("finite_part", [])),
            bool(obj.get("contains_zero", True)),
            label=label,
        )


def _checked_from(spec: SequenceSpec, start: int) -> Iterator[Q]:
    prev = None
    for n, x in zip(itertools.count(start), stream(spec, start)):
        if prev is not None and x >= prev:
            raise SpecError(f"tail {describe(spec)} is not strictly decreasing at n={n}")
        prev = x
        yield x


def union(*sets: DistanceSet, label: str = "") -> DistanceSet:
    tails, finite = [], []
    for s in sets:
        tails.extend(s.tails)
        finite.extend(s.finite_part)
    return DistanceSet(tuple(tails), tuple(finite), any(s.contains_zero for s in sets), label=label)


def from_sequence(spec: SequenceSpec, label: str = "") -> DistanceSet:
    return DistanceSet((spec,), label=label)


def finite_set(values: Sequence, label: str = "") -> DistanceSet:
    return DistanceSet((), tuple(values), label=label)


# ---------------------------------------------------------------------------
# gaps and porosity


def gap_components(E: DistanceSet, h, floor=0, cap: int = COMPONENT_CAP) -> GapScan:
    """Maximal E-free open subintervals of (floor, h), highest first.

    Stops with ``partial=True`` once ``cap`` components have been listed
    without reaching ``floor``.
    """
    h = as_scalar(h, positive=True)
    floor = as_scalar(floor, nonnegative=True)
    if floor >= h:
        raise SpecError(f"floor {floor} must lie below h {h}")
    out: list[GapComponent] = []
    upper = h
    for x in E.iter_desc(h):
        if x == h:
            continue
        if x <= floor:
            break
        kind = GapKind.TRUNCATED_AT_H if upper == h else GapKind.INTERIOR
        out.append(GapComponent(x, upper, kind))
        upper = x
        if len(out) >= cap:
            return GapScan(out, partial=True, note=f"component cap {cap} reached above {format_scalar(x)}")
    if floor == 0:
        kind = GapKind.TRUNCATED_AT_H if upper == h else GapKind.TOUCHES_ZERO
    elif upper == h:
        kind = GapKind.TRUNCATED_AT_H
    else:
        kind = GapKind.INTERIOR if E.contains(floor) else GapKind.CLIPPED_AT_FLOOR
    out.append(GapComponent(floor, upper, kind))
    return GapScan(out)


def lambda_(E: DistanceSet, h, cap: int = ELEMENT_CAP) -> Q:
    """Length of the largest open subinterval of (0, h) missing E.

    Exact: enumeration stops as soon as the best gap found is at least as
    long as the current element, since every gap below it is shorter.
    """
    h = as_scalar(h, positive=True)
    best = Q(0)
    upper = h
    count = 0
    for x in E.iter_desc(h):
        if x == h:
            continue
        best = max(best, upper - x)
        upper = x
        count += 1
        if best >= x:
            return best
        if count > cap:
            raise ResourceError(f"lambda needs more than {cap} elements below {format_scalar(h)}")
    return max(best, upper)  # the component touching 0


@dataclass(frozen=True)
class PorosityProfile:
    """Per-anchor values of lambda(h)/h behind a porosity estimate."""

    estimate: LimitEstimate
    indices: list
    anchors: list
    ratios: list
    partial: bool = False
    lower: list | None = None  # ratios from exactly known gaps only; differs when partial

    def to_json(self) -> dict:
        return {
            "estimate": self.estimate.to_json(),
            "partial": self.partial,
            "samples": [
                {"n": n, "h": encode_scalar(h), "ratio": encode_scalar(r)}
                for n, h, r in zip(self.indices, self.anchors, self.ratios)
            ],
        }


def porosity_profile(
    E: DistanceSet,
    window: TailWindow = TailWindow(),
    h_grid: Sequence | None = None,
    h0=1,
    cap: int = ELEMENT_CAP,
    tol: Q | None = None,
) -> PorosityProfile:
    """Estimate p+(E, 0) = limsup lambda(E, 0, h) / h.

    Default grid: the n-th element x_n of E below h0 for n in the window,
    together with the midpoint of (x_{n+1}, x_n); the recorded ratio at n is
    the larger of the two.
    """
    kw = {} if tol is None else {"tol": tol}
    if h_grid is not None:
        hs = [as_scalar(h, positive=True) for h in h_grid]
        ratios = [lambda_(E, h, cap) / h for h in hs]
        idx = list(range(1, len(hs) + 1))
        return PorosityProfile(estimate(idx, ratios, window, **kw), idx, hs, ratios)
    if not E.tails:
        # 0 is isolated: lambda(h) = h below the least element
        least = E.finite_part[-1] if E.finite_part else Q(1)
        hs = [least / 2**n for n in window.indices()]
        one = Q(1)
        est = LimitEstimate.exact(one, window, note="0 is isolated in E")
        return PorosityProfile(est, list(window.indices()), hs, [one] * len(hs))

    h0 = as_scalar(h0, positive=True)
    xs: list[Q] = []  # x_1 > x_2 > ... (elements <= h0)
    gaps: list[Q] = []  # gaps[k] = x_{k+1} - x_{k+2} in 1-based terms
    best_after_end = Q(0)
    known_after_end = Q(0)
    partial = False
    it = E.iter_desc(h0)
    for x in it:
        if xs:
            gaps.append(xs[-1] - x)
        xs.append(x)
        if len(xs) > window.end + 1:
            best_after_end = max(best_after_end, gaps[-1])
            known_after_end = best_after_end
            if best_after_end >= x:
                break
        if len(xs) > cap:
            partial = True
            best_after_end = max(best_after_end, x)  # certified upper bound on the rest
            break
    if len(xs) < window.end + 2:
        raise ResourceError(f"E has fewer than {window.end + 1} elements below {format_scalar(h0)}")
    n_last = window.end

    def profile(after_end: Q) -> list:
        # suffix maxima S_n = max_{k >= n} (x_k - x_{k+1})
        suffix = [Q(0)] * (n_last + 2)
        suffix[n_last + 1] = max([after_end] + gaps[n_last:])
        for n in range(n_last, 0, -1):
            suffix[n] = max(suffix[n + 1], gaps[n - 1])
        out = []
        for n in window.indices():
            x, nxt = xs[n - 1], xs[n]
            mid = (x + nxt) / 2
            out.append(max(suffix[n] / x, max((x - nxt) / 2, suffix[n + 1]) / mid))
        return out

    idx = list(window.indices())
    anchors = [xs[n - 1] for n in idx]
    ratios = profile(best_after_end)
    lower = profile(known_after_end) if partial else ratios
    est = estimate(idx, ratios, window, **kw)
    if partial:
        est = LimitEstimate(est.verdict, est.tail_min, est.tail_max, window, est.value, est.unbounded, est.count,
                            note="element cap reached: values are upper bounds")
    return PorosityProfile(est, idx, anchors, ratios, partial, lower)


def porosity_upper(E: DistanceSet, h_grid: Sequence | None = None, window: TailWindow = TailWindow(), **kw) -> LimitEstimate:
    return porosity_profile(E, window, h_grid=h_grid, **kw).estimate


# ---------------------------------------------------------------------------
# rescaling


def _scale_spec(spec: SequenceSpec, t: Q) -> SequenceSpec:
    if isinstance(spec, Geometric):
        return Geometric(t * spec.a0, spec.q)
    if isinstance(spec, DyadicGaussian):
        return DyadicGaussian(t * spec.a0)
    if isinstance(spec, RatioRule):
        return RatioRule(t * spec.a0, spec.ratio)
    if isinstance(spec, Scaled):
        return Scaled(t * spec.c, spec.base)
    return Scaled(t, spec)


def scale_set(E: DistanceSet, t) -> DistanceSet:
    """{t*e : e in E}."""
    t = as_scalar(t, positive=True)
    if t == 1:
        return E
    label = f"{format_scalar(t)}*({E.label})" if E.label else ""
    return DistanceSet(
        tuple(_scale_spec(s, t) for s in E.tails),
        tuple(t * v for v in E.finite_part),
        E.contains_zero,
        label=label,
    )
