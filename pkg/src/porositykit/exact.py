"""Exact rational scalars and finite-horizon limit statistics.

Every quantity in the package is an exact GMP rational (``gmpy2.mpq``,
aliased ``Q``); ``fractions.Fraction`` inputs are accepted.  Limits are
never taken; instead a sequence is inspected over a :class:`TailWindow` of
indices and summarised by a :class:`LimitEstimate`.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence, Union

from gmpy2 import mpq

Q = mpq
ExactScalar = type(mpq())
Extended = Union[ExactScalar, float]  # an exact rational or math.inf

INF = math.inf

DEFAULT_TOL = Q(1, 2**20)
DEFAULT_RATIO_TOL = Q(1, 2**5)
DIVERGENCE_CAP = Q(10**6)
GROWTH_FACTOR = Q(3, 2)


class PorosityError(Exception):
    """Base class for all errors raised by the package."""


class ConfigurationError(PorosityError, ValueError):
    pass


class SpecError(PorosityError, ValueError):
    """A sequence, set or map specification is malformed or out of range."""


class ResourceError(PorosityError):
    """An enumeration would exceed its element or component cap."""


class PreconditionError(PorosityError, ValueError):
    pass


class VacuousError(PreconditionError):
    """The requested object cannot exist, e.g. no decreasing sequence in a finite set."""


class Inconclusive(PorosityError):
    """A finite-horizon check could not reach a verdict.

    ``criterion`` names the first window criterion that was not met.
    """

    def __init__(self, criterion: str, detail=None):
        super().__init__(criterion)
        self.criterion = criterion
        self.detail = detail


# ---------------------------------------------------------------------------
# parsing and formatting

_COMPACT = re.compile(r"^\s*(\d+)?\s*\*?\s*(?:2\^(\d+))?\s*$")


def _parse_int_part(text: str) -> int:
    """Parse ``123``, ``2^k`` or ``123*2^k`` into an integer."""
    text = text.strip()
    if text.isdigit():
        return int(text)
    m = _COMPACT.match(text)
    if not m or (m.group(1) is None and m.group(2) is None):
        raise SpecError(f"cannot parse integer {text!r}")
    base = int(m.group(1)) if m.group(1) is not None else 1
    shift = int(m.group(2)) if m.group(2) is not None else 0
    return base << shift


def as_scalar(value, *, positive: bool = False, nonnegative: bool = False) -> Q:
    """Coerce ``value`` to an exact rational.

    Accepts ints, Fractions, strings (``"3/4"``, ``"0.125"``, ``"1/2^40"``)
    and ``{"num": ..., "den": ...}`` mappings.  Floats are rejected: a float
    literal would already have been rounded.
    """
    if isinstance(value, bool):
        raise SpecError("booleans are not rationals")
    if isinstance(value, (Fraction, ExactScalar)):
        x = Q(value)
    elif isinstance(value, int):
        x = Q(value)
    elif isinstance(value, str):
        x = _parse_scalar_text(value)
    elif isinstance(value, dict):
        try:
            num, den = value["num"], value["den"]
        except KeyError as exc:
            raise SpecError(f"rational mapping needs 'num' and 'den': {value!r}") from exc
        sign = -1 if str(num).strip().startswith("-") else 1
        n = _parse_int_part(str(num).strip().lstrip("-"))
        d = _parse_int_part(str(den))
        if d == 0:
            raise SpecError("zero denominator")
        x = Q(sign * n, d)
    else:
        raise SpecError(f"not an exact rational: {value!r} ({type(value).__name__})")
    if positive and x <= 0:
        raise SpecError(f"expected a positive rational, got {x}")
    if nonnegative and x < 0:
        raise SpecError(f"expected a nonnegative rational, got {x}")
    return x


def _parse_scalar_text(text: str) -> Q:
    text = text.strip()
    if "^" in text:
        sign = -1 if text.startswith("-") else 1
        body = text.lstrip("-")
        num, _, den = body.partition("/")
        return Q(sign * _parse_int_part(num), _parse_int_part(den) if den else 1)
    try:
        return Q(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise SpecError(f"cannot parse rational {text!r}") from exc


def _format_int(n: int) -> str:
    # factor out large powers of two so that 2^-(n^2) stays readable
    if n == 0:
        return "0"
    shift = (n & -n).bit_length() - 1
    if shift >= 64:
        odd = n >> shift
        return f"2^{shift}" if odd == 1 else f"{odd}*2^{shift}"
    return str(n)


def encode_scalar(x: Extended):
    """Canonical JSON form ``{"num": str, "den": str}``; ``"inf"`` for infinity."""
    if x == INF:
        return "inf"
    x = Q(x)
    sign = "-" if x < 0 else ""
    return {"num": sign + _format_int(abs(x.numerator)), "den": _format_int(x.denominator)}


def decode_scalar(obj) -> Extended:
    if obj == "inf":
        return INF
    return as_scalar(obj)


def format_scalar(x: Extended, digits: int = 12) -> str:
    """Short human-readable rendering; exact when the fraction is small."""
    if x is None:
        return ""
    if x == INF:
        return "inf"
    x = Q(x)
    if abs(x.numerator) < 10**15 and x.denominator < 10**15:
        return str(x)
    return scientific(x, digits)


def scientific(x: Q, digits: int = 12) -> str:
    """Exact decimal scientific notation, correct even far below float range."""
    if x == 0:
        return "0"
    sign = "-" if x < 0 else ""
    x = abs(x)
    exp = log10_floor(x)
    scaled = x / Q(10) ** exp
    mant = round(scaled * 10 ** (digits - 1))
    if mant >= 10**digits:
        mant //= 10
        exp += 1
    text = str(mant)
    return f"{sign}{text[0]}.{text[1:]}e{exp:+d}"


def log10_floor(x: Q) -> int:
    """floor(log10(x)) for positive x, computed exactly."""
    if x <= 0:
        raise ValueError("log of nonpositive number")
    est = len(str(x.numerator)) - len(str(x.denominator))
    while Q(10) ** est > x:
        est -= 1
    while Q(10) ** (est + 1) <= x:
        est += 1
    return est


def log2_approx(x: Extended) -> float:
    """A float approximation of log2(x) that does not underflow."""
    if x == INF:
        return math.inf
    x = Q(x)
    if x <= 0:
        return -math.inf
    shift = x.numerator.bit_length() - x.denominator.bit_length()
    rest = x / Q(2) ** shift
    return shift + math.log2(float(rest))


def to_float(x: Extended) -> float:
    """Float for plotting; ratios are O(1) so this is safe for them."""
    if x == INF:
        return math.inf
    return float(Q(x))


def nonneg_sub(a: Q, b: Q) -> Q:
    """``a - b`` with a guard that the result stays in the nonnegative reals."""
    d = a - b
    if d < 0:
        raise ValueError(f"negative difference {a} - {b}")
    return d


# ---------------------------------------------------------------------------
# windows and limit estimates


@dataclass(frozen=True)
class TailWindow:
    """Indices ``start..end`` standing in for "all sufficiently large n"."""

    start: int = 32
    end: int = 256

    def __post_init__(self):
        if not isinstance(self.start, int) or not isinstance(self.end, int):
            raise ConfigurationError("window bounds must be integers")
        if self.start < 1:
            raise ConfigurationError(f"window start must be positive, got {self.start}")
        if self.start >= self.end:
            raise ConfigurationError(f"degenerate window {self.start}:{self.end}")

    @classmethod
    def parse(cls, text: str) -> "TailWindow":
        try:
            lo, hi = text.split(":")
            return cls(int(lo), int(hi))
        except ValueError as exc:
            raise ConfigurationError(f"window must look like N0:N, got {text!r}") from exc

    def indices(self) -> range:
        return range(self.start, self.end + 1)

    @property
    def midpoint(self) -> int:
        return (self.start + self.end) // 2

    def __len__(self) -> int:
        return self.end - self.start + 1

    def __str__(self) -> str:
        return f"{self.start}:{self.end}"


class Verdict(str, enum.Enum):
    CONVERGES = "converges"
    DIVERGES = "diverges"
    OSCILLATES = "oscillates"


@dataclass(frozen=True)
class LimitEstimate:
    """Finite-horizon summary of a sequence.

    ``limsup`` is read as ``tail_max`` and ``liminf`` as ``tail_min``.
    ``value`` is only set for a converging verdict and is the term at the
    last index inspected.  ``unbounded`` records a growth certificate: the
    maxima over successive dyadic blocks of the window keep growing.
    """

    verdict: Verdict
    tail_min: Extended
    tail_max: Extended
    window: TailWindow
    value: Q | None = None
    unbounded: bool = False
    count: int = 0
    note: str = ""

    @property
    def limsup(self) -> Extended:
        return self.tail_max

    @property
    def liminf(self) -> Extended:
        return self.tail_min

    @property
    def converges(self) -> bool:
        return self.verdict is Verdict.CONVERGES

    @property
    def finite(self) -> bool:
        return self.verdict is not Verdict.DIVERGES and not self.unbounded and self.tail_max != INF

    @property
    def band(self) -> Extended:
        if self.tail_max == INF:
            return INF
        return self.tail_max - self.tail_min

    @classmethod
    def infinite(cls, window: TailWindow, note: str = "") -> "LimitEstimate":
        return cls(Verdict.DIVERGES, INF, INF, window, unbounded=True, note=note)

    @classmethod
    def exact(cls, value: Q, window: TailWindow, note: str = "") -> "LimitEstimate":
        return cls(Verdict.CONVERGES, value, value, window, value=value, count=1, note=note)

    def to_json(self) -> dict:
        out = {
            "verdict": self.verdict.value,
            "tail_min": encode_scalar(self.tail_min),
            "tail_max": encode_scalar(self.tail_max),
            "window": str(self.window),
            "count": self.count,
            "unbounded": self.unbounded,
        }
        if self.value is not None:
            out["value"] = encode_scalar(self.value)
        if self.note:
            out["note"] = self.note
        return out

    def __str__(self) -> str:
        if self.verdict is Verdict.CONVERGES:
            return f"Converges({format_scalar(self.value)})"
        if self.verdict is Verdict.DIVERGES:
            return "Diverges"
        return f"Oscillates[{format_scalar(self.tail_min)}, {format_scalar(self.tail_max)}]"


def _blocks(indices: Sequence[int]) -> list[list[int]]:
    """Split positions of ``indices`` into dyadic blocks [s, 2s), [2s, 4s), ..."""
    if not indices:
        return []
    first = indices[0]
    blocks: list[list[int]] = []
    edge = 2 * first
    current: list[int] = []
    for pos, n in enumerate(indices):
        while n >= edge:
            if current:
                blocks.append(current)
                current = []
            edge *= 2
        current.append(pos)
    if current:
        blocks.append(current)
    # a short final block (e.g. the single index 256 in 32..256) is noise
    if len(blocks) >= 3 and 2 * len(blocks[-1]) < len(blocks[-2]):
        blocks[-2].extend(blocks.pop())
    if len(blocks) < 2:
        half = len(indices) // 2
        if half == 0:
            return [list(range(len(indices)))]
        return [list(range(half)), list(range(half, len(indices)))]
    return blocks


def growth_certificate(indices: Sequence[int], values: Sequence[Extended]) -> bool:
    """True when block maxima grow by at least GROWTH_FACTOR at every step and
    the last block climbs above 1.  Used as the finite stand-in for an
    infinite limsup."""
    blocks = _blocks(indices)
    if len(blocks) < 2:
        return False
    maxima = [max(values[p] for p in b) for b in blocks]
    if maxima[-1] <= 1:
        return False
    return all(b >= GROWTH_FACTOR * a and b > 0 for a, b in zip(maxima, maxima[1:]))


def still_rising(indices: Sequence[int], values: Sequence[Extended], tol: Q = DEFAULT_TOL) -> bool:
    """True when the last dyadic block's maximum beats the previous block's,
    i.e. a limsup reading may still be climbing at the window end."""
    blocks = _blocks(indices)
    if len(blocks) < 2:
        return False
    prev, last = (max(values[p] for p in b) for b in blocks[-2:])
    return last > prev + tol


def estimate(
    indices: Sequence[int],
    values: Sequence[Extended],
    window: TailWindow,
    *,
    tol: Q = DEFAULT_TOL,
    cap: Q = DIVERGENCE_CAP,
) -> LimitEstimate:
    """Summarise precomputed ``values`` at strictly increasing ``indices``."""
    if len(indices) != len(values):
        raise ValueError("indices and values differ in length")
    if not values:
        return LimitEstimate(Verdict.OSCILLATES, INF, INF, window, note="insufficient data: no terms")
    lo, hi = min(values), max(values)
    unbounded = growth_certificate(indices, values)
    if len(values) < 2:
        return LimitEstimate(
            Verdict.OSCILLATES, lo, hi, window, unbounded=False, count=1, note="insufficient data: single term"
        )
    if lo > cap:
        return LimitEstimate(Verdict.DIVERGES, lo, hi, window, unbounded=True, count=len(values))
    if unbounded:
        blocks = _blocks(indices)
        if min(values[p] for p in blocks[-1]) >= max(values[p] for p in blocks[0]):
            return LimitEstimate(
                Verdict.DIVERGES, lo, hi, window, unbounded=True, count=len(values), note="sustained growth"
            )
    if hi != INF and hi - lo <= tol * max(1, hi):
        return LimitEstimate(Verdict.CONVERGES, lo, hi, window, value=values[-1], unbounded=unbounded, count=len(values))
    return LimitEstimate(Verdict.OSCILLATES, lo, hi, window, unbounded=unbounded, count=len(values))


def tail_stats(
    seq: Callable[[int], Q],
    window: TailWindow,
    *,
    tol: Q = DEFAULT_TOL,
    cap: Q = DIVERGENCE_CAP,
) -> LimitEstimate:
    """Evaluate ``seq`` at every index of ``window`` and summarise it."""
    if not isinstance(window, TailWindow):
        raise ConfigurationError("tail_stats needs a TailWindow")
    idx = list(window.indices())
    return estimate(idx, [seq(n) for n in idx], window, tol=tol, cap=cap)


def ratio(a: Extended, b: Extended) -> Extended:
    if b == 0:
        return INF
    if a == INF:
        return INF
    if b == INF:
        return Q(0)
    return Q(a) / Q(b)


def within(a: Extended, b: Extended, tol: Q) -> bool:
    """|a - b| <= tol * max(1, |b|), treating two infinities as equal."""
    if a == INF or b == INF:
        return a == b
    return abs(Q(a) - Q(b)) <= tol * max(1, abs(Q(b)))


def min_extended(values: Iterable[Extended]) -> Extended:
    out: Extended = INF
    for v in values:
        if v < out:
            out = v
    return out
