"""Symbolic positive sequences tending to zero, evaluated exactly.

A :class:`SequenceSpec` is one of a handful of frozen dataclasses.  Terms are
indexed from 1.  Evaluation goes through :func:`stream`, which yields
consecutive terms cheaply (ratio rules are products, so random access would
cost O(n) per term).
"""

from __future__ import annotations

import ast
import heapq
import itertools
import operator
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Union

from .exact import (
    Q,
    TailWindow,
    SpecError,
    as_scalar,
    decode_scalar,
    encode_scalar,
    format_scalar,
)

__all__ = [
    "Expr",
    "Geometric",
    "DyadicGaussian",
    "RatioRule",
    "StarredPerturbation",
    "Explicit",
    "Scaled",
    "Subsequence",
    "Merged",
    "SequenceSpec",
    "ScalingSequence",
    "evaluate",
    "stream",
    "terms",
    "is_spec",
    "two_adic_valuation",
    "certify_eventually_decreasing",
    "decreasing_subsequence",
    "scaling_sequence",
    "spec_to_json",
    "spec_from_json",
    "describe",
]

_MAX_EXPONENT = 10**7


# ---------------------------------------------------------------------------
# expression grammar

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
}


def _power(base: Q, exponent: Q) -> Q:
    if exponent.denominator != 1:
        raise SpecError(f"non-integer exponent {exponent}")
    e = exponent.numerator
    if abs(e) > _MAX_EXPONENT:
        raise SpecError(f"exponent {e} out of range")
    if base == 0 and e < 0:
        raise SpecError("zero raised to a negative power")
    return base**e


def _check(node: ast.AST, var: str) -> None:
    if isinstance(node, ast.Expression):
        _check(node.body, var)
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS and not isinstance(node.op, ast.Pow):
            raise SpecError(f"operator {type(node.op).__name__} not allowed")
        _check(node.left, var)
        _check(node.right, var)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.USub, ast.UAdd)):
            raise SpecError(f"operator {type(node.op).__name__} not allowed")
        _check(node.operand, var)
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, int) or isinstance(node.value, bool):
            raise SpecError(f"only integer constants are allowed, got {node.value!r}")
    elif isinstance(node, ast.Name):
        if node.id != var:
            raise SpecError(f"unknown name {node.id!r} (only {var!r} is allowed)")
    else:
        raise SpecError(f"syntax {type(node).__name__} not allowed in expressions")


def _eval(node: ast.AST, value: Q) -> Q:
    if isinstance(node, ast.BinOp):
        left = _eval(node.left, value)
        right = _eval(node.right, value)
        if isinstance(node.op, ast.Pow):
            return _power(left, right)
        if isinstance(node.op, ast.Div) and right == 0:
            raise SpecError("division by zero")
        return _BINOPS[type(node.op)](left, right)
    if isinstance(node, ast.UnaryOp):
        inner = _eval(node.operand, value)
        return -inner if isinstance(node.op, ast.USub) else inner
    if isinstance(node, ast.Constant):
        return Q(node.value)
    return value  # ast.Name, already checked


@dataclass(frozen=True)
class Expr:
    """Rational expression in a single variable.

    Integer constants, ``+ - * /``, integer powers (``^`` or ``**``) and
    parentheses.  ``2^-(n*n)`` and ``n/(n+1)`` are typical.
    """

    text: str
    var: str = "n"

    def __post_init__(self):
        self._tree  # parse eagerly so bad input fails at construction

    @cached_property
    def _tree(self) -> ast.Expression:
        try:
            tree = ast.parse(self.text.replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise SpecError(f"cannot parse expression {self.text!r}") from exc
        _check(tree, self.var)
        return tree

    def __call__(self, value) -> Q:
        return _eval(self._tree.body, Q(value))


# ---------------------------------------------------------------------------
# sequence variants


@dataclass(frozen=True)
class Geometric:
    """x_n = a0 * q**n."""

    a0: Q
    q: Q

    def __post_init__(self):
        object.__setattr__(self, "a0", as_scalar(self.a0, positive=True))
        object.__setattr__(self, "q", as_scalar(self.q, positive=True))
        if self.q >= 1:
            raise SpecError(f"geometric ratio must lie in (0,1), got {self.q}")


@dataclass(frozen=True)
class DyadicGaussian:
    """x_n = a0 * 2**(-n*n)."""

    a0: Q

    def __post_init__(self):
        object.__setattr__(self, "a0", as_scalar(self.a0, positive=True))


@dataclass(frozen=True)
class RatioRule:
    """x_1 = a0 and x_{n+1} = x_n * ratio(n) with ratio(n) in (0,1)."""

    a0: Q
    ratio: Expr

    def __post_init__(self):
        object.__setattr__(self, "a0", as_scalar(self.a0, positive=True))
        if isinstance(self.ratio, str):
            object.__setattr__(self, "ratio", Expr(self.ratio))

    def step(self, n: int) -> Q:
        r = self.ratio(n)
        if not 0 < r < 1:
            raise SpecError(f"ratio rule {self.ratio.text!r} gives {r} at n={n}, outside (0,1)")
        return r


@dataclass(frozen=True)
class StarredPerturbation:
    """x_n = 2**(-m(n)) * base(n) with m(n) = v2(n) + 1.

    The classes {n : v2(n) = k - 1} partition the positive integers into
    infinite sets whose least elements 2**(k-1) increase with k.
    """

    base: "SequenceSpec"


@dataclass(frozen=True)
class Explicit:
    """Finite prefix followed by ``tail`` re-indexed from 1."""

    prefix: tuple
    tail: "SequenceSpec"

    def __post_init__(self):
        vals = tuple(as_scalar(v, positive=True) for v in self.prefix)
        object.__setattr__(self, "prefix", vals)


@dataclass(frozen=True)
class Scaled:
    c: Q
    base: "SequenceSpec"

    def __post_init__(self):
        object.__setattr__(self, "c", as_scalar(self.c, positive=True))


@dataclass(frozen=True)
class Subsequence:
    """x_k = base(indices(k)) for a strictly increasing integer rule."""

    indices: Expr
    base: "SequenceSpec"

    def __post_init__(self):
        if isinstance(self.indices, str):
            object.__setattr__(self, "indices", Expr(self.indices))

    def index(self, k: int) -> int:
        v = self.indices(k)
        if v.denominator != 1 or v < 1:
            raise SpecError(f"index rule {self.indices.text!r} gives {v} at k={k}")
        return v.numerator


@dataclass(frozen=True)
class Merged:
    """Decreasing enumeration of the union of the values of ``parts``.

    Each part must be strictly decreasing; repeated values appear once.
    """

    parts: tuple

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if len(self.parts) < 1:
            raise SpecError("Merged needs at least one part")


SequenceSpec = Union[
    Geometric, DyadicGaussian, RatioRule, StarredPerturbation, Explicit, Scaled, Subsequence, Merged
]
_VARIANTS = (Geometric, DyadicGaussian, RatioRule, StarredPerturbation, Explicit, Scaled, Subsequence, Merged)


def is_spec(obj) -> bool:
    return isinstance(obj, _VARIANTS)


def two_adic_valuation(n: int) -> int:
    if n < 1:
        raise ValueError("valuation of a nonpositive integer")
    return (n & -n).bit_length() - 1


# ---------------------------------------------------------------------------
# evaluation


def stream(spec: SequenceSpec, start: int = 1) -> Iterator[Q]:
    """Yield x_start, x_{start+1}, ... exactly."""
    if start < 1:
        raise SpecError(f"sequence index must be >= 1, got {start}")
    if isinstance(spec, Geometric):
        x = spec.a0 * spec.q**start
        while True:
            yield x
            x *= spec.q
    elif isinstance(spec, DyadicGaussian):
        for n in itertools.count(start):
            yield spec.a0 / (1 << (n * n))
    elif isinstance(spec, RatioRule):
        x = spec.a0
        for n in range(1, start):
            x *= spec.step(n)
        n = start
        while True:
            yield x
            x *= spec.step(n)
            n += 1
    elif isinstance(spec, StarredPerturbation):
        for n, x in zip(itertools.count(start), stream(spec.base, start)):
            yield x / (1 << (two_adic_valuation(n) + 1))
    elif isinstance(spec, Explicit):
        k = len(spec.prefix)
        yield from spec.prefix[start - 1 :]
        yield from stream(spec.tail, max(1, start - k))
    elif isinstance(spec, Scaled):
        for x in stream(spec.base, start):
            yield spec.c * x
    elif isinstance(spec, Subsequence):
        yield from _stream_subsequence(spec, start)
    elif isinstance(spec, Merged):
        merged = heapq.merge(*(stream(p) for p in spec.parts), reverse=True)
        deduped = (v for v, _ in itertools.groupby(merged))
        yield from itertools.islice(deduped, start - 1, None)
    else:
        raise SpecError(f"not a sequence spec: {spec!r}")


def _stream_subsequence(spec: Subsequence, start: int) -> Iterator[Q]:
    first = spec.index(start)
    base = stream(spec.base, first)
    pos = first
    current = next(base)
    prev = first - 1
    for k in itertools.count(start):
        target = spec.index(k)
        if target <= prev:
            raise SpecError(f"index rule {spec.indices.text!r} is not strictly increasing at k={k}")
        while pos < target:
            current = next(base)
            pos += 1
        prev = target
        yield current


def evaluate(spec: SequenceSpec, n: int) -> Q:
    """The n-th term (n >= 1)."""
    if n < 1:
        raise SpecError(f"sequence index must be >= 1, got {n}")
    return next(stream(spec, n))


def terms(spec: SequenceSpec, start: int, stop: int) -> list[Q]:
    """Terms start..stop inclusive."""
    if stop < start:
        return []
    return list(itertools.islice(stream(spec, start), stop - start + 1))


def validate(spec: SequenceSpec, horizon: int = 16) -> SequenceSpec:
    """Evaluate the first ``horizon`` terms, raising SpecError on any defect."""
    if not isinstance(spec, _VARIANTS):
        raise SpecError(f"not a sequence spec: {spec!r}")
    for x in terms(spec, 1, horizon):
        if x <= 0:
            raise SpecError(f"nonpositive term {x} in {describe(spec)}")
    return spec


# ---------------------------------------------------------------------------
# monotonicity


def certify_eventually_decreasing(spec: SequenceSpec, window: TailWindow) -> int | None:
    """Smallest index in the window from which terms strictly decrease
    through the window's end, or None when even the last step increases."""
    vals = terms(spec, window.start, window.end)
    first = None
    for i in range(len(vals) - 1, 0, -1):
        if vals[i] < vals[i - 1]:
            first = window.start + i - 1
        else:
            break
    return first


def decreasing_subsequence(spec: SequenceSpec, window: TailWindow) -> list[int] | None:
    """Running-minimum indices: keep n when x_n is below every earlier term
    in the window.  None when fewer than three indices survive."""
    kept: list[int] = []
    best = None
    for n, x in zip(window.indices(), stream(spec, window.start)):
        if best is None or x < best:
            kept.append(n)
            best = x
    return kept if len(kept) >= 3 else None


@dataclass(frozen=True)
class ScalingSequence:
    spec: SequenceSpec
    certified_eventually_decreasing_from: int | None = None

    def __call__(self, n: int) -> Q:
        return evaluate(self.spec, n)


def scaling_sequence(spec: SequenceSpec, window: TailWindow) -> ScalingSequence:
    if isinstance(spec, ScalingSequence):
        return spec
    validate(spec)
    return ScalingSequence(spec, certify_eventually_decreasing(spec, window))


# ---------------------------------------------------------------------------
# JSON and display


def spec_to_json(spec: SequenceSpec) -> dict:
    if isinstance(spec, Geometric):
        return {"type": "Geometric", "a0": encode_scalar(spec.a0), "q": encode_scalar(spec.q)}
    if isinstance(spec, DyadicGaussian):
        return {"type": "DyadicGaussian", "a0": encode_scalar(spec.a0)}
    if isinstance(spec, RatioRule):
        return {"type": "RatioRule", "a0": encode_scalar(spec.a0), "ratio": spec.ratio.text}
    if isinstance(spec, StarredPerturbation):
        return {"type": "StarredPerturbation", "base": spec_to_json(spec.base)}
    if isinstance(spec, Explicit):
        return {
            "type": "Explicit",
            "prefix": [encode_scalar(v) for v in spec.prefix],
            "tail": spec_to_json(spec.tail),
        }
    if isinstance(spec, Scaled):
        return {"type": "Scaled", "c": encode_scalar(spec.c), "base": spec_to_json(spec.base)}
    if isinstance(spec, Subsequence):
        return {"type": "Subsequence", "indices": spec.indices.text, "base": spec_to_json(spec.base)}
    if isinstance(spec, Merged):
        return {"type": "Merged", "parts": [spec_to_json(p) for p in spec.parts]}
    raise SpecError(f"not a sequence spec: {spec!r}")


def spec_from_json(obj) -> SequenceSpec:
    if not isinstance(obj, dict) or "type" not in obj:
        raise SpecError(f"sequence spec must be an object with a 'type' field: {obj!r}")
    kind = obj["type"]
    try:
        if kind == "Geometric":
            return Geometric(decode_scalar(obj["a0"]), decode_scalar(obj["q"]))
        if kind == "DyadicGaussian":
            return DyadicGaussian(decode_scalar(obj["a0"]))
        if kind == "RatioRule":
            return RatioRule(decode_scalar(obj["a0"]), Expr(obj["ratio"]))
        if kind == "StarredPerturbation":
            return StarredPerturbation(spec_from_json(obj["base"]))
        if kind == "Explicit":
            return Explicit(tuple(decode_scalar(v) for v in obj["prefix"]), spec_from_json(obj["tail"]))
        if kind == "Scaled":
            return Scaled(decode_scalar(obj["c"]), spec_from_json(obj["base"]))
        if kind == "Subsequence":
            return Subsequence(Expr(obj["indices"]), spec_from_json(obj["base"]))
        if kind == "Merged":
            return Merged(tuple(spec_from_json(p) for p in obj["parts"]))
    except KeyError as exc:
        raise SpecError(f"{kind} spec is missing field {exc}") from exc
    raise SpecError(f"unknown sequence type {kind!r}")


def describe(spec: SequenceSpec) -> str:
    f = format_scalar
    if isinstance(spec, Geometric):
        return f"Geometric({f(spec.a0)}, {f(spec.q)})"
    if isinstance(spec, DyadicGaussian):
        return f"DyadicGaussian({f(spec.a0)})"
    if isinstance(spec, RatioRule):
        return f"RatioRule({f(spec.a0)}, {spec.ratio.text})"
    if isinstance(spec, StarredPerturbation):
        return f"Starred({describe(spec.base)})"
    if isinstance(spec, Explicit):
        return f"Explicit([{', '.join(f(v) for v in spec.prefix)}], {describe(spec.tail)})"
    if isinstance(spec, Scaled):
        return f"{f(spec.c)}*{describe(spec.base)}"
    if isinstance(spec, Subsequence):
        return f"{describe(spec.base)}[{spec.indices.text}]"
    if isinstance(spec, Merged):
        return "Merged(" + ", ".join(describe(p) for p in spec.parts) + ")"
    return repr(spec)
