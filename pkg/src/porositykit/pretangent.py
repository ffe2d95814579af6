"""Finite-horizon pretangent spaces of pointed metric spaces.

A pretangent space is built from finitely many point sequences x_n -> p and
a scaling sequence r_n -> 0: the limits of d(x_n, y_n) / r_n form a
pseudometric on the sequences, and identifying sequences at distance 0
gives a finite metric space whose marked point is the class of the
constant sequence p.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

from networkx.utils import UnionFind

from .distance_sets import DistanceSet, scale_set
from .exact import (
    DEFAULT_TOL,
    INF,
    Q,
    Inconclusive,
    LimitEstimate,
    PreconditionError,
    ResourceError,
    TailWindow,
    Verdict,
    encode_scalar,
    estimate,
    format_scalar,
    within,
)
from .porosity import (
    CSPKind,
    CSPVerdict,
    IntervalSequence,
    csp_verdict,
    is_normal_scaling,
)
from .sequences import Scaled, ScalingSequence, SequenceSpec, describe, is_spec, terms

MARKED = "p"
MIN_KEEP = 8

Locator = Union[SequenceSpec, Callable[[int], object], None]


# ---------------------------------------------------------------------------
# spaces and point sequences


@dataclass(frozen=True)
class LineSet:
    """X = E u {0} on the real line, marked at 0."""

    E: DistanceSet
    marked: object = 0

    def distance(self, x, y) -> Q:
        return abs(Q(x) - Q(y))

    def contains(self, x) -> bool:
        return x == 0 or self.E.contains(x)

    def contains_all(self, xs: Sequence) -> list:
        positive = [Q(x) for x in xs if x != 0]
        if not positive:
            return [True] * len(xs)
        try:
            members = self.E.materialize(min(positive))
        except ResourceError:
            return [self.contains(x) for x in xs]
        return [x == 0 or members.index(Q(x)) is not None for x in xs]

    def describe(self) -> str:
        return f"LineSet({self.E.describe()})"


@dataclass(frozen=True)
class OracleSpace:
    """Any pointed metric space given by an exact distance rule."""

    rule: Callable[[object, object], Q]
    marked: object
    name: str = "oracle"

    def distance(self, x, y) -> Q:
        return Q(self.rule(x, y))

    def contains(self, x) -> bool:
        return True

    def contains_all(self, xs: Sequence) -> list:
        return [True] * len(xs)

    def describe(self) -> str:
        return self.name


@dataclass(frozen=True)
class PointSequence:
    """x_n given by a sequence spec, a callable, or None for the constant
    sequence at the marked point."""

    id: str
    position: Locator = None

    @property
    def is_marked(self) -> bool:
        return self.position is None

    def values(self, space, indices: Sequence[int]) -> list:
        if self.position is None:
            return [space.marked] * len(indices)
        if is_spec(self.position):
            lo, hi = indices[0], indices[-1]
            full = terms(self.position, lo, hi)
            return [full[n - lo] for n in indices]
        return [self.position(n) for n in indices]

    def describe(self) -> str:
        if self.position is None:
            return "p"
        if is_spec(self.position):
            return describe(self.position)
        return getattr(self.position, "__name__", "callable")


def marked_sequence() -> PointSequence:
    return PointSequence(MARKED, None)


@dataclass(frozen=True)
class IndexedValues:
    """Sequence given by a finite table, indexed from ``first``."""

    values: tuple
    first: int = 1
    name: str = "table"

    def __call__(self, n: int):
        i = n - self.first
        if not 0 <= i < len(self.values):
            raise IndexError(f"{self.name}: index {n} outside 1..{len(self.values)}")
        return self.values[i]

    @property
    def __name__(self):
        return self.name


def _scaling_values(r, indices: Sequence[int]) -> list:
    if isinstance(r, ScalingSequence):
        r = r.spec
    if is_spec(r):
        full = terms(r, indices[0], indices[-1])
        return [full[n - indices[0]] for n in indices]
    return [Q(r(n)) for n in indices]


# ---------------------------------------------------------------------------
# stability


@dataclass(frozen=True)
class StabilityVerdict:
    pair: tuple
    estimate: LimitEstimate

    @property
    def stable(self) -> bool:
        return self.estimate.verdict is Verdict.CONVERGES

    def to_json(self) -> dict:
        return {"pair": list(self.pair), "stable": self.stable, "estimate": self.estimate.to_json()}


def _ratios(space, xs, ys, rs) -> list:
    return [space.distance(x, y) / r for x, y, r in zip(xs, ys, rs)]


def mutual_stability(
    x: PointSequence, y: PointSequence, r, space, window: TailWindow = TailWindow(), tol: Q = DEFAULT_TOL,
    indices: Sequence[int] | None = None,
) -> StabilityVerdict:
    """Window statistics of d(x_n, y_n) / r_n."""
    idx = list(indices) if indices is not None else list(window.indices())
    rs = _scaling_values(r, idx)
    vals = _ratios(space, x.values(space, idx), y.values(space, idx), rs)
    return StabilityVerdict((x.id, y.id), estimate(idx, vals, window, tol=tol))


# ---------------------------------------------------------------------------
# construction


@dataclass(frozen=True)
class RefinementStep:
    pair: tuple
    target: Q
    band: Q
    kept: tuple

    def to_json(self) -> dict:
        return {
            "pair": list(self.pair),
            "target": encode_scalar(self.target),
            "band": encode_scalar(self.band),
            "kept": len(self.kept),
            "first": self.kept[0],
            "last": self.kept[-1],
        }


@dataclass
class PretangentSpace:
    """Finite metric space of classes of mutually stable sequences.

    ``dist`` holds the ratio d(x_N, y_N) / r_N of class representatives at
    the last kept index N, so it is a genuine metric on the classes;
    ``band`` records how far the ratio moved over the kept indices.
    """

    classes: list
    dist: list
    band: list
    exact: list
    scaling: object
    indices: tuple
    window: TailWindow
    normal: bool | None = None
    refinement: list = field(default_factory=list)
    rejected: list = field(default_factory=list)
    estimates: dict = field(default_factory=dict)
    marked: int = 0

    def __len__(self) -> int:
        return len(self.classes)

    def class_of(self, seq_id: str) -> int:
        for i, members in enumerate(self.classes):
            if seq_id in members:
                return i
        raise KeyError(seq_id)

    def distance_to_marked(self, i: int) -> Q:
        return self.dist[self.marked][i]

    def rho_star(self) -> Q:
        return max((self.dist[self.marked][i] for i in range(len(self))), default=Q(0))

    def rho_lower(self):
        others = [self.dist[self.marked][i] for i in range(len(self)) if i != self.marked]
        return min(others) if others else INF

    @property
    def diameter(self) -> Q:
        return max(max(row) for row in self.dist)

    def metric_violations(self) -> list:
        """Exhaustive check of identity, symmetry and the triangle inequality."""
        bad = []
        k = len(self)
        for i in range(k):
            if self.dist[i][i] != 0:
                bad.append(("identity", i, i))
            for j in range(k):
                if self.dist[i][j] != self.dist[j][i]:
                    bad.append(("symmetry", i, j))
                if i != j and self.dist[i][j] <= 0:
                    bad.append(("separation", i, j))
                for m in range(k):
                    if self.dist[i][m] > self.dist[i][j] + self.dist[j][m]:
                        bad.append(("triangle", i, j, m))
        return bad

    def to_json(self) -> dict:
        return {
            "classes": [list(c) for c in self.classes],
            "marked": self.marked,
            "dist": [[encode_scalar(v) for v in row] for row in self.dist],
            "band": [[encode_scalar(v) for v in row] for row in self.band],
            "exact": self.exact,
            "normal": self.normal,
            "kept_indices": {"count": len(self.indices), "first": self.indices[0], "last": self.indices[-1]},
            "refinement": [s.to_json() for s in self.refinement],
            "rejected": self.rejected,
            "rho_star": encode_scalar(self.rho_star()),
            "rho_lower": encode_scalar(self.rho_lower()),
        }


def _refine(order, ratio_table, idx, window, tol, log) -> list:
    """Greedy nested index selection: for each unstable pair keep the
    indices whose ratio is within half a tolerance band of its value at the
    last kept index."""
    kept = list(idx)
    for pair in order:
        pos = {n: i for i, n in enumerate(idx)}
        vals = [ratio_table[pair][pos[n]] for n in kept]
        est = estimate(kept, vals, window, tol=tol)
        if est.verdict is Verdict.CONVERGES:
            continue
        target = vals[-1]
        band = tol * max(1, abs(target)) / 2
        kept = [n for n, v in zip(kept, vals) if abs(v - target) <= band]
        if len(kept) < MIN_KEEP:
            raise Inconclusive(
                f"pair {pair[0]},{pair[1]} does not stabilise on any subsequence of the window",
                {"pair": pair, "kept": len(kept)},
            )
        log.append(RefinementStep(pair, target, band, tuple(kept)))
    return kept


def replay_refinement(log: Sequence[RefinementStep], ratio_table: dict, idx: Sequence[int]) -> list:
    """Re-apply a refinement log; returns the final kept indices."""
    kept = list(idx)
    pos = {n: i for i, n in enumerate(idx)}
    for step in log:
        kept = [n for n in kept if abs(ratio_table[step.pair][pos[n]] - step.target) <= step.band]
    return kept


def build_pretangent(
    space,
    seeds: Sequence[PointSequence],
    r,
    window: TailWindow = TailWindow(),
    *,
    tol: Q = DEFAULT_TOL,
    pool: Sequence[PointSequence] = (),
    refine: bool = True,
    check_points: bool = True,
    normal: bool | None = None,
) -> PretangentSpace:
    """Pretangent space spanned by ``seeds`` (plus the marked sequence).

    Seeds whose distance ratio to p is unbounded are rejected with a note;
    ``pool`` sequences are then added greedily when stable against every
    member.  Unstable pairs trigger a logged subsequence refinement.
    """
    idx = list(window.indices())
    rs = _scaling_values(r, idx)
    if any(v <= 0 for v in rs):
        raise PreconditionError("scaling sequence must be positive")
    members: list[PointSequence] = [marked_sequence()]
    rejected = []
    values = {MARKED: [space.marked] * len(idx)}

    def admit(seq: PointSequence, strict: bool) -> bool:
        if seq.id in values:
            raise PreconditionError(f"duplicate sequence id {seq.id!r}")
        vs = seq.values(space, idx)
        if check_points:
            inside = space.contains_all(vs)
            bad = next((n for n, ok in zip(idx, inside) if not ok), None)
            if bad is not None:
                rejected.append({"id": seq.id, "reason": f"x_{bad} is not a point of the space"})
                return False
        to_p = estimate(idx, _ratios(space, vs, values[MARKED], rs), window, tol=tol)
        if not to_p.finite or to_p.verdict is Verdict.DIVERGES:
            rejected.append({"id": seq.id, "reason": f"d(x_n, p)/r_n unbounded ({to_p})"})
            return False
        if strict:
            for m in members:
                est = estimate(idx, _ratios(space, vs, values[m.id], rs), window, tol=tol)
                if est.verdict is not Verdict.CONVERGES:
                    return False
        values[seq.id] = vs
        members.append(seq)
        return True

    for s in seeds:
        if s.is_marked:
            continue
        admit(s, strict=False)
    for s in pool:
        admit(s, strict=True)

    ids = [m.id for m in members]
    pairs = list(itertools.combinations(ids, 2))
    table = {pr: _ratios(space, values[pr[0]], values[pr[1]], rs) for pr in pairs}
    log: list[RefinementStep] = []
    kept = idx
    if refine:
        kept = _refine(pairs, table, idx, window, tol, log)
    pos = {n: i for i, n in enumerate(idx)}
    estimates = {}
    for pr in pairs:
        vals = [table[pr][pos[n]] for n in kept]
        est = estimate(kept, vals, window, tol=tol)
        if est.verdict is not Verdict.CONVERGES:
            raise Inconclusive(f"pair {pr[0]},{pr[1]} is not mutually stable", {"pair": pr, "estimate": str(est)})
        estimates[pr] = est

    uf = UnionFind(ids)
    for pr, est in estimates.items():
        if est.tail_max <= tol:
            uf.union(*pr)
    order = {i: k for k, i in enumerate(ids)}
    groups = sorted((sorted(g, key=order.get) for g in uf.to_sets()), key=lambda g: order[g[0]])
    reps = [g[0] for g in groups]
    last = pos[kept[-1]]
    k = len(groups)
    dist = [[Q(0)] * k for _ in range(k)]
    band = [[Q(0)] * k for _ in range(k)]
    exact = [[True] * k for _ in range(k)]
    for i, j in itertools.combinations(range(k), 2):
        a, b = reps[i], reps[j]
        pr = (a, b) if (a, b) in table else (b, a)
        d = table[pr][last]
        dist[i][j] = dist[j][i] = d
        est = estimates[pr]
        band[i][j] = band[j][i] = est.band
        exact[i][j] = exact[j][i] = est.tail_min == est.tail_max
    if normal is None and isinstance(space, LineSet):
        try:
            normal = bool(is_normal_scaling(space.E, r, window))
        except ResourceError:
            normal = None  # too many elements near the scale to decide

    return PretangentSpace(
        [tuple(g) for g in groups], dist, band, exact, r, tuple(kept), window, normal, log, rejected,
        {f"{a},{b}": e for (a, b), e in estimates.items()},
    )


# ---------------------------------------------------------------------------
# extremal spaces and family-level bounds


def rho_star(space: PretangentSpace) -> Q:
    return space.rho_star()


def rho_lower(space: PretangentSpace):
    return space.rho_lower()


def unbounded_scaling(x: SequenceSpec, t) -> tuple:
    """Scaling r_n = d(x_n, p) / t, under which x has distance exactly t from p."""
    return Scaled(1 / Q(t), x), PointSequence("x", x)


def unbounded_witness(E: DistanceSet, t, window: TailWindow = TailWindow(), x: SequenceSpec | None = None) -> PretangentSpace:
    """Pretangent space containing a point at distance t from the marked point."""
    if not E.tails:
        raise PreconditionError("0 is isolated in E")
    x = x if x is not None else E.tails[0]
    r, seq = unbounded_scaling(x, t)
    return build_pretangent(LineSet(E), [seq], r, window, normal=None)


@dataclass
class ExtremalSpace:
    space: PretangentSpace
    kind: str
    selected: tuple
    scaling: IndexedValues
    seeds: tuple = ()

    def to_json(self) -> dict:
        return {"kind": self.kind, "selected": len(self.selected), **self.space.to_json()}


def _select_extremal(L: IntervalSequence, M: LimitEstimate, window: TailWindow, tol) -> list[int]:
    values = {n: L.gaps[n - 1].a / L.gaps[n].b for n in window.indices() if n < len(L.gaps)}
    top = M.tail_max
    chosen = [n for n, v in values.items() if within(v, top, tol)]
    if len(chosen) < MIN_KEEP:
        # fall back to the running record values, which climb towards the limsup
        best, chosen = None, []
        for n, v in values.items():
            if best is None or v >= best:
                best = v
                chosen.append(n)
    return chosen


def extremal_space(
    E: DistanceSet, window: TailWindow = TailWindow(), kind: str = "upper", verdict: CSPVerdict | None = None,
    tol: Q = DEFAULT_TOL,
) -> ExtremalSpace:
    """Pretangent space realising the extreme value of rho* ("upper") or rho_*
    ("lower") over the normal pretangent spaces of the line set on E.

    With L the universal gap sequence (l_n, m_n) and n(k) a subsequence on
    which l_n / m_{n+1} approaches M:
      upper: r_k = m_{n(k)+1}, seeds t_k = l_{n(k)} and s_k = m_{n(k)+1};
      lower: r_k = l_{n(k)}, seeds s_k = l_{n(k)} and u_k = m_{n(k)+1}.
    """
    verdict = verdict or csp_verdict(E, window)
    if verdict.kind is not CSPKind.CSP:
        raise PreconditionError(f"extremal spaces need a CSP set, got {verdict}")
    L, M = verdict.universal, verdict.M
    chosen = _select_extremal(L, M, window, tol)
    l = tuple(L.gaps[n - 1].a for n in chosen)
    m_next = tuple(L.gaps[n].b for n in chosen)
    K = len(chosen)
    kw = TailWindow(1, K)
    if kind == "upper":
        r = IndexedValues(m_next, name="m_{n(k)+1}")
        seeds = [PointSequence("t", IndexedValues(l, name="l_{n(k)}")), PointSequence("s", IndexedValues(m_next, name="m_{n(k)+1}"))]
    elif kind == "lower":
        r = IndexedValues(l, name="l_{n(k)}")
        seeds = [PointSequence("s", IndexedValues(l, name="l_{n(k)}")), PointSequence("u", IndexedValues(m_next, name="m_{n(k)+1}"))]
    else:
        raise ValueError(f"kind must be 'upper' or 'lower', got {kind!r}")
    space = build_pretangent(LineSet(E), seeds, r, kw, tol=tol, normal=None)
    return ExtremalSpace(space, kind, tuple(chosen), r, tuple(seeds))


@dataclass
class FamilyBounds:
    """R* (sup of rho*) and R_* (inf of rho_*) over normal pretangent spaces."""

    verdict: CSPVerdict
    R_star: LimitEstimate | None = None
    R_lower: object = None
    rho_star_upper: Q | None = None
    rho_lower_lower: object = None
    upper: ExtremalSpace | None = None
    lower: ExtremalSpace | None = None
    vacuous: bool = False

    @property
    def bounded(self) -> bool:
        return self.R_star is not None and self.R_star.finite

    def to_json(self) -> dict:
        out = {"csp": self.verdict.kind.value, "vacuous": self.vacuous, "bounded": self.bounded}
        if self.R_star is not None:
            out["R_star"] = self.R_star.to_json()
        out["R_lower"] = encode_scalar(self.R_lower) if self.R_lower is not None else None
        if self.rho_star_upper is not None:
            out["rho_star_of_upper_space"] = encode_scalar(self.rho_star_upper)
        if self.rho_lower_lower is not None:
            out["rho_lower_of_lower_space"] = encode_scalar(self.rho_lower_lower)
        return out


def family_bounds(E: DistanceSet, window: TailWindow = TailWindow(), verdict: CSPVerdict | None = None, tol: Q = DEFAULT_TOL) -> FamilyBounds:
    """R* and R_* of the normal pretangent spaces to the line set on E.

    For a CSP set R* = M(L) and R_* = 1/M(L); both are cross-checked on
    the extremal spaces.  Otherwise the family is unbounded."""
    verdict = verdict or csp_verdict(E, window)
    if verdict.kind is CSPKind.VACUOUS:
        # only the one-point space occurs
        zero = LimitEstimate.exact(Q(0), window, note="0 is isolated in E")
        return FamilyBounds(verdict, zero, INF, vacuous=True)
    if verdict.kind is CSPKind.NOT_CSP:
        return FamilyBounds(verdict, LimitEstimate.infinite(window, note="not CSP: unbounded family"), Q(0))
    if verdict.kind is CSPKind.INCONCLUSIVE:
        raise Inconclusive(verdict.criterion)
    up = extremal_space(E, window, "upper", verdict, tol)
    lo = extremal_space(E, window, "lower", verdict, tol)
    M = verdict.M
    return FamilyBounds(verdict, M, 1 / M.tail_max, up.space.rho_star(), lo.space.rho_lower(), up, lo)


def R_star_estimate(E: DistanceSet, window: TailWindow = TailWindow(), **kw) -> LimitEstimate:
    return family_bounds(E, window, **kw).R_star


def R_lower_estimate(E: DistanceSet, window: TailWindow = TailWindow(), **kw):
    return family_bounds(E, window, **kw).R_lower


@dataclass
class SelfSimilarityReport:
    samples: list
    products: list
    consistent: bool

    def to_json(self) -> dict:
        return {
            "samples": [encode_scalar(t) for t in self.samples],
            "products": [encode_scalar(p) for p in self.products],
            "consistent": self.consistent,
        }


def weak_self_similarity_probe(
    E: DistanceSet, samples: Sequence, window: TailWindow = TailWindow(), tol: Q = Q(1, 2**10)
) -> SelfSimilarityReport:
    """For each t in E: (1/t)E contains 1, and R* * R_* of the rescaled set is 1."""
    products = []
    for t in samples:
        t = Q(t)
        if t <= 0 or not E.contains(t):
            raise PreconditionError(f"{format_scalar(t)} is not a positive element of E")
        scaled = scale_set(E, 1 / t)
        if not scaled.contains(1):
            raise AssertionError("rescaled set lost the unit distance")
        fb = family_bounds(scaled, window)
        if not fb.bounded:
            products.append(INF)
        else:
            products.append(fb.rho_star_upper * fb.rho_lower_lower)
    ok = all(p != INF and abs(p - 1) <= tol for p in products)
    return SelfSimilarityReport([Q(t) for t in samples], products, ok)
