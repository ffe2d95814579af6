"""Metric derivatives of maps between pointed line sets.

A map g with g(p1) = p2 pushes a sequence x_n forward to g(x_n).  It is
differentiable with respect to the scalings r1, r2 when every pushed
sequence is stable against the target family and zero-distance pairs stay
at distance zero; the induced map on classes is the metric derivative.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .distance_sets import DistanceSet, scale_set
from .exact import (
    DEFAULT_TOL,
    INF,
    Q,
    PreconditionError,
    SpecError,
    TailWindow,
    Verdict,
    as_scalar,
    encode_scalar,
    estimate,
    format_scalar,
)
from .porosity import CSPKind, csp_verdict
from .pretangent import (
    MARKED,
    LineSet,
    PointSequence,
    PretangentSpace,
    _ratios,
    _scaling_values,
    build_pretangent,
    extremal_space,
)
from .sequences import Expr

# ---------------------------------------------------------------------------
# maps


@dataclass(frozen=True)
class Piece:
    """Rule ``expr`` applied on [lo, hi) or on the elements of ``member_of``."""

    expr: Expr
    lo: Q | None = None
    hi: Q | None = None
    member_of: DistanceSet | None = None

    def __post_init__(self):
        if isinstance(self.expr, str):
            object.__setattr__(self, "expr", Expr(self.expr, var="x"))
        if self.member_of is None and (self.lo is None or self.hi is None):
            raise SpecError("a piece needs an interval [lo, hi) or a member_of set")

    def applies(self, x: Q) -> bool:
        if self.member_of is not None:
            return x != 0 and self.member_of.contains(x)
        return self.lo <= x < self.hi


@dataclass(frozen=True)
class MapSpec:
    """Piecewise rational map on the line; the first matching piece wins."""

    default: Expr | Callable = "x"
    pieces: tuple = ()
    name: str = ""

    def __post_init__(self):
        if isinstance(self.default, str):
            object.__setattr__(self, "default", Expr(self.default, var="x"))
        object.__setattr__(self, "pieces", tuple(self.pieces))
        if self(Q(0)) != 0:
            raise SpecError(f"map {self.label} must send the marked point 0 to 0")

    def __call__(self, x) -> Q:
        x = Q(x)
        for piece in self.pieces:
            if piece.applies(x):
                return piece.expr(x)
        return Q(self.default(x))

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        base = self.default.text if isinstance(self.default, Expr) else getattr(self.default, "__name__", "g")
        return base if not self.pieces else f"piecewise({base})"

    @classmethod
    def dilation(cls, c) -> "MapSpec":
        c = as_scalar(c, positive=True)
        return cls(Expr(f"{c.numerator}*x/{c.denominator}", var="x"), name=f"x -> {format_scalar(c)}x")

    @classmethod
    def identity(cls) -> "MapSpec":
        return cls(Expr("x", var="x"), name="identity")

    @classmethod
    def constant(cls) -> "MapSpec":
        return cls(Expr("0*x", var="x"), name="constant")


@dataclass(frozen=True)
class _Image:
    """n -> g(x_n) for a non-marked point sequence."""

    g: MapSpec
    seq: PointSequence

    def __call__(self, n: int) -> Q:
        return self.g(self.seq.values(None, [n])[0])

    @property
    def __name__(self):
        return f"{self.g.label}({self.seq.id})"


def pushforward(g: MapSpec, seq: PointSequence) -> PointSequence:
    """The sequence g(x_n); the marked sequence maps to the marked sequence."""
    if seq.is_marked:
        return seq
    return PointSequence(image_id(seq.id), _Image(g, seq))


def image_id(seq_id: str) -> str:
    return seq_id if seq_id == MARKED else f"f({seq_id})"


@dataclass(frozen=True)
class _Table:
    values: tuple
    name: str

    def __call__(self, n: int):
        return self.values[n - 1]

    @property
    def __name__(self):
        return self.name


# ---------------------------------------------------------------------------
# differentiability


@dataclass
class DifferentiabilityVerdict:
    differentiable: bool
    reason: str = ""
    pair: tuple | None = None
    source: PretangentSpace | None = None
    target: PretangentSpace | None = None

    def __bool__(self):
        return self.differentiable

    def to_json(self) -> dict:
        return {"differentiable": self.differentiable, "reason": self.reason, "pair": list(self.pair) if self.pair else None}


def check_differentiable(
    g: MapSpec,
    space1,
    seeds1: Sequence[PointSequence],
    r1,
    window: TailWindow = TailWindow(),
    *,
    space2=None,
    seeds2: Sequence[PointSequence] = (),
    r2=None,
    tol: Q = DEFAULT_TOL,
    source: PretangentSpace | None = None,
) -> DifferentiabilityVerdict:
    """Differentiability of g at the marked point, on the source's kept indices.

    (i) every pushed sequence g(x_n) is stable against the target family
        (pushed sequences, ``seeds2`` and the marked sequence) w.r.t. r2;
    (ii) sequences at distance 0 in the source are pushed to sequences at
        distance 0 from each other.
    The full sequence is used; no further refinement happens on the target.
    """
    r2 = r1 if r2 is None else r2
    space2 = space1 if space2 is None else space2
    omega1 = source if source is not None else build_pretangent(space1, seeds1, r1, window, tol=tol)
    idx = list(omega1.indices)
    k = len(idx)
    in_space = {m for c in omega1.classes for m in c}
    admitted = [s for s in seeds1 if not s.is_marked and s.id in in_space]

    family = []
    for s in admitted:
        vals = tuple(g(v) for v in s.values(space1, idx))
        family.append(PointSequence(image_id(s.id), _Table(vals, f"{g.label}({s.id})")))
    pushed_ids = {s.id for s in family}
    for s in seeds2:
        if not s.is_marked:
            family.append(PointSequence(s.id, _Table(tuple(s.values(space2, idx)), s.id)))
    r_table = _Table(tuple(_scaling_values(r2, idx)), "r2")
    kw = TailWindow(1, k)
    ones = list(range(1, k + 1))

    values = {MARKED: [space2.marked] * k}
    for s in family:
        values[s.id] = s.values(space2, ones)
        if s.id in pushed_ids:
            inside = space2.contains_all(values[s.id])
            bad = next((v for v, ok in zip(values[s.id], inside) if not ok), None)
            if bad is not None:
                return DifferentiabilityVerdict(False, f"{s.id} leaves the target space at {format_scalar(bad)}", (s.id,), omega1)
    rs = list(r_table.values)
    ids = list(values)
    est = {}
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            if a not in pushed_ids and b not in pushed_ids:
                continue
            e = estimate(ones, _ratios(space2, values[a], values[b], rs), kw, tol=tol)
            est[(a, b)] = est[(b, a)] = e
            if e.verdict is not Verdict.CONVERGES:
                return DifferentiabilityVerdict(False, f"{a} and {b} are not mutually stable ({e})", (a, b), omega1)
    for cls in omega1.classes:
        images = [image_id(m) for m in cls if m == MARKED or m in {s.id for s in admitted}]
        for i, a in enumerate(images):
            for b in images[i + 1 :]:
                if est[(a, b)].tail_max > tol:
                    return DifferentiabilityVerdict(
                        False, f"{a} and {b} come from one class but are {est[(a, b)]} apart", (a, b), omega1
                    )
    omega2 = build_pretangent(space2, family, r_table, kw, tol=tol, refine=False, check_points=False, normal=False)
    return DifferentiabilityVerdict(True, "", None, omega1, omega2)


@dataclass
class DerivativeMap:
    source: PretangentSpace
    target: PretangentSpace
    class_map: dict
    map_label: str = ""
    consistent: bool = True

    def to_json(self) -> dict:
        return {
            "map": self.map_label,
            "class_map": {str(k): v for k, v in self.class_map.items()},
            "consistent": self.consistent,
            "source_classes": [list(c) for c in self.source.classes],
            "target_classes": [list(c) for c in self.target.classes],
        }


def metric_derivative(g: MapSpec, space1, seeds1, r1, window: TailWindow = TailWindow(), **kw) -> DerivativeMap:
    """Induced map on classes, re-checked on every representative."""
    verdict = check_differentiable(g, space1, seeds1, r1, window, **kw)
    if not verdict:
        raise PreconditionError(f"{g.label} is not differentiable: {verdict.reason}")
    src, tgt = verdict.source, verdict.target
    mapping, consistent = {}, True
    for i, cls in enumerate(src.classes):
        images = set()
        for m in cls:
            try:
                images.add(tgt.class_of(image_id(m)))
            except KeyError:
                consistent = False
        if len(images) != 1:
            consistent = False
        mapping[i] = min(images) if images else None
    return DerivativeMap(src, tgt, mapping, g.label, consistent)


def local_constancy_radius(space: PretangentSpace, class_map, base: int | None = None):
    """inf of dist(base, d) over classes d with a different image; inf for
    constant maps."""
    base = space.marked if base is None else base
    image = class_map[base] if not callable(class_map) else class_map(base)
    radius = INF
    for i in range(len(space)):
        other = class_map[i] if not callable(class_map) else class_map(i)
        if other != image and space.dist[base][i] < radius:
            radius = space.dist[base][i]
    return radius


# ---------------------------------------------------------------------------
# audit of the lower bound for local constancy radii


DILATIONS = (Q(1, 2), Q(2), Q(3))


@dataclass
class AuditRow:
    space: str
    map: str
    radius: object
    bound: Q
    passed: bool

    def to_json(self) -> dict:
        return {
            "space": self.space,
            "map": self.map,
            "c_alpha": encode_scalar(self.radius),
            "bound": encode_scalar(self.bound),
            "passed": self.passed,
        }


@dataclass
class LocalConstancyAudit:
    M: Q
    bound: Q
    rows: list
    sharp_radius: Q
    sharp: bool
    sharpness_space: str = "lower"

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows) and self.sharp

    def to_json(self) -> dict:
        return {
            "M": encode_scalar(self.M),
            "bound": encode_scalar(self.bound),
            "rows": [r.to_json() for r in self.rows],
            "sharpness_witness": self.sharpness_space,
            "sharp_radius": encode_scalar(self.sharp_radius),
            "sharp": self.sharp,
            "passed": self.passed,
        }


def local_constancy_audit(
    E: DistanceSet,
    window: TailWindow = TailWindow(),
    tol: Q = Q(1, 2**10),
    dilations: Sequence = DILATIONS,
    verdict=None,
) -> LocalConstancyAudit:
    """Check c_alpha(D*f) >= 1/M over identity and dilation maps on the
    extremal normal pretangent spaces, and that the lower extremal space
    attains c_alpha(id) = rho_* = 1/M."""
    verdict = verdict or csp_verdict(E, window)
    if verdict.kind is not CSPKind.CSP:
        raise PreconditionError(f"the audit needs a CSP set, got {verdict}")
    M = verdict.M.tail_max
    bound = 1 / M
    rows = []
    spaces = {kind: extremal_space(E, window, kind, verdict) for kind in ("upper", "lower")}
    maps = [MapSpec.identity()] + [MapSpec.dilation(c) for c in dilations]
    sharp_radius = None
    for kind, ext in spaces.items():
        omega = ext.space
        seeds = list(ext.seeds)
        line = LineSet(E)
        for g in maps:
            target = line if g.name == "identity" else LineSet(scale_set(E, g(Q(1))))
            d = metric_derivative(g, line, seeds, ext.scaling, omega.window, space2=target, source=omega, tol=tol)
            radius = local_constancy_radius(omega, d.class_map)
            ok = d.consistent and (radius == INF or radius >= bound - tol)
            rows.append(AuditRow(kind, g.label, radius, bound, ok))
            if kind == "lower" and g.name == "identity":
                sharp_radius = radius
    sharp = sharp_radius is not None and sharp_radius != INF and abs(sharp_radius - bound) <= tol
    if sharp_radius is not None and sharp_radius != spaces["lower"].space.rho_lower():
        sharp = False
    return LocalConstancyAudit(M, bound, rows, sharp_radius, sharp)
