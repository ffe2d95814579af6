"""Strong porosity along test sequences, universal gap sequences and CSP.

A test sequence tau is a decreasing sequence of elements of E tending to 0.
E is tau-strongly porous when some sequence of maximal gaps (a_n, b_n),
with (b_n - a_n)/b_n -> 1, has left endpoints comparable to tau_n.  E is
completely strongly porous (CSP) when this holds for every test sequence.
All endpoint arithmetic is exact; only the three limit clauses (a_n -> 0,
relative gap length -> 1, bounded a_n/tau_n) are judged on a window.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

from .distance_sets import (
    ELEMENT_CAP,
    DistanceSet,
    GapComponent,
    GapKind,
    Members,
    porosity_profile,
)
from .exact import (
    still_rising,
    Q,
    DEFAULT_RATIO_TOL,
    DEFAULT_TOL,
    INF,
    ConfigurationError,
    Inconclusive,
    LimitEstimate,
    PreconditionError,
    ResourceError,
    TailWindow,
    VacuousError,
    encode_scalar,
    estimate,
    format_scalar,
    growth_certificate,
)
from .sequences import (
    Merged,
    ScalingSequence,
    SequenceSpec,
    Subsequence,
    describe,
    evaluate,
    is_spec,
    terms,
)

DEFAULT_SEARCH_CAP = Q(2**10)
DEFAULT_THETA = Q(2)
K_MARGIN = Q(1, 2**10)
MIN_WINDOW = 8

SeqLike = Union[SequenceSpec, Callable[[int], Q]]


def window_values(seq: SeqLike, window: TailWindow) -> list[Q]:
    if isinstance(seq, ScalingSequence):
        seq = seq.spec
    if is_spec(seq):
        return terms(seq, window.start, window.end)
    return [Q(seq(n)) for n in window.indices()]


# ---------------------------------------------------------------------------
# asymptotic equivalence


@dataclass(frozen=True)
class EquivalenceCertificate:
    """c1 * a_n < gamma_n < c2 * a_n for every n in [valid_from, window end]."""

    c1: Q
    c2: Q
    valid_from: int

    def invert(self) -> "EquivalenceCertificate":
        """Certificate for the swapped pair (gamma, a)."""
        return EquivalenceCertificate(1 / self.c2, 1 / self.c1, self.valid_from)

    def compose(self, other: "EquivalenceCertificate") -> "EquivalenceCertificate":
        """From a ~ b (self) and b ~ c (other) get a ~ c."""
        return EquivalenceCertificate(self.c1 * other.c1, self.c2 * other.c2, max(self.valid_from, other.valid_from))

    def holds(self, a: Sequence[Q], gamma: Sequence[Q], window: TailWindow) -> bool:
        return all(
            self.c1 * x < y < self.c2 * x
            for n, x, y in zip(window.indices(), a, gamma)
            if n >= self.valid_from
        )

    def to_json(self) -> dict:
        return {"c1": encode_scalar(self.c1), "c2": encode_scalar(self.c2), "valid_from": self.valid_from}


@dataclass(frozen=True)
class Refutation:
    clause: str
    detail: str = ""

    def to_json(self) -> dict:
        return {"refuted": self.clause, "detail": self.detail}

    def __bool__(self):
        return False


def asymp_equivalent(a: SeqLike, gamma: SeqLike, window: TailWindow):
    """Certificate that a and gamma are comparable, or a Refutation."""
    if len(window) < MIN_WINDOW:
        raise ConfigurationError(f"window {window} has fewer than {MIN_WINDOW} indices")
    av, gv = window_values(a, window), window_values(gamma, window)
    return _equivalence(av, gv, window)


def _unbounded(idx, values) -> bool:
    # comparability ignores constant factors, so test growth relative to the first value
    return growth_certificate(idx, [v / values[0] for v in values])


def _equivalence(av, gv, window):
    idx = list(window.indices())
    r = [y / x for x, y in zip(av, gv)]
    inv = [1 / v for v in r]
    if _unbounded(idx, r):
        return Refutation("gamma/a unbounded", f"gamma_n/a_n reaches {format_scalar(max(r))}")
    if _unbounded(idx, inv):
        return Refutation("a/gamma unbounded", f"a_n/gamma_n reaches {format_scalar(max(inv))}: no positive c1")
    return EquivalenceCertificate(min(r) / 2, 2 * max(r), window.start)


def domination_criterion(a: SeqLike, gamma: SeqLike, window: TailWindow) -> tuple[bool, str]:
    """One-sided test: gamma_n <= a_n eventually and a_n / gamma_n bounded."""
    av, gv = window_values(a, window), window_values(gamma, window)
    idx = list(window.indices())
    bad = [n for n, x, y in zip(idx, av, gv) if y > x]
    if bad and bad[-1] >= window.midpoint:
        return False, f"gamma_n > a_n at n={bad[-1]}"
    if _unbounded(idx, [y / x for x, y in zip(av, gv)]):
        # gamma_n / a_n is certified to grow, so gamma_n <= a_n fails past the window
        return False, "gamma_n/a_n growing: gamma_n <= a_n fails eventually"
    if _unbounded(idx, [x / y for x, y in zip(av, gv)]):
        return False, "a_n/gamma_n unbounded"
    return True, ""


# ---------------------------------------------------------------------------
# interval sequences


class Outcome(str, enum.Enum):
    ACCEPTED = "accepted"
    REFUTED = "refuted"
    FAILED = "failed"


@dataclass(frozen=True)
class IntervalSequence:
    """Gaps (a_n, b_n) indexed by ``indices``."""

    indices: tuple
    gaps: tuple
    label: str = ""

    @property
    def lefts(self) -> list:
        return [g.a for g in self.gaps]

    @property
    def rights(self) -> list:
        return [g.b for g in self.gaps]

    def at(self, n: int) -> GapComponent:
        return self.gaps[self.indices.index(n)]

    def to_json(self, limit: int | None = None) -> list:
        rows = zip(self.indices, self.gaps)
        if limit is not None:
            rows = itertools.islice(rows, limit)
        return [{"n": n, **g.to_json()} for n, g in rows]


def membership_failure(seq: IntervalSequence, window: TailWindow, ratio_tol: Q = DEFAULT_RATIO_TOL) -> str | None:
    """First unmet clause of the gap-sequence definition on the window, or None.

    Gaps are assumed maximal (they come from exact enumeration)."""
    if len(seq.gaps) < 4:
        return "fewer than 4 gaps"
    a = seq.lefts
    last_rise = max((i + 1 for i in range(len(a) - 1) if a[i + 1] > a[i]), default=0)
    if last_rise > len(a) // 2:
        return f"left endpoints increase at n={seq.indices[last_rise]}"
    if not a[-1] < a[last_rise]:
        return "left endpoints do not tend to 0"
    second = seq.gaps[len(seq.gaps) // 2 :]
    worst = min(second, key=lambda g: g.relative_length)
    if worst.relative_length < 1 - ratio_tol:
        n = seq.indices[seq.gaps.index(worst)]
        return f"relative gap length {format_scalar(worst.relative_length)} at n={n} does not tend to 1"
    return None


@dataclass
class WitnessSearch:
    """Result of searching a gap sequence comparable to tau."""

    outcome: Outcome
    label: str
    sequence: IntervalSequence | None = None
    c_tau: LimitEstimate | None = None
    valid_from: int | None = None
    reason: str = ""
    diagnostics: list = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return self.outcome is Outcome.ACCEPTED

    @property
    def C(self):
        """C(tau): the limsup of a_n/tau_n, infinite when no witness exists."""
        return self.c_tau.tail_max if self.accepted else INF

    def to_json(self) -> dict:
        out = {"probe": self.label, "outcome": self.outcome.value, "reason": self.reason}
        out["C_tau"] = encode_scalar(self.C)
        if self.c_tau is not None:
            out["a_over_tau"] = self.c_tau.to_json()
        if self.valid_from is not None:
            out["valid_from"] = self.valid_from
        out["diagnostics"] = self.diagnostics
        return out


def _check_test_sequence(E: DistanceSet, tau: list, members: Members, window: TailWindow) -> None:
    if not E.tails:
        raise VacuousError("0 is isolated in E: there are no decreasing sequences in E tending to 0")
    for n, t in zip(window.indices(), tau):
        if members.index(t) is None:
            raise PreconditionError(f"tau_{n} = {format_scalar(t)} is not an element of E")
    rises = [n for n, (x, y) in zip(window.indices(), zip(tau, tau[1:])) if y > x]
    if rises and rises[-1] >= window.midpoint:
        raise PreconditionError(f"tau is not eventually decreasing (tau_{rises[-1] + 1} > tau_{rises[-1]})")
    if not tau[-1] < tau[0]:
        raise PreconditionError("tau does not tend to 0 on the window")


def find_interval_sequence(
    E: DistanceSet,
    tau: SeqLike,
    window: TailWindow = TailWindow(),
    search_cap: Q = DEFAULT_SEARCH_CAP,
    *,
    ratio_tol: Q = DEFAULT_RATIO_TOL,
    cap: int = ELEMENT_CAP,
    label: str = "tau",
    members: Members | None = None,
) -> WitnessSearch:
    """For each n pick the gap (a, b) with a in E and tau_n <= a <= C_max*tau_n
    maximising b/a, then judge the resulting sequence.

    REFUTED means a_n/tau_n is certified unbounded, FAILED means some other
    clause was not met at this horizon.
    """
    tv = window_values(tau, window)
    if members is None:
        if not E.tails:
            raise VacuousError("0 is isolated in E: there are no decreasing sequences in E tending to 0")
        members = E.materialize(min(tv), cap)
    _check_test_sequence(E, tv, members, window)

    idx, chosen, diags = [], [], []
    missing = None
    for n, t in zip(window.indices(), tv):
        best = None
        for a in members.between(t, search_cap * t):
            b = members.successor(a)
            if b is None:
                continue  # the unbounded top component is not a gap of E near 0
            if best is None or b / a > best.b / best.a:
                best = GapComponent(a, b, GapKind.INTERIOR)
        if best is None:
            missing = n
            diags.append({"n": n, "tau": encode_scalar(t), "gap": None})
            idx.append(n)
            chosen.append(None)
            continue
        diags.append(
            {
                "n": n,
                "tau": encode_scalar(t),
                "a": encode_scalar(best.a),
                "b": encode_scalar(best.b),
                "b_over_a": encode_scalar(best.b / best.a),
                "a_over_tau": encode_scalar(best.a / t),
            }
        )
        idx.append(n)
        chosen.append(best)

    start = 0 if missing is None else idx.index(missing) + 1
    if start > len(idx) // 2:
        return WitnessSearch(
            Outcome.FAILED, label, reason=f"no gap with left endpoint in [tau_n, {format_scalar(search_cap)}*tau_n] at n={missing}",
            diagnostics=diags,
        )
    seq = IntervalSequence(tuple(idx[start:]), tuple(chosen[start:]), label)
    ratios = [g.a / t for g, t in zip(seq.gaps, tv[start:])]
    sub = TailWindow(seq.indices[0], window.end) if seq.indices[0] < window.end else window
    c_tau = estimate(list(seq.indices), ratios, sub)
    if growth_certificate(list(seq.indices), ratios):
        return WitnessSearch(
            Outcome.REFUTED, label, seq, c_tau, seq.indices[0],
            reason=f"a_n/tau_n unbounded (reaches {format_scalar(max(ratios))})", diagnostics=diags,
        )
    failure = membership_failure(seq, window, ratio_tol)
    if failure:
        return WitnessSearch(Outcome.FAILED, label, seq, c_tau, seq.indices[0], reason=failure, diagnostics=diags)
    return WitnessSearch(Outcome.ACCEPTED, label, seq, c_tau, seq.indices[0], diagnostics=diags)


@dataclass(frozen=True)
class PorosityWitness:
    """(k*tau_n, K*tau_n) misses E for every n >= N1[K] in the window."""

    k: Q
    N1: dict
    search: WitnessSearch

    def to_json(self) -> dict:
        return {
            "k": encode_scalar(self.k),
            "N1": {format_scalar(K): n for K, n in self.N1.items()},
            "C_tau": encode_scalar(self.search.C),
        }


def porosity_witness(E: DistanceSet, tau: SeqLike, window: TailWindow = TailWindow(), Ks: Sequence = (), **kw):
    """Constants (k, K, N1(K)) for tau-strong porosity, or the Refutation."""
    search = find_interval_sequence(E, tau, window, **kw)
    if not search.accepted:
        return Refutation(search.outcome.value, search.reason)
    k = search.c_tau.tail_max + K_MARGIN
    tv = window_values(tau, window)
    offset = search.sequence.indices[0] - window.start
    N1 = {}
    for K in Ks:
        K = Q(K)
        if K <= k:
            raise PreconditionError(f"K = {K} must exceed k = {format_scalar(k)}")
        n1 = None
        for n, g, t in zip(reversed(search.sequence.indices), reversed(search.sequence.gaps), reversed(tv[offset:])):
            if K * t <= g.b and g.a <= k * t:
                n1 = n
            else:
                break
        N1[K] = n1
    return PorosityWitness(k, N1, search)


# ---------------------------------------------------------------------------
# universal candidate and M(L)


def universal_candidate(
    E: DistanceSet,
    window: TailWindow = TailWindow(),
    theta: Q = DEFAULT_THETA,
    h0=None,
    floor=None,
    cap: int = ELEMENT_CAP,
    ratio_tol: Q = DEFAULT_RATIO_TOL,
) -> IntervalSequence:
    """Every gap (a, b) of E with b <= h0 and b/a >= theta, highest first.

    Indexed from 1; at least window.end + 1 gaps are listed, and more when
    ``floor`` asks for coverage further down.
    """
    if not E.tails:
        raise VacuousError("0 is isolated in E")
    if h0 is None:
        below_one = next((x for x in E.iter_desc(Q(1)) if x < 1), None)
        h0 = below_one
    need = window.end + 1
    gaps = []
    prev = None
    seen = 0
    for x in E.iter_desc(h0):
        seen += 1
        if seen > cap:
            raise Inconclusive(
                "universal candidate",
                f"only {len(gaps)} gaps with b/a >= {format_scalar(theta)} among {cap} elements",
            )
        if prev is not None and prev / x >= theta:
            gaps.append(GapComponent(x, prev, GapKind.INTERIOR))
            if len(gaps) >= need and (floor is None or x <= floor):
                break
        prev = x
    L = IntervalSequence(tuple(range(1, len(gaps) + 1)), tuple(gaps), "L")
    failure = membership_failure(
        IntervalSequence(L.indices[window.start - 1 : need], L.gaps[window.start - 1 : need]), window, ratio_tol
    )
    if failure:
        raise Inconclusive("universal candidate", failure)
    return L


def is_universal(L: IntervalSequence, candidates: Sequence[IntervalSequence]) -> tuple[bool, dict | None]:
    """Every candidate's left endpoints are eventually left endpoints of L.

    "Eventually" means from an index no later than the middle of the
    candidate's indices.  Returns the first offending candidate otherwise.
    """
    lefts = set(L.lefts)
    low = L.lefts[-1]
    for B in candidates:
        outside = [i for i, a in enumerate(B.lefts) if a >= low and a not in lefts]
        short = B.lefts[-1] < low
        if short:
            return False, {"candidate": B.label, "detail": "L does not reach the candidate's smallest endpoint"}
        if outside and outside[-1] >= len(B.lefts) // 2:
            i = outside[-1]
            return False, {"candidate": B.label, "n": B.indices[i], "gap": B.gaps[i].to_json()}
    return True, None


def M_of_L(L: IntervalSequence, window: TailWindow = TailWindow(), tol: Q = DEFAULT_TOL) -> LimitEstimate:
    """Window statistics of l_n / m_{n+1}."""
    idx, vals = [], []
    for n in window.indices():
        if n < len(L.gaps):
            idx.append(n)
            vals.append(L.gaps[n - 1].a / L.gaps[n].b)
    return estimate(idx, vals, window, tol=tol)


def C_E_estimate(E: DistanceSet, family: Sequence[SeqLike], window: TailWindow = TailWindow(), tol=DEFAULT_TOL, **kw) -> dict:
    """sup of C(tau) over ``family`` next to M(L) of the universal candidate."""
    if not E.tails:
        return {"vacuous": True, "C_E": None, "M": None, "agree": True}
    if not family:
        raise PreconditionError("empty test-sequence family")
    searches = [find_interval_sequence(E, t, window, label=f"tau[{i}]", **kw) for i, t in enumerate(family)]
    c = max((s.C for s in searches), key=lambda v: v)
    try:
        M = M_of_L(universal_candidate(E, window), window, tol)
    except Inconclusive:
        M = None
    agree = M is not None and c != INF and M.finite and abs(c - M.tail_max) <= tol * max(1, M.tail_max)
    return {"vacuous": False, "C_E": c, "M": M, "agree": agree, "searches": searches}


# ---------------------------------------------------------------------------
# complete strong porosity


class CSPKind(str, enum.Enum):
    CSP = "CSP"
    NOT_CSP = "NotCSP"
    VACUOUS = "Vacuous"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class CSPVerdict:
    kind: CSPKind
    M: LimitEstimate | None = None
    refuting: WitnessSearch | None = None
    criterion: str = ""
    porosity: LimitEstimate | None = None
    universal: IntervalSequence | None = None
    probes: list = field(default_factory=list)
    probe_specs: dict = field(default_factory=dict)

    def __str__(self) -> str:
        if self.kind is CSPKind.CSP:
            return f"CSP(M={format_scalar(self.M.tail_max)})"
        if self.kind is CSPKind.NOT_CSP:
            if self.refuting is None:
                return f"NotCSP({self.criterion})"
            return f"NotCSP({self.refuting.label}: {self.criterion})"
        if self.kind is CSPKind.INCONCLUSIVE:
            return f"Inconclusive({self.criterion})"
        return "Vacuous"

    def to_json(self, gap_limit: int = 16) -> dict:
        out = {"verdict": self.kind.value, "criterion": self.criterion}
        if self.M is not None:
            out["M"] = self.M.to_json()
        if self.porosity is not None:
            out["porosity"] = self.porosity.to_json()
        if self.refuting is not None:
            out["refuting"] = self.refuting.label
            spec = self.probe_specs.get(self.refuting.label)
            if spec is not None:
                out["refuting_sequence"] = describe(spec)
        if self.universal is not None:
            out["universal_head"] = self.universal.to_json(gap_limit)
        out["probes"] = [p.to_json() for p in self.probes]
        return out


def probe_battery(E: DistanceSet) -> dict:
    """Test sequences tried by :func:`csp_verdict`: each tail, its even-index
    subsequence, and the merge of every pair of tails."""
    out = {}
    for i, t in enumerate(E.tails):
        out[f"tail[{i}]"] = t
    for i, t in enumerate(E.tails):
        out[f"tail[{i}][2n]"] = Subsequence("2*n", t)
    for i, j in itertools.combinations(range(len(E.tails)), 2):
        out[f"merge[{i},{j}]"] = Merged((E.tails[i], E.tails[j]))
    return out


def csp_verdict(
    E: DistanceSet,
    window: TailWindow = TailWindow(),
    *,
    tol: Q = DEFAULT_TOL,
    ratio_tol: Q = DEFAULT_RATIO_TOL,
    search_cap: Q = DEFAULT_SEARCH_CAP,
    theta: Q = DEFAULT_THETA,
    cap: int = ELEMENT_CAP,
) -> CSPVerdict:
    if not E.tails:
        return CSPVerdict(CSPKind.VACUOUS, criterion="0 is isolated in E")
    if len(window) < MIN_WINDOW:
        return CSPVerdict(CSPKind.INCONCLUSIVE, criterion=f"window {window} has fewer than {MIN_WINDOW} indices")
    try:
        prof = porosity_profile(E, window, cap=cap, tol=tol)
    except ResourceError as exc:
        return CSPVerdict(CSPKind.INCONCLUSIVE, criterion=f"porosity: {exc}")
    p = prof.estimate
    if p.tail_max < 1 - ratio_tol:
        if still_rising(prof.indices, prof.lower, tol):
            return CSPVerdict(
                CSPKind.INCONCLUSIVE,
                criterion=f"porosity profile still rising at the window end (reaches {format_scalar(p.tail_max)})",
                porosity=p,
            )
        return CSPVerdict(
            CSPKind.NOT_CSP, criterion=f"not strongly porous (p+ <= {format_scalar(p.tail_max)})", porosity=p
        )
    specs = probe_battery(E)
    probes: list[WitnessSearch] = []
    try:
        members = E.materialize(min(evaluate(s, window.end) for s in specs.values()), cap)
    except ResourceError as exc:
        return CSPVerdict(CSPKind.INCONCLUSIVE, criterion=f"probe range: {exc}", porosity=p, probe_specs=specs)
    for name, spec in specs.items():
        try:
            probes.append(
                find_interval_sequence(
                    E, spec, window, search_cap, ratio_tol=ratio_tol, cap=cap, label=name, members=members
                )
            )
        except ResourceError as exc:
            return CSPVerdict(CSPKind.INCONCLUSIVE, criterion=f"{name}: {exc}", porosity=p, probes=probes, probe_specs=specs)
    verdict = CSPVerdict(CSPKind.INCONCLUSIVE, porosity=p, probes=probes, probe_specs=specs)
    for s in probes:
        if s.outcome is Outcome.REFUTED:
            verdict.kind, verdict.refuting, verdict.criterion = CSPKind.NOT_CSP, s, s.reason
            return verdict
    for s in probes:
        if s.outcome is Outcome.FAILED:
            verdict.criterion = f"{s.label}: {s.reason}"
            return verdict
    floor = min(s.sequence.lefts[-1] for s in probes)
    try:
        L = universal_candidate(E, window, theta, floor=floor, cap=cap, ratio_tol=ratio_tol)
    except (Inconclusive, ResourceError) as exc:
        verdict.criterion = f"universal candidate: {getattr(exc, 'detail', None) or exc}"
        return verdict
    verdict.universal = L
    M = M_of_L(L, window, tol)
    verdict.M = M
    if not M.finite:
        verdict.criterion = "M(L) unbounded on the window"
        return verdict
    ok, bad = is_universal(L, [s.sequence for s in probes])
    if not ok:
        verdict.criterion = f"candidate is not universal for {bad['candidate']}"
        return verdict
    verdict.kind = CSPKind.CSP
    return verdict


# ---------------------------------------------------------------------------
# normal scaling sequences


@dataclass(frozen=True)
class NormalityCheck:
    normal: bool
    decreasing_from: int | None
    witness: tuple = field(default=(), repr=False)
    worst: Q | None = None
    reason: str = ""

    def __bool__(self):
        return self.normal

    def to_json(self) -> dict:
        out = {"normal": self.normal, "decreasing_from": self.decreasing_from, "reason": self.reason}
        if self.worst is not None:
            out["max_deviation"] = encode_scalar(self.worst)
        return out


def is_normal_scaling(
    E: DistanceSet,
    r: SeqLike,
    window: TailWindow = TailWindow(),
    ratio_tol: Q = DEFAULT_RATIO_TOL,
    cap: int = ELEMENT_CAP,
) -> NormalityCheck:
    """r is eventually decreasing and the nearest elements tau_n of E satisfy
    tau_n / r_n -> 1 (judged on the second half of the window)."""
    rv = window_values(r, window)
    start = None
    for i in range(len(rv) - 1, 0, -1):
        if rv[i] < rv[i - 1]:
            start = window.start + i - 1
        else:
            break
    if start is None or start > window.midpoint:
        return NormalityCheck(False, start, reason="not eventually decreasing on the window")
    if not E.tails:
        return NormalityCheck(False, start, reason="0 is isolated in E")
    members = E.materialize(min(rv), cap)
    tau = tuple(members.nearest(x) for x in rv)
    half = len(rv) // 2
    worst = max(abs(t / x - 1) for t, x in zip(tau[half:], rv[half:]))
    if worst > ratio_tol:
        return NormalityCheck(False, start, tau, worst, reason=f"nearest-element ratio deviates from 1 by {format_scalar(worst)}")
    return NormalityCheck(True, start, tau, worst)
