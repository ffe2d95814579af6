"""Config-driven analysis runs producing report.json and report.csv."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import jsonschema

from . import __version__
from .catalog import named
from .derivative import local_constancy_audit
from .distance_sets import COMPONENT_CAP, ELEMENT_CAP, DistanceSet, gap_components, porosity_profile
from .exact import (
    DEFAULT_RATIO_TOL,
    DEFAULT_TOL,
    INF,
    ConfigurationError,
    Inconclusive,
    PorosityError,
    PreconditionError,
    Q,
    ResourceError,
    TailWindow,
    as_scalar,
    encode_scalar,
    format_scalar,
    within,
)
from .porosity import CSPKind, csp_verdict
from .pretangent import LineSet, PointSequence, build_pretangent, family_bounds, unbounded_witness
from .sequences import evaluate, spec_from_json

log = logging.getLogger(__name__)

ANALYSES = ("gaps", "porosity", "csp", "pretangent", "theorems", "derivative-audit")
THEOREM_TOL = Q(1, 2**10)
CSV_COLUMNS = ("analysis", "n", "value", "ratio", "verdict")

_SCALAR = {
    "oneOf": [
        {"type": "integer", "minimum": 0},
        {"type": "string", "pattern": r"^\s*[0-9^*./ ]+\s*$"},
        {
            "type": "object",
            "properties": {"num": {"type": "string"}, "den": {"type": "string"}},
            "required": ["num", "den"],
            "additionalProperties": False,
        },
    ]
}
_SPEC = {"type": "object", "required": ["type"], "properties": {"type": {"type": "string"}}}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "analysis config",
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "example": {"type": "string"},
        "set": {
            "type": "object",
            "properties": {
                "tails": {"type": "array", "items": _SPEC},
                "finite_part": {"type": "array", "items": _SCALAR},
                "contains_zero": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "window": {
            "oneOf": [
                {"type": "string", "pattern": r"^\d+:\d+$"},
                {
                    "type": "object",
                    "properties": {"start": {"type": "integer", "minimum": 1}, "end": {"type": "integer", "minimum": 2}},
                    "required": ["start", "end"],
                    "additionalProperties": False,
                },
            ]
        },
        "tol": _SCALAR,
        "ratio_tol": _SCALAR,
        "cap": {"type": "integer", "minimum": 16},
        "h": _SCALAR,
        "analyses": {"type": "array", "items": {"enum": list(ANALYSES)}, "uniqueItems": True},
        "pretangent": {
            "type": "object",
            "properties": {
                "scaling": _SPEC,
                "seeds": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {"id": {"type": "string"}, "sequence": _SPEC},
                        "required": ["id", "sequence"],
                        "additionalProperties": False,
                    },
                },
            },
            "required": ["scaling", "seeds"],
            "additionalProperties": False,
        },
    },
    "oneOf": [{"required": ["set"]}, {"required": ["example"]}],
    "additionalProperties": False,
}


def _pointer(error: jsonschema.ValidationError) -> str:
    return "/" + "/".join(str(p) for p in error.absolute_path)


def validate_config(obj) -> None:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(obj), key=lambda e: (list(e.absolute_path), e.message))
    if errors:
        e = errors[0]
        raise ConfigurationError(f"config field {_pointer(e)}: {e.message}")


@dataclass
class AnalysisConfig:
    E: DistanceSet
    window: TailWindow = TailWindow()
    tol: Q = DEFAULT_TOL
    ratio_tol: Q = DEFAULT_RATIO_TOL
    cap: int = ELEMENT_CAP
    h: Q = Q(1)
    analyses: tuple = ()
    seeds: tuple = ()
    scaling: object = None
    name: str = ""
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def digest(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


def parse_config(obj: dict, *, window: str | None = None, tol: str | None = None, cap: int | None = None,
                 analyses=None) -> AnalysisConfig:
    """Validate ``obj`` and apply command-line overrides."""
    obj = dict(obj)
    if window is not None:
        obj["window"] = window
    if tol is not None:
        obj["tol"] = tol
    if cap is not None:
        obj["cap"] = cap
    if analyses:
        obj["analyses"] = list(analyses)
    validate_config(obj)
    try:
        if "example" in obj:
            E = named(obj["example"])
        else:
            E = DistanceSet.from_json(obj["set"], label=obj.get("name", ""))
        w = obj.get("window", "32:256")
        win = TailWindow.parse(w) if isinstance(w, str) else TailWindow(w["start"], w["end"])
        seeds, scaling = (), None
        if "pretangent" in obj:
            pt = obj["pretangent"]
            scaling = spec_from_json(pt["scaling"])
            seeds = tuple(PointSequence(s["id"], spec_from_json(s["sequence"])) for s in pt["seeds"])
        cfg = AnalysisConfig(
            E,
            win,
            as_scalar(obj.get("tol", DEFAULT_TOL), positive=True),
            as_scalar(obj.get("ratio_tol", DEFAULT_RATIO_TOL), positive=True),
            int(obj.get("cap", ELEMENT_CAP)),
            as_scalar(obj.get("h", 1), positive=True),
            tuple(obj.get("analyses", ())),
            seeds,
            scaling,
            obj.get("name", obj.get("example", "")),
            obj,
        )
    except KeyError as exc:
        raise ConfigurationError(str(exc.args[0])) from exc
    if not cfg.analyses:
        raise ConfigurationError("no analyses requested; choose from " + ", ".join(ANALYSES))
    return cfg


def load_config(path, **overrides) -> AnalysisConfig:
    try:
        obj = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(obj, **overrides)


# ---------------------------------------------------------------------------
# analyses


@dataclass
class AnalysisResult:
    name: str
    status: str  # "ok", "inconclusive" or "error"
    payload: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    message: str = ""
    seconds: float = 0.0

    def to_json(self, timing: bool = False) -> dict:
        out = {"status": self.status, "result": self.payload}
        if self.message:
            out["message"] = self.message
        if timing:
            out["seconds"] = round(self.seconds, 3)
        return out


def _fmt(x) -> str:
    return "" if x is None else format_scalar(x)


class Context:
    """Shared lazily computed results; safe to use from worker threads."""

    def __init__(self, cfg: AnalysisConfig):
        self.cfg = cfg
        self._lock = threading.Lock()
        self._locks: dict[str, threading.Lock] = {}
        self._values: dict[str, object] = {}

    def _get(self, key: str, build: Callable):
        with self._lock:
            lock = self._locks.setdefault(key, threading.Lock())
        with lock:
            if key not in self._values:
                try:
                    self._values[key] = ("ok", build())
                except Exception as exc:  # replayed to every consumer
                    self._values[key] = ("err", exc)
            kind, value = self._values[key]
        if kind == "err":
            raise value
        return value

    def verdict(self):
        c = self.cfg
        return self._get("csp", lambda: csp_verdict(c.E, c.window, tol=c.tol, ratio_tol=c.ratio_tol, cap=c.cap))

    def bounds(self):
        c = self.cfg
        return self._get("bounds", lambda: family_bounds(c.E, c.window, self.verdict(), c.tol))

    def audit(self):
        c = self.cfg
        return self._get("audit", lambda: local_constancy_audit(c.E, c.window, THEOREM_TOL, verdict=self.verdict()))


def _floor(E: DistanceSet, window: TailWindow) -> Q:
    return min(evaluate(t, window.end) for t in E.tails) if E.tails else Q(0)


def run_gaps(ctx: Context) -> AnalysisResult:
    c = ctx.cfg
    floor = _floor(c.E, c.window)
    scan = gap_components(c.E, c.h, floor=floor, cap=min(c.cap, COMPONENT_CAP))
    rows = [(k, str(g), _fmt(g.relative_length), g.kind.value) for k, g in enumerate(scan.components, 1)]
    payload = {
        "h": encode_scalar(c.h),
        "floor": encode_scalar(floor),
        "partial": scan.partial,
        "note": scan.note,
        "components": [g.to_json() for g in scan.components],
    }
    return AnalysisResult("gaps", "ok", payload, rows)


def run_porosity(ctx: Context) -> AnalysisResult:
    c = ctx.cfg
    prof = porosity_profile(c.E, c.window, cap=c.cap, tol=c.tol)
    rows = [(n, _fmt(h), _fmt(r), "") for n, h, r in zip(prof.indices, prof.anchors, prof.ratios)]
    est = prof.estimate
    rows.append(("", _fmt(est.value if est.value is not None else est.tail_max), _fmt(est.tail_max), str(est)))
    return AnalysisResult("porosity", "ok", prof.to_json(), rows)


def run_csp(ctx: Context) -> AnalysisResult:
    v = ctx.verdict()
    rows = []
    for p in v.probes:
        rows.append(("", p.label, _fmt(p.C), p.outcome.value))
    if v.refuting is not None:
        for d in v.refuting.diagnostics:
            rows.append((d["n"], f"tau={format_scalar(as_scalar(d['tau']))}",
                         format_scalar(as_scalar(d["a_over_tau"])), v.refuting.label))
    M = v.M.tail_max if v.M is not None else None
    rows.append(("", str(v), _fmt(M), v.kind.value))
    status = "inconclusive" if v.kind is CSPKind.INCONCLUSIVE else "ok"
    return AnalysisResult("csp", status, v.to_json(), rows, v.criterion if status != "ok" else "")


def run_pretangent(ctx: Context) -> AnalysisResult:
    c = ctx.cfg
    payload, rows = {}, []
    if c.seeds:
        space = build_pretangent(LineSet(c.E), c.seeds, c.scaling, c.window, tol=c.tol)
        payload["space"] = space.to_json()
        for i, cls in enumerate(space.classes):
            rows.append((i, ",".join(cls), _fmt(space.dist[space.marked][i]), "class"))
    fb = ctx.bounds()
    payload["family"] = fb.to_json()
    for kind, ext in (("upper", fb.upper), ("lower", fb.lower)):
        if ext is not None:
            payload[f"{kind}_extremal"] = ext.to_json()
    rows.append(("", "R*", _fmt(fb.R_star.tail_max if fb.R_star else None), "bounded" if fb.bounded else "unbounded"))
    rows.append(("", "R_*", _fmt(fb.R_lower), "discrete" if fb.R_lower not in (None, 0) else "not discrete"))
    return AnalysisResult("pretangent", "ok", payload, rows)


@dataclass
class TheoremRow:
    id: str
    lhs: object
    rhs: object
    tol: Q
    verdict: str
    detail: str = ""

    def to_json(self) -> dict:
        def enc(v):
            return v if isinstance(v, (bool, str)) else encode_scalar(v)

        return {"id": self.id, "lhs": enc(self.lhs), "rhs": enc(self.rhs), "tol": encode_scalar(self.tol),
                "verdict": self.verdict, "detail": self.detail}

    def row(self):
        def show(v):
            return str(v).lower() if isinstance(v, bool) else v if isinstance(v, str) else format_scalar(v)

        return (self.id, show(self.lhs), show(self.rhs), self.verdict)


def _agree(a, b, tol=None) -> str:
    if isinstance(a, bool) or isinstance(b, bool):
        return "pass" if a == b else "fail"
    return "pass" if within(a, b, tol) else "fail"


def theorem_rows(ctx: Context) -> list[TheoremRow]:
    """Consolidated checks linking CSP, M, R*, R_* and the local constancy
    bound on the configured set."""
    c = ctx.cfg
    v = ctx.verdict()
    tol = THEOREM_TOL
    if v.kind is CSPKind.INCONCLUSIVE:
        raise Inconclusive(v.criterion)
    rows = []
    if v.kind is CSPKind.CSP:
        fb = ctx.bounds()
        M = v.M.tail_max
        r_star, r_low = fb.rho_star_upper, fb.rho_lower_lower
        bounded = r_star != INF
        rows.append(TheoremRow("bounded_iff_csp", True, bounded, tol, _agree(True, bounded),
                               "upper extremal space rho* is finite"))
        rows.append(TheoremRow("R*=M", r_star, M, tol, _agree(r_star, M, tol), "rho* of the upper extremal space"))
        rows.append(TheoremRow("R_*=1/R*", r_low, 1 / r_star, tol, _agree(r_low, 1 / r_star, tol),
                               "rho_* of the lower extremal space"))
        rows.append(TheoremRow("R*R_*=1", r_star * r_low, Q(1), tol, _agree(r_star * r_low, Q(1), tol)))
        discrete = r_low > 0
        rows.append(TheoremRow("bounded_iff_discrete", bounded, discrete, tol, _agree(bounded, discrete)))
        audit = ctx.audit()
        worst = min((r.radius for r in audit.rows), default=INF)
        rows.append(TheoremRow("c_alpha_bound", worst, audit.bound, tol,
                               "pass" if all(r.passed for r in audit.rows) else "fail",
                               f"min c_alpha over {len(audit.rows)} derivative maps"))
        rows.append(TheoremRow("c_alpha_sharp", audit.sharp_radius, audit.bound, tol, "pass" if audit.sharp else "fail",
                               "identity on the lower extremal space"))
        return rows
    if v.kind is CSPKind.VACUOUS:
        rows.append(TheoremRow("bounded_iff_csp", "vacuous", "one-point spaces", tol, "pass", v.criterion))
        return rows
    # not CSP: the family of normal pretangent spaces is unbounded
    who = v.refuting.label if v.refuting is not None else v.criterion
    detail = f"refuting test sequence {who}"
    evidence = "unbounded"
    if c.E.tails:
        t = Q(10)
        try:
            w = unbounded_witness(c.E, t, c.window)
            if w.normal and w.rho_star() == t:
                detail += f"; normal space with a point at distance {format_scalar(t)}"
        except (PorosityError, ResourceError) as exc:
            log.debug("no direct unbounded witness: %s", exc)
    rows.append(TheoremRow("bounded_iff_csp", False, False, tol, "pass", detail))
    rows.append(TheoremRow("R*=M", INF, INF, tol, "pass", "no universal gap sequence; R* = inf"))
    rows.append(TheoremRow("R_*=1/R*", Q(0), Q(0), tol, "pass", "R_* = 0"))
    rows.append(TheoremRow("bounded_iff_discrete", False, False, tol, "pass", evidence))
    rows.append(TheoremRow("c_alpha_bound", "n/a", "n/a", tol, "skip", "needs a CSP set"))
    return rows


def run_theorems(ctx: Context) -> AnalysisResult:
    rows = theorem_rows(ctx)
    status = "ok"
    payload = {"verdict": str(ctx.verdict()), "rows": [r.to_json() for r in rows],
               "all_pass": all(r.verdict in ("pass", "skip") for r in rows)}
    return AnalysisResult("theorems", status, payload, [r.row() for r in rows])


def run_audit(ctx: Context) -> AnalysisResult:
    a = ctx.audit()
    rows = [(f"{r.space}:{r.map}", _fmt(r.radius), _fmt(r.bound), "pass" if r.passed else "fail") for r in a.rows]
    rows.append(("sharpness", _fmt(a.sharp_radius), _fmt(a.bound), "pass" if a.sharp else "fail"))
    return AnalysisResult("derivative-audit", "ok", a.to_json(), rows)


RUNNERS: dict[str, Callable[[Context], AnalysisResult]] = {
    "gaps": run_gaps,
    "porosity": run_porosity,
    "csp": run_csp,
    "pretangent": run_pretangent,
    "theorems": run_theorems,
    "derivative-audit": run_audit,
}


def _run_one(name: str, ctx: Context) -> AnalysisResult:
    t0 = time.perf_counter()
    try:
        res = RUNNERS[name](ctx)
    except Inconclusive as exc:
        res = AnalysisResult(name, "inconclusive", {"criterion": exc.criterion, "detail": str(exc.detail)},
                             [("", "", "", "inconclusive")], exc.criterion)
    except (PreconditionError, ConfigurationError, ResourceError, PorosityError) as exc:
        res = AnalysisResult(name, "error", {"error": type(exc).__name__}, [("", "", "", "error")], str(exc))
    res.seconds = time.perf_counter() - t0
    return res


def thread_count() -> int:
    raw = os.environ.get("ANALYZE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"ANALYZE_THREADS must be an integer >= 1, got {raw!r}") from None
    if n < 1:
        raise ConfigurationError(f"ANALYZE_THREADS must be an integer >= 1, got {raw!r}")
    return n


@dataclass
class Report:
    config: AnalysisConfig
    results: list

    @property
    def exit_code(self) -> int:
        statuses = {r.status for r in self.results}
        if "error" in statuses:
            return 1
        if "inconclusive" in statuses:
            return 2
        return 0

    def to_json(self, timing: bool = False) -> dict:
        c = self.config
        out = {
            "provenance": {
                "version": __version__,
                "config_sha256": c.digest,
                "set": c.E.describe(),
                "window": str(c.window),
                "tol": encode_scalar(c.tol),
                "ratio_tol": encode_scalar(c.ratio_tol),
                "cap": c.cap,
            },
            "analyses": {r.name: r.to_json(timing) for r in self.results},
            "exit_code": self.exit_code,
        }
        if timing:
            out["provenance"]["seconds"] = round(sum(r.seconds for r in self.results), 3)
        return out

    def json_text(self, timing: bool = False) -> str:
        return json.dumps(self.to_json(timing), indent=2, sort_keys=True) + "\n"

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.results:
            for row in r.rows:
                w.writerow((r.name, *row))
        return buf.getvalue()

    def table(self) -> str:
        lines = []
        for r in self.results:
            summary = {
                "gaps": lambda: f"{len(r.payload.get('components', []))} components",
                "porosity": lambda: f"p+ {r.rows[-1][3]}" if r.rows else "",
                "csp": lambda: r.rows[-1][1] if r.rows else "",
                "pretangent": lambda: "; ".join(f"{row[1]} = {row[2]}" for row in r.rows[-2:]),
                "theorems": lambda: ", ".join(f"{row[0]}:{row[3]}" for row in r.rows),
                "derivative-audit": lambda: "passed" if r.payload.get("passed") else "failed",
            }
            text = summary[r.name]() if r.status == "ok" else r.message
            lines.append(f"{r.name:<17} {r.status:<12} {text}")
        return "\n".join(lines)


def run(cfg: AnalysisConfig, threads: int | None = None) -> Report:
    threads = threads or thread_count()
    ctx = Context(cfg)
    names = list(cfg.analyses)
    if threads == 1 or len(names) == 1:
        results = [_run_one(n, ctx) for n in names]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda n: _run_one(n, ctx), names))
    return Report(cfg, results)


def write_report(report: Report, out_dir, timing: bool = False) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"json": out / "report.json", "csv": out / "report.csv"}
    paths["json"].write_text(report.json_text(timing))
    paths["csv"].write_text(report.csv_text())
    return paths


def with_overrides(cfg: AnalysisConfig, **kw) -> AnalysisConfig:
    return replace(cfg, **kw)
