"""Static figures written next to the report files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .exact import as_scalar, log2_approx, to_float  # noqa: E402


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    # fixed metadata keeps repeated renders identical
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_gaps(result, path: Path) -> Path:
    comps = result.payload.get("components", [])
    rel = [1 - to_float(as_scalar(c["a"]) / as_scalar(c["b"])) for c in comps]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(range(1, len(rel) + 1), rel, ".", ms=4)
    ax.set_xlabel("gap (highest first)")
    ax.set_ylabel("(b - a) / b")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title("relative lengths of E-free gaps")
    return _save(fig, path)


def plot_porosity(result, path: Path) -> Path:
    samples = result.payload.get("samples", [])
    n = [s["n"] for s in samples]
    r = [to_float(as_scalar(s["ratio"])) for s in samples]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(n, r, "-", lw=1)
    est = result.payload.get("estimate", {})
    if est.get("tail_max", "inf") != "inf":
        ax.axhline(to_float(as_scalar(est["tail_max"])), color="tab:red", ls="--", lw=1, label="limsup estimate")
        ax.legend(loc="lower right")
    ax.set_xlabel("n")
    ax.set_ylabel("lambda(h) / h")
    ax.set_title("porosity profile")
    return _save(fig, path)


def plot_csp(result, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    probes = result.payload.get("probes", [])
    for p in probes:
        diags = p.get("diagnostics", [])
        if not diags:
            continue
        n = [d["n"] for d in diags]
        y = [log2_approx(as_scalar(d["a_over_tau"])) for d in diags]
        # merged probes alternate between tails, so points read better than lines
        ax.plot(n, y, ".", ms=3, label=f"{p['probe']} ({p['outcome']})")
    ax.set_xlabel("n")
    ax.set_ylabel("log2(a_n / tau_n)")
    ax.set_title(f"witness gaps per test sequence: {result.payload.get('verdict', '')}")
    if ax.lines:
        ax.legend(fontsize=7, loc="center left", bbox_to_anchor=(1.01, 0.5))
    return _save(fig, path)


def plot_pretangent(result, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    labels, values = [], []
    for kind in ("upper", "lower"):
        ext = result.payload.get(f"{kind}_extremal")
        if not ext:
            continue
        row = ext["dist"][ext["marked"]]
        for cls, d in zip(ext["classes"], row):
            if d == {"num": "0", "den": "1"}:
                continue
            labels.append(f"{kind}:{'/'.join(cls)}")
            values.append(to_float(as_scalar(d)))
    ax.bar(range(len(values)), values)
    ax.set_xticks(range(len(values)), labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("distance to marked class")
    ax.set_title("extremal pretangent spaces")
    return _save(fig, path)


def plot_audit(result, path: Path) -> Path:
    rows = result.payload.get("rows", [])
    fig, ax = plt.subplots(figsize=(6, 3.5))
    vals = [to_float(as_scalar(r["c_alpha"])) if r["c_alpha"] != "inf" else float("nan") for r in rows]
    ax.bar(range(len(rows)), vals)
    ax.set_xticks(range(len(rows)), [f"{r['space']}:{r['map']}" for r in rows], rotation=40, ha="right", fontsize=7)
    if "bound" in result.payload:
        ax.axhline(to_float(as_scalar(result.payload["bound"])), color="tab:red", ls="--", lw=1, label="1/M")
        ax.legend()
    ax.set_ylabel("c_alpha")
    ax.set_title("local constancy radii of derivatives")
    return _save(fig, path)


PLOTTERS = {
    "gaps": plot_gaps,
    "porosity": plot_porosity,
    "csp": plot_csp,
    "pretangent": plot_pretangent,
    "derivative-audit": plot_audit,
}


def render(report, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for r in report.results:
        if r.status == "ok" and r.name in PLOTTERS:
            written.append(PLOTTERS[r.name](r, out / f"{r.name}.png"))
    return written
