import csv
import json
from pathlib import Path

import pytest

from porositykit.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(tmp_path, config, *args, name="out"):
    out = tmp_path / name
    code = main(["--config", str(config), "--out", str(out), *args])
    return code, out


def load(out):
    return json.loads((out / "report.json").read_text())["analyses"]


def rows(out, analysis):
    with open(out / "report.csv", newline="") as fh:
        return [r for r in csv.DictReader(fh) if r["analysis"] == analysis]


def write_config(tmp_path, obj):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(obj))
    return path


def test_dyadic_porosity_and_csp(tmp_path):
    code, out = run(tmp_path, CONFIGS / "dyadic.json", "--window", "32:256", "porosity", "csp")
    assert code == 0
    rep = load(out)
    assert set(rep) == {"porosity", "csp"}
    csp = rep["csp"]["result"]
    assert csp["verdict"] == "CSP"
    assert csp["M"]["tail_min"] == csp["M"]["tail_max"] == {"num": "1", "den": "1"}
    assert (out / "porosity.png").exists() and (out / "csp.png").exists()


def test_geometric_porosity_row(tmp_path):
    code, out = run(tmp_path, CONFIGS / "geometric_half.json", "--no-plots", "porosity")
    assert code == 0
    summary = rows(out, "porosity")[-1]
    assert (summary["value"], summary["verdict"]) == ("1/2", "Converges(1/2)")


def test_theorem_rows_for_dyadic_pass(tmp_path):
    code, out = run(tmp_path, CONFIGS / "dyadic.json", "--no-plots", "theorems")
    assert code == 0
    assert all(r["verdict"] == "pass" for r in rows(out, "theorems"))
    by_id = {r["n"]: r for r in rows(out, "theorems")}
    assert by_id["R*=M"]["value"] == by_id["R_*=1/R*"]["value"] == "1"


def test_theorem_rows_for_non_csp_sets(tmp_path):
    code, out = run(tmp_path, CONFIGS / "harmonic.json", "--no-plots", "theorems")
    assert code == 0
    by_id = {r["n"]: r for r in rows(out, "theorems")}
    assert by_id["R*=M"]["value"] == "inf" and by_id["R_*=1/R*"]["value"] == "0"
    code, out = run(tmp_path, CONFIGS / "starred_union.json", "--no-plots", name="union")
    assert code == 0
    details = {r["id"]: r["detail"] for r in load(out)["theorems"]["result"]["rows"]}
    assert "tail[1]" in details["bounded_iff_csp"]


def test_example_config_runs_every_analysis(tmp_path):
    code, out = run(tmp_path, CONFIGS / "cluster_m2.json", "--no-plots")
    assert code == 0
    csp = load(out)["csp"]["result"]
    assert csp["verdict"] == "CSP" and csp["M"]["value"] == {"num": "2", "den": "1"}


def test_explicit_pretangent_seeds(tmp_path):
    code, out = run(tmp_path, CONFIGS / "pretangent_seeds.json", "--no-plots")
    assert code == 0
    assert load(out)["pretangent"]["status"] == "ok"


def test_empty_analyses_is_a_usage_error(tmp_path, capsys):
    cfg = write_config(tmp_path, {"example": "dyadic", "analyses": []})
    assert run(tmp_path, cfg)[0] == 1


def test_unknown_analysis_exits_1(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run(tmp_path, CONFIGS / "dyadic.json", "nonsense")
    assert exc.value.code == 1


def test_schema_error_names_the_field(tmp_path, capsys):
    cfg = write_config(tmp_path, {"example": "dyadic", "tol": 0.5, "analyses": ["csp"]})
    assert run(tmp_path, cfg)[0] == 1
    assert "/tol" in capsys.readouterr().err


def test_short_window_is_inconclusive(tmp_path):
    cfg = write_config(tmp_path, {"example": "factorial", "analyses": ["csp"]})
    code, out = run(tmp_path, cfg, "--window", "8:24", "--no-plots")
    assert code == 2
    assert load(out)["csp"]["status"] == "inconclusive"


def test_reports_are_byte_stable_across_thread_counts(tmp_path, monkeypatch):
    outputs = []
    for i, threads in enumerate(("1", "4")):
        monkeypatch.setenv("ANALYZE_THREADS", threads)
        code, out = run(tmp_path, CONFIGS / "dyadic.json", "--no-plots", "gaps", "porosity", "csp", name=f"o{i}")
        assert code == 0
        outputs.append([(out / f).read_bytes() for f in ("report.json", "report.csv")])
    assert outputs[0] == outputs[1]


def test_bad_thread_count_exits_1(tmp_path, monkeypatch):
    monkeypatch.setenv("ANALYZE_THREADS", "0")
    assert run(tmp_path, CONFIGS / "dyadic.json", "csp")[0] == 1
