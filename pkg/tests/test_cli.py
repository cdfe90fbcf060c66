from __future__ import annotations

import json
import subprocess
import sys

import numpy as np
import pytest

from gidag.cli import main
from gidag.errors import DataError, MalformedGraphError
from gidag.io import ingest, interventions_from_json, interventions_to_json, parse_edges, write_data_csv
from gidag.simulate import gen_truth


# ---------------------------------------------------------------------------
# ingest and formats

def test_ingest_well_formed(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("context,X1,X2\n1,0.5,1\n2,1.5,-2\n1,3,4\n")
    data, warnings = ingest(p)
    assert data.q == 2 and data.n == [2, 1] and warnings == []
    assert data.blocks[0].tolist() == [[0.5, 1.0], [3.0, 4.0]]


def test_ingest_errors(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("context,X1,X2\n2,0.5,1\n")
    with pytest.raises(DataError, match="context 1"):
        ingest(p)
    p.write_text("context,X1,X2\n1,0.5,x\n")
    with pytest.raises(DataError, match=r"row 2, column 3"):
        ingest(p)
    p.write_text("context,X1,X2\n1,0.5\n")
    with pytest.raises(DataError, match="fields"):
        ingest(p)


def test_ingest_empty_context_warns(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("context,X1\n1,0.5\n3,1\n")
    data, warnings = ingest(p)
    assert data.n == [1, 0, 1]
    assert warnings == ["context 2 has no rows"]


def test_data_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    blocks = [rng.standard_normal((4, 3)), rng.standard_normal((2, 3))]
    write_data_csv(tmp_path / "d.csv", blocks)
    data, _ = ingest(tmp_path / "d.csv")
    assert all(np.array_equal(a, b) for a, b in zip(blocks, data.blocks))


def test_intervention_json_roundtrip():
    for seed in range(50):
        _, I, _ = gen_truth(6, 3, seed)
        assert interventions_from_json(json.loads(json.dumps(interventions_to_json(I)))) == I


def test_parse_edges():
    assert parse_edges("# q 3\n1 2\n\n2 3\n") == (3, [(0, 1), (1, 2)])
    with pytest.raises(MalformedGraphError):
        parse_edges("1 2 3\n")
    with pytest.raises(MalformedGraphError):
        parse_edges("0 1\n")


# ---------------------------------------------------------------------------
# subcommands

def _run(*args):
    return main([str(a) for a in args])


def test_pipeline_smoke(tmp_path):
    d, r = tmp_path / "d", tmp_path / "r"
    assert _run("simulate", "--q", 10, "--k", 2, "--n", 100, "--seed", 7, "--out", d) == 0
    assert (d / "data.csv").exists() and (d / "truth.json").exists()
    assert _run("fit", "--data", d / "data.csv", "--iters", 3000, "--burnin", 1000, "--out", r) == 0
    for name in ("manifest.json", "tallies.json", "ppi_1.csv", "ppi_2.csv", "targets.csv",
                 "mpm_1.edges", "mpm_2.edges", "diff_2.csv", "samples.jsonl"):
        assert (r / name).exists(), name
    m = json.loads((r / "manifest.json").read_text())
    assert {"config", "seed", "software", "inputs", "thresholds", "mpm_acyclic"} <= set(m) | set(m["config"])
    assert m["inputs"]["data"]["sha1"]
    assert _run("score-run", "--truth", d / "truth.json", "--run", r) == 0
    ev = json.loads((r / "eval.json").read_text())
    assert len(ev["shd"]) == 2
    rows = (r / "ppi_1.csv").read_text().splitlines()
    assert len(rows) == 10 and all(len(x.split(",")) == 10 for x in rows)
    assert all(len(v.split(".")[1]) == 6 for v in rows[0].split(","))


def test_fit_deterministic(tmp_path):
    _run("simulate", "--q", 4, "--k", 2, "--n", 60, "--seed", 1, "--out", tmp_path / "d")
    for name in ("a", "b"):
        assert _run("fit", "--data", tmp_path / "d" / "data.csv", "--iters", 1500, "--burnin", 300,
                    "--seed", 4, "--out", tmp_path / name) == 0
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name


def test_summarize_validates_and_detects_tampering(tmp_path, capsys):
    _run("simulate", "--q", 3, "--k", 2, "--n", 40, "--seed", 2, "--out", tmp_path / "d")
    r = tmp_path / "r"
    _run("fit", "--data", tmp_path / "d" / "data.csv", "--iters", 800, "--burnin", 100, "--thin", 1,
         "--chains", 2, "--out", r)
    assert _run("summarize", "--run", r) == 0
    assert "replayed samples" in capsys.readouterr().out
    lines = (r / "samples.jsonl").read_text().splitlines()
    rec = json.loads(lines[0])
    rec["edges"] = [] if rec["edges"] else [[1, 2]]
    (r / "samples.jsonl").write_text("\n".join([json.dumps(rec)] + lines[1:]) + "\n")
    assert _run("summarize", "--run", r) == 2


def test_equiv_command(tmp_path, capsys):
    (tmp_path / "d.edges").write_text("# q 4\n1 2\n1 3\n2 4\n3 4\n")
    (tmp_path / "i1.json").write_text(json.dumps({"K": 2, "contexts": [{"k": 2, "targets": [1, 3], "parents": {"1": [3]}}]}))
    (tmp_path / "i2.json").write_text(json.dumps({"K": 2, "contexts": [{"k": 2, "targets": [1, 3], "parents": {"3": [1]}}]}))
    args = ["equiv", "--dag1", tmp_path / "d.edges", "--int1", tmp_path / "i1.json",
            "--dag2", tmp_path / "d.edges", "--int2", tmp_path / "i2.json"]
    assert _run(*args, "--sequence") == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "EQUIVALENT" and len(out) == 2
    (tmp_path / "i3.json").write_text(json.dumps({"K": 2, "contexts": [{"k": 2, "targets": [1], "parents": {"1": [3]}}]}))
    args[-1] = tmp_path / "i3.json"
    assert _run(*args) == 2  # 1 -> 3 in the DAG makes this intervention cyclic
    (tmp_path / "i4.json").write_text(json.dumps({"K": 2, "contexts": [{"k": 2, "targets": [3], "parents": {}}]}))
    args[-1] = tmp_path / "i4.json"
    capsys.readouterr()
    assert _run(*args) == 0
    assert capsys.readouterr().out.strip() == "NOT_EQUIVALENT"


def test_exact_command(tmp_path, capsys):
    _run("simulate", "--q", 2, "--k", 2, "--n", 50, "--seed", 3, "--out", tmp_path / "d")
    r = tmp_path / "r"
    _run("fit", "--data", tmp_path / "d" / "data.csv", "--iters", 20000, "--burnin", 1000, "--track-states",
         "--no-samples", "--out", r)
    assert _run("exact", "--data", tmp_path / "d" / "data.csv", "--max-q", 3, "--run", r,
                "--out", tmp_path / "exact.json") == 0
    res = json.loads((tmp_path / "exact.json").read_text())
    assert res["n_states"] == 22
    assert abs(sum(s["probability"] for s in res["states"]) - 1) < 1e-12
    assert res["tv_vs_run"] < 0.05
    assert "total variation" in capsys.readouterr().out


def test_exit_codes(tmp_path):
    _run("simulate", "--q", 3, "--k", 2, "--n", 10, "--seed", 0, "--out", tmp_path / "d")
    data = tmp_path / "d" / "data.csv"
    assert _run("fit", "--data", tmp_path / "missing.csv", "--out", tmp_path / "x") == 2
    assert _run("fit", "--data", data, "--out", tmp_path / "x", "--iters", 10, "--burnin", 20) == 1
    (tmp_path / "c.json").write_text('{"wishart_a": 1}')
    assert _run("fit", "--data", data, "--config", tmp_path / "c.json", "--out", tmp_path / "x") == 1
    (tmp_path / "c.json").write_text('{"nope": 1}')
    assert _run("fit", "--data", data, "--config", tmp_path / "c.json", "--out", tmp_path / "x") == 1
    (tmp_path / "bad.csv").write_text("context,X1\n1,abc\n")
    assert _run("fit", "--data", tmp_path / "bad.csv", "--out", tmp_path / "x") == 2
    (tmp_path / "huge.csv").write_text("context,X1,X2\n1,1e200,1\n1,2e200,3\n")
    assert _run("fit", "--data", tmp_path / "huge.csv", "--out", tmp_path / "x") == 3
    with pytest.raises(SystemExit) as e:
        _run("fit", "--bogus")
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        _run("frobnicate")
    assert e.value.code == 1


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "gidag", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("gidag ")
