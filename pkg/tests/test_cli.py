import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from cgqn import problems
from cgqn.cli import SWEEP_COLUMNS, main

REF = str(Path(__file__).parent / "data" / "ref.json")


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_verify_reference_bfgs(capsys):
    code, out, _ = run(["verify", "--problem", REF, "--phi", "bfgs", "--mode", "rational"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["report"]["verdict"] == "pass"
    assert [it["delta"] for it in rep["report"]["iterations"]] == ["1/1", "1/1"]
    assert rep["config"]["phi"] == "bfgs" and rep["problem"]["n"] == 2


def test_verify_sr1_trap(capsys):
    code, out, _ = run(["verify", "--spec", "sr1-trap:n=2", "--phi", "sr1", "--mode", "rational"],
                       capsys)
    assert code == 0
    (event,) = json.loads(out)["report"]["events"]
    assert event["kind"] == "SR1Undefined" and event["k"] == 1 and event["predicted"]


def test_verify_degenerate_constant(capsys):
    code, out, _ = run(["verify", "--problem", REF, "--phi", "const:-20.25", "--mode", "rational"],
                       capsys)
    assert code == 0
    (event,) = json.loads(out)["report"]["events"]
    assert event["kind"] == "DegeneratePhi" and event["k"] == 1 and event["predicted"]


def test_verify_float_failure_exits_one(capsys):
    code, out, _ = run(["verify", "--spec", "hilbert-like:n=10", "--phi", "bfgs", "--mode",
                        "float", "--rtol", "1e-14"], capsys)
    assert code == 1 and json.loads(out)["report"]["verdict"] == "fail"


def test_generate_and_run(tmp_path, capsys):
    path = tmp_path / "trap.json"
    assert main(["generate", "--spec", "sr1-trap:n=2", "--out", str(path)]) == 0
    assert problems.load(path).H.tolist() == problems.generate(
        problems.parse_spec("sr1-trap:n=2")).H.tolist()
    code, out, _ = run(["run", "--problem", str(path), "--method", "qn", "--phi", "sr1"], capsys)
    assert code == 1
    assert json.loads(out)["breakdown"]["kind"] == "SR1Undefined"
    code, out, _ = run(["run", "--problem", REF, "--method", "cg"], capsys)
    assert code == 0
    trace = json.loads(out)["trace"]
    assert trace["x_final"] == ["1/1", "1/1"] and len(trace["records"]) == 2


def test_sweep_rational(capsys):
    code, out, _ = run(["sweep", "--n", "6", "--seeds", "20", "--phi-grid=-1/2,0,1,3"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert tuple(rows[0]) == SWEEP_COLUMNS
    assert len(rows) == 80
    assert {r["max_delta_deviation"] for r in rows} == {"0.0"}
    assert {r["max_angle"] for r in rows} == {"0.0"}
    assert all(r["verdict"] == "pass" for r in rows)


def test_sweep_float_hilbert_reports_angles(capsys):
    code, out, _ = run(["sweep", "--kind", "hilbert-like", "--n", "12", "--seeds", "1",
                        "--phi", "bfgs", "--mode", "float"], capsys)
    assert code == 0
    (row,) = csv.DictReader(io.StringIO(out))
    assert float(row["max_angle"]) > 0


def test_sweep_parallel_matches_serial(capsys):
    argv = ["sweep", "--n", "4", "--seeds", "4", "--phi", "random:3", "--phi", "bfgs"]
    _, serial, _ = run(argv, capsys)
    _, parallel, _ = run(argv + ["--jobs", "2"], capsys)
    assert serial == parallel


@pytest.mark.parametrize("argv", [
    ["sweep", "--n", "3", "--phi-grid", ""],
    ["sweep", "--n", "3"],
    ["sweep", "--n", "3", "--phi", "nonsense"],
    ["verify", "--problem", REF, "--phi", "bfgs", "--rtol", "1e-9"],
    ["verify", "--problem", "/nonexistent/ref.json", "--phi", "bfgs"],
    ["verify", "--spec", "random-spd:n=0", "--phi", "bfgs"],
    ["verify", "--problem", REF],
    ["frobnicate"],
])
def test_usage_errors_exit_two(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 2
    assert err


def test_malformed_problem_file_exits_two(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"scalar_mode": "rational", "H": [["1","2"],["3","1"]], '
                   '"c": ["0","0"], "x0": ["0","0"]}')
    code, _, err = run(["verify", "--problem", str(bad), "--phi", "bfgs"], capsys)
    assert code == 2 and "symmetric" in err


def test_reports_are_byte_identical(tmp_path):
    outs = []
    for name in ("a.json", "b.json"):
        path = tmp_path / name
        assert main(["verify", "--spec", "random-spd:n=6,seed=9", "--phi", "random:4",
                     "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "cgqn", "verify", "--problem", REF, "--phi",
                          "bfgs"], capture_output=True, text=True)
    assert res.returncode == 0 and '"verdict": "pass"' in res.stdout
