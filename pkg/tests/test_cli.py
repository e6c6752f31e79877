import json
import math
import subprocess
import sys

import pytest

from bergkern import __version__, cli
from bergkern import manifest as mf
from bergkern.errors import ManifestError


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_describe_fock(tmp_path, capsys):
    m = write(tmp_path, "m.yaml", "command: describe\ngeometry: {family: fock, params: {lam: 1.0}}\npoints: [0]\n")
    assert cli.main(["--manifest", str(m)]) == 0
    doc = json.loads(capsys.readouterr().out)
    rep = doc["results"][0]
    assert rep["rdot"]["re"] == [[2.0]] and rep["r"] == 0.0
    assert doc["version"] == __version__ and len(doc["manifest_sha256"]) == 64


def test_compare_cp1(tmp_path):
    m = write(tmp_path, "m.yaml", """\
command: compare
geometry: {family: cp1_fs}
points: [0.2]
k_list: {from: 10, to: 80, step: 10}
output: {path: out.json, plot_data: true}
""")
    out = tmp_path / "res.json"
    assert cli.main(["--manifest", str(m), "--out", str(out)]) == 0
    res = json.loads(out.read_text())["results"][0]
    assert res["fitted_b"] == pytest.approx([1 / (2 * math.pi), 1 / (2 * math.pi), 0], abs=1e-6)
    assert res["predicted_b"] == pytest.approx(res["fitted_b"], abs=1e-6)
    curve = (tmp_path / "res.plot" / "kernel_point0.csv").read_text().splitlines()
    assert curve[0].startswith("# ") and "manifest_sha256=" in curve[0]
    assert curve[1] == "k,P_k" and len(curve[2].split(",")) == 2


def test_negative_k_is_rejected(tmp_path, capsys):
    m = write(tmp_path, "m.yaml", "command: exact\ngeometry: {family: fock}\npoints: [0]\nk_list: [4, -8]\n")
    out = tmp_path / "never.json"
    assert cli.main(["--manifest", str(m), "--out", str(out)]) == 2
    assert not out.exists()
    assert "line 4, column" in capsys.readouterr().err


@pytest.mark.parametrize("text,line", [
    ("command: nope\n", 1),
    ("command: exact\ngeometry: {family: fock}\npoints: [0]\nk_list: [8, 4]\n", 4),
    ("command: describe\ngeometry:\n  family: cp1_fs\n  params: {eps: x}\npoints: [0]\n", 4),
    ("command: describe\ngeometry: {family: fock}\npoints: [0]\nbogus: 1\n", 4),
    ("command: describe\ngeometry: {family: cp1_fs, chart: {radius: 1}}\npoints: [2]\n", 3),
    ("command: describe\ngeometry: {family: fock\n", 3),
    ("command: describe\ngeometry:\n  family: chart_expression\n  params: {phi: 'abs2(z1) +'}\npoints: [0]\n", 4),
])
def test_manifest_errors_have_locations(text, line):
    with pytest.raises(ManifestError) as info:
        mf.loads(text)
    assert info.value.line == line and info.value.column >= 1


def test_grid_points_filtered_to_chart():
    man = mf.loads("command: describe\ngeometry: {family: cp1_fs, chart: {radius: 1.5}}\n"
                   "points: {grid: {re: [-2, 2, 5], im: [0, 0, 1]}}\n")
    assert len(man.points) == 3
    with pytest.raises(ManifestError):
        mf.loads("command: describe\ngeometry: {family: cp1_fs, chart: {radius: 0.1}}\n"
                 "points: {grid: {re: [1, 2, 3]}}\n")


def test_numerical_failure_exit_code(tmp_path, capsys):
    m = write(tmp_path, "m.yaml", "command: compare\ngeometry: {family: cp1_fs, params: {sign: -1}}\n"
                                  "points: [0]\nk_list: [4, 8, 16]\n")
    assert cli.main(["--manifest", str(m), "--out", str(tmp_path / "o.json")]) == 3
    err = capsys.readouterr().err
    assert "coefficient_set" in err and not (tmp_path / "o.json").exists()


def test_outputs_are_byte_identical_across_threads(tmp_path):
    m = write(tmp_path, "m.yaml", "command: exact\ngeometry: {family: torus, params: {eps: 0.2}}\n"
                                  "points: [[0.3, 0.4]]\npairs: [[[0.3, 0.4], 0.5]]\nk_list: [4, 8]\n")
    outs = []
    for threads in ("1", "4", "1"):
        out = tmp_path / f"o{len(outs)}.csv"
        assert cli.main(["--manifest", str(m), "--out", str(out), "--format", "csv", "--threads", threads]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_heat_random_corpus_is_seeded(tmp_path):
    m = write(tmp_path, "m.yaml", "command: heat\nheat: {random: {draws: 20, n: 2}}\n")
    runs = []
    for seed in ("5", "5", "6"):
        out = tmp_path / f"h{len(runs)}.json"
        assert cli.main(["--manifest", str(m), "--out", str(out), "--seed", seed]) == 0
        runs.append(out.read_bytes())
    assert runs[0] == runs[1] != runs[2]
    rows = json.loads(runs[0])["results"]
    assert all(r["bound_holds"] is not False for r in rows)


def test_coeffs_reports_both_methods(tmp_path, capsys):
    m = write(tmp_path, "m.yaml", "command: coeffs\ngeometry: {family: cp1_fs}\npoints: [0, 0.5]\n")
    assert cli.main(["--manifest", str(m)]) == 0
    res = json.loads(capsys.readouterr().out)["results"]
    assert res[0]["stationary_phase"]["b1"] == pytest.approx(res[0]["b1"], abs=1e-10)
    assert res[1]["stationary_phase"] is None


def test_morse_command(tmp_path, capsys):
    m = write(tmp_path, "m.yaml", "command: morse\ngeometry: {family: cp1_fs, params: {sign: -1}}\nk_list: [10, 40]\n")
    assert cli.main(["--manifest", str(m)]) == 0
    res = json.loads(capsys.readouterr().out)["results"]
    assert res[0]["q_integrals"] == pytest.approx([0.0, 1.0], abs=1e-9)
    checks = [r for r in res if r["kind"] == "check" and r["q"] == 1]
    assert [c["dim"] for c in checks] == [9, 39]
    assert res[-1] == {"kind": "signature", "negative_directions": 1, "vanishing_degrees": [0]}


def test_finite_difference_describe_is_cross_checked(tmp_path, capsys):
    m = write(tmp_path, "m.yaml", "command: describe\ngeometry: {family: cp1_fs, derivative_mode: finite_difference}\n"
                                  "points: [0.3]\n")
    assert cli.main(["--manifest", str(m)]) == 0
    rep = json.loads(capsys.readouterr().out)["results"][0]
    assert rep["derivative_discrepancy"] < 1e-5


def test_console_script(tmp_path):
    m = write(tmp_path, "m.yaml", "command: heat\nheat: {eigenvalues: [[0.0]], t: [2.0]}\n")
    proc = subprocess.run([sys.executable, "-m", "bergkern.cli", "--manifest", str(m), "--format", "csv"],
                          capture_output=True, text=True, check=True)
    lines = proc.stdout.splitlines()
    assert lines[0].startswith("# tool=bergkern") and "density" in lines[1]
    assert float(lines[2].split(",")[lines[1].split(",").index("density")]) == 1 / (4 * math.pi)
