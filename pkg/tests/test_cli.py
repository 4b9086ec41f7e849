import csv
import io
import json
import math
import subprocess
import sys

import pytest
from scipy.integrate import quad

from pclab.cli import main

SQ2 = math.sqrt(2.0)
DEG = math.pi / 180

SCENE = {
    "cone": {"kind": "polyhedral", "dim": 2, "normals": [[-1, 0], [0, -1]]},
    "weights": {"q0": {"q": 0}, "q05": {"q": 0.5}, "q15": {"q": 1.5}, "q3": {"q": 3}},
    "bodies": {
        "hyp": {"kind": "hyperbola", "c": 1.0},
        "wedge": {"kind": "wulff", "directions": [[-SQ2 / 2, -SQ2 / 2]], "hbar": [SQ2]},
        "wedge2": {"kind": "wulff", "directions": [[-SQ2 / 2, -SQ2 / 2]], "hbar": [2 * SQ2]},
        "shift": {"kind": "shifted_cone", "z": [1, 1]},
        "tri": {"kind": "wulff",
                "directions": [[math.cos(a * DEG), math.sin(a * DEG)] for a in (200, 225, 250)],
                "hbar": [1.0, 1.3, 1.1]},
    },
    "points": {"z": [1, 1]},
}


@pytest.fixture()
def scene(tmp_path):
    p = tmp_path / "scene.json"
    p.write_text(json.dumps(SCENE))
    return str(p)


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_covolume_wedge(capsys, scene):
    code, out = run(capsys, "covolume", "--scene", scene, "--body", "wedge", "--weight", "q0")
    assert code == 0
    assert json.loads(out)["value"] == pytest.approx(2.0, rel=1e-9)


def test_covolume_hyperbola_matches_oracle(capsys, scene):
    code, out = run(capsys, "covolume", "--scene", scene, "--body", "hyp", "--weight", "q15")
    oracle = 2 * quad(lambda t: (math.sin(t) * math.cos(t)) ** -0.25, 0, math.pi / 2, limit=200)[0]
    assert code == 0
    assert json.loads(out)["value"] == pytest.approx(oracle, rel=1e-6)


def test_volume_and_dual_volume(capsys, scene):
    code, out = run(capsys, "volume", "--scene", scene, "--body", "shift", "--weight", "q3")
    assert code == 0 and json.loads(out)["value"] == pytest.approx(2 - SQ2, rel=1e-9)
    code, out = run(capsys, "dual-volume", "--scene", scene, "--body", "hyp", "--r", "-2")
    assert code == 0 and json.loads(out)["value"] == pytest.approx(0.25, rel=1e-9)


def test_sam_of_wulff_shape(capsys, scene):
    code, out = run(capsys, "sam", "--scene", scene, "--body", "wedge", "--weight", "q0")
    assert code == 0
    assert json.loads(out)["masses"][0] == pytest.approx(2 * SQ2, rel=1e-9)


def test_starting_point(capsys, scene):
    code, out = run(capsys, "starting-point", "--scene", scene, "--body", "shift")
    d = json.loads(out)
    assert code == 0 and d["degenerate"] is False
    assert d["z"] == pytest.approx([1.0, 1.0], abs=1e-9)


def test_finiteness_probe(capsys, scene):
    code, out = run(capsys, "finiteness", "--scene", scene, "--body", "hyp", "--weight", "q15", "--tag", "V")
    d = json.loads(out)
    assert code == 0 and d["status"] == "power_divergent"


def test_asym_covolume_named_point(capsys, scene):
    code, out = run(capsys, "asym-covolume", "--scene", scene, "--body", "hyp", "--weight", "q3", "--z", "z")
    code2, out2 = run(capsys, "asym-covolume", "--scene", scene, "--body", "hyp", "--weight", "q3", "--z", "1,1")
    assert code == code2 == 0
    assert out == out2


def test_solve_round_trip(capsys, scene, tmp_path):
    code, out = run(capsys, "sam", "--scene", scene, "--body", "tri", "--weight", "q05")
    mu = json.loads(out)
    m = tmp_path / "mu.json"
    m.write_text(json.dumps({"directions": mu["directions"], "masses": mu["masses"]}))
    code, out = run(capsys, "solve", "--scene", scene, "--weight", "q05", "--measure", str(m), "--tol", "1e-4")
    rep = json.loads(out)
    assert code == 0 and rep["converged"] is True
    assert rep["h_tilde"] == pytest.approx([1.0, 1.3, 1.1], rel=1e-3)
    assert rep["residual"] <= 1e-4


def test_solve_not_converged_exit_status(capsys, scene, tmp_path):
    m = tmp_path / "mu.json"
    m.write_text(json.dumps({"directions": SCENE["bodies"]["tri"]["directions"], "masses": [1, 2, 0.7]}))
    s = json.loads(open(scene).read())
    s["solver"] = {"max_iters": 1}
    p = tmp_path / "s2.json"
    p.write_text(json.dumps(s))
    code, out = run(capsys, "solve", "--scene", str(p), "--weight", "q05", "--measure", str(m), "--tol", "1e-14")
    d = json.loads(out)
    assert code == 1
    assert d["error"] == "not_converged" and d["report"]["converged"] is False


def test_check_convolution_json_lines(capsys, scene):
    code, out = run(capsys, "check", "convolution", "--scene", scene, "--body", "hyp", "--weight", "q3", "--z", "1,1")
    lines = out.strip().splitlines()
    assert code == 0 and len(lines) == 1
    assert json.loads(lines[0])["verdict"] == "holds"


def test_check_bm_sweep_csv(capsys, scene):
    code, out = run(capsys, "check", "bm-sweep", "--scene", scene, "--weight", "q05", "--count", "6",
                    "--dilates", "2", "--emit-csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0
    assert rows[0] == ["name", "lhs", "rhs", "margin", "verdict"]
    assert len(rows) == 7
    assert [r[4] for r in rows[1:3]] == ["equality_within_tol"] * 2
    assert all(r[4] != "violated" for r in rows[1:])


def test_check_bm_pair_and_containment(capsys, scene):
    code, out = run(capsys, "check", "bm", "--scene", scene, "--body", "wedge", "--other", "wedge2", "--weight", "q05")
    assert code == 0 and json.loads(out)["verdict"] == "equality_within_tol"
    code, out = run(capsys, "check", "radial-containment", "--scene", scene, "--body", "wedge", "--other", "shift")
    assert code == 0 and json.loads(out)["verdict"] in ("holds", "equality_within_tol")


def test_reproduce_sam_critical_csv(capsys):
    code, out = run(capsys, "reproduce", "sam_critical")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0
    assert rows[0] == ["X", "truncated_S", "sqrt2_asinh_X", "rel_diff"]
    assert float(rows[1][2]) == pytest.approx(SQ2 * math.asinh(10.0), rel=1e-12)


def test_reproduce_json_output(capsys, tmp_path):
    out = tmp_path / "r.json"
    code, _ = run(capsys, "reproduce", "sam_critical", "--out", str(out))
    d = json.loads(out.read_text())
    assert code == 0 and d["name"] == "sam_critical"


def test_output_is_deterministic(capsys, scene):
    args = ("check", "bm-sweep", "--scene", scene, "--weight", "q05", "--count", "4", "--seed", "7")
    _, a = run(capsys, *args)
    _, b = run(capsys, *args)
    assert a == b


def test_figures_are_written(capsys, scene, tmp_path):
    figdir = tmp_path / "figs"
    code, _ = run(capsys, "finiteness", "--scene", scene, "--body", "hyp", "--weight", "q15", "--tag", "V",
                  "--figures", str(figdir))
    assert code == 0
    pngs = list(figdir.glob("*.png"))
    assert len(pngs) == 1 and pngs[0].read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_dry_run_does_no_work(capsys, scene):
    code, out = run(capsys, "covolume", "--scene", scene, "--body", "hyp", "--weight", "q15", "--dry-run")
    assert code == 0 and json.loads(out) == {"command": "covolume", "dry_run": True, "ok": True}


@pytest.mark.parametrize("argv", [
    ["covolume", "--body", "hyp"],
    ["covolume", "--scene", "SCENE", "--body", "nobody", "--weight", "q15"],
    ["covolume", "--scene", "SCENE", "--body", "hyp", "--weight", "q3"],
    ["dual-volume", "--scene", "SCENE", "--body", "hyp", "--r", "1"],
    ["reproduce", "nope"],
    ["asym-covolume", "--scene", "SCENE", "--body", "hyp", "--weight", "q3", "--z=-1,1"],
    ["covolume", "--scene", "SCENE", "--body", "hyp", "--weight", "q15", "--threads", "0"],
])
def test_validation_errors_exit_2(capsys, scene, argv):
    argv = [scene if a == "SCENE" else a for a in argv]
    code, out = run(capsys, *argv)
    assert code == 2
    assert "error" in json.loads(out)


def test_bad_scene_file(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    code, _ = run(capsys, "covolume", "--scene", str(p), "--body", "hyp")
    assert code == 2
    p.write_text(json.dumps({"cone": SCENE["cone"], "extra": 1}))
    code, _ = run(capsys, "covolume", "--scene", str(p), "--body", "hyp")
    assert code == 2


def test_bad_threads_environment(capsys, scene, monkeypatch):
    monkeypatch.setenv("PCLAB_THREADS", "many")
    code, _ = run(capsys, "covolume", "--scene", scene, "--body", "wedge", "--weight", "q0")
    assert code == 2


def test_divergence_exit_3(capsys, scene):
    code, out = run(capsys, "sam", "--scene", scene, "--body", "hyp", "--weight", "q0")
    assert code == 3
    assert json.loads(out)["error"] == "divergent_measure"


def test_console_script_entry_point(scene):
    res = subprocess.run([sys.executable, "-m", "pclab", "covolume", "--scene", scene, "--body", "wedge",
                          "--weight", "q0"], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["value"] == pytest.approx(2.0, rel=1e-9)
