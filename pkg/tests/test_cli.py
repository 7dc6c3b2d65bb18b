import json
import subprocess
import sys

import pytest

from blochframes.cli import main
from blochframes.models import DIRAC4D_PINNED_MASS


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_invariants_qwz(capsys):
    code, out, _ = run(capsys, "invariants", "--model", "qwz", "--param", "u=1", "--grid", "40")
    assert code == 0
    data = json.loads(out)
    # [DERIVED] skyrmion oracle in test_chern: c1 = 1 at u = 1
    assert data["c1"]["12"]["int"] == 1 and data["c1"]["12"]["fhs"] == 1
    assert data["config"]["model"] == {"name": "qwz", "params": {"u": 1.0}}
    assert data["config"]["grid"] == 40


def test_invariants_gap_closed(capsys):
    code, _, err = run(capsys, "invariants", "--model", "qwz", "--param", "u=0", "--grid", "40")
    assert code == 2
    assert err.startswith("error: [projector] spectral gap closed")


def test_invariants_second_chern(capsys):
    code, out, _ = run(capsys, "invariants", "--model", "dirac4d", "--param", f"M={DIRAC4D_PINNED_MASS}",
                       "--grid", "12")
    assert code == 0
    assert json.loads(out)["c2"]["int"] == 1


def test_rounding_tolerance_override(capsys):
    code, _, err = run(capsys, "invariants", "--model", "qwz", "--param", "u=1", "--grid", "12",
                       "--tol", "rounding=1e-6")
    assert code == 3
    assert "[invariants]" in err


def test_unknown_tolerance_is_a_validation_error(capsys):
    code, _, err = run(capsys, "invariants", "--model", "qwz", "--tol", "speed=3")
    assert code == 5
    assert "unknown tolerance" in err


def test_outputs_are_byte_identical(tmp_path, capsys):
    path = tmp_path / "a.json"
    blobs = []
    for _ in range(2):
        assert run(capsys, "invariants", "--model", "weak3d", "--grid", "12", "--seed", "3", "--out", str(path))[0] == 0
        blobs.append(path.read_bytes())
    assert blobs[0] == blobs[1]


def test_frame_trivial(tmp_path, capsys):
    out_path = tmp_path / "flat.bin"
    code, out, _ = run(capsys, "frame", "--model", "qwz", "--param", "u=3", "--grid", "32", "--out", str(out_path))
    assert code == 0
    assert json.loads(out)["kind"] == "orthonormal_periodic"
    side = json.loads((tmp_path / "flat.bin.json").read_text())
    assert side["kind"] == "orthonormal_periodic" and "config" in side


def test_frame_parseval_and_wannier(tmp_path, capsys):
    code, out, _ = run(capsys, "frame", "--model", "qwz", "--param", "u=1", "--grid", "32", "--parseval",
                       "--out", str(tmp_path / "p.bin"), "--wannier", str(tmp_path / "w.csv"))
    assert code == 0
    side = json.loads((tmp_path / "p.bin.json").read_text())
    assert side["M"] == 2 and side["kind"] == "parseval"
    assert side["certificate"]["first"] == {"12": 1}
    lines = (tmp_path / "w.csv").read_text().splitlines()
    assert lines[0] == "R1,R2,amplitude" and len(lines) == 32 * 32 + 1
    assert json.loads(out)["wannier"]["slope_log10"] < 0


def test_frame_corrupted_model(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"dim": 1, "norb": 2, "occupied": 1,
                               "hoppings": [{"R": [1], "re": [[0, 1], [0, 0]]}]}))
    code, _, err = run(capsys, "frame", "--model-file", str(bad), "--out", str(tmp_path / "x.bin"))
    assert code == 5
    assert "R=[1]" in err


def test_frame_needs_output(capsys):
    assert run(capsys, "frame", "--model", "flat1d")[0] == 5


def test_model_info(capsys):
    code, out, _ = run(capsys, "model-info", "--model", "dirac4d", "--grid", "6")
    data = json.loads(out)
    assert code == 0 and data["norb"] == 4 and data["occupied"] == 2
    assert data["gap"]["min_gap_over_grid"] == pytest.approx(2.0)


def test_verify_degrees(capsys):
    code, out, err = run(capsys, "verify", "--suite", "degrees")
    data = json.loads(out)
    assert code == 0 and data["failed"] == 0
    names = {c["name"] for c in data["checks"]}
    assert names == {"deg=c1", "3deg=-c2"}
    assert all("runtime" not in c for c in data["checks"])
    assert "checks passed" in err


def test_verify_appendix(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "appendix", "--grid", "16", "--seed", "7", "--timings")
    data = json.loads(out)
    assert code == 0 and data["failed"] == 0
    assert all("runtime" in c for c in data["checks"])


def test_verify_coarse_grid_fails(capsys):
    code, out, err = run(capsys, "verify", "--suite", "all", "--grid", "4")
    assert code == 1
    errors = {c["measured"].get("error") for c in json.loads(out)["checks"] if not c["passed"]}
    assert "GridTooCoarse" in errors
    assert "FAIL" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "blochframes", "invariants", "--model", "flat1d"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["c1"] == {}
