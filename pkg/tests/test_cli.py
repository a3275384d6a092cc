import io
import json
import subprocess
import sys

import pytest

from nonspurious.cli import run


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def test_solve_n2():
    code, out, _ = call("solve", "--f", "x + 1", "--n", "2")
    assert code == 0
    assert out.splitlines()[2] == "1,0.5,-0.1111111111111111"
    assert float(out.splitlines()[2].split(",")[2]) == pytest.approx(-1 / 9, abs=1e-15)


def test_solve_json():
    code, out, _ = call("solve", "--name", "affine", "--n", "8", "--format", "json", "--include-solution")
    d = json.loads(out)
    assert code == 0 and d["status"] == "converged" and len(d["solution"]) == 9
    assert set(d) == {"n", "status", "iterations", "residual", "energy", "norm_E", "N_n", "Q_n", "solution"}


def test_check_h1_failure_cites_hypothesis():
    code, _, err = call("check", "--f", "x")
    assert code == 1
    assert "H1" in err and "f(t,0) ≠ 0 for t∈[0,1]" in err


def test_check_pass_with_h2a_and_convexity():
    code, out, _ = call("check", "--f", "atan(x) + 1", "--a", "2.6", "--b", "1", "--gamma", "0", "--convexity-a", "0.5")
    verdicts = json.loads(out)["verdicts"]
    assert code == 0
    assert [v["hypothesis"] for v in verdicts] == ["H1", "H2", "H2a", "RelaxedConvexity"]


def test_spurious():
    code, out, _ = call("spurious")
    d = json.loads(out)
    assert code == 0 and d["all_match"]
    outcomes = {(c["case"], c["n"]): c["outcome"] for c in d["cases"]}
    assert outcomes[("case1", 10)] == "unique-zero"
    assert outcomes[("case2", 10)] == "unique"
    assert outcomes[("case3", 10)] == "no-solution"


def test_study_csv():
    code, out, _ = call("study", "--name", "affine", "--schedule", "16,32,64,128")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "n,e_n,Q_n,N_n,norm_E,iterations"
    assert "# verdict.ewa2_converging=true" in lines


def test_study_fine_grid_default_for_catalogue_entry():
    code, out, _ = call("study", "--name", "exp", "--schedule", "16,32,64", "--format", "json")
    d = json.loads(out)
    assert code == 0 and d["oracle"].startswith("exp@")


def test_verify():
    code, out, _ = call("verify", "--name", "atan-shift", "--n", "64")
    d = json.loads(out)
    assert code == 0 and d["all_hold"]
    assert d["h2a_chain"]["N_bound"] == "indeterminate-by-paper"


def test_verify_failure_exit():
    code, _, _ = call("verify", "--f", "atan(x) - 59", "--a", "1", "--b", "1", "--gamma", "0", "--n", "64")
    assert code == 1


@pytest.mark.parametrize(
    "argv, code",
    [
        (["solve", "--f", "x + 1", "--n", "2"], 0),
        (["check", "--f", "x"], 1),
        (["solve", "--f", "x"  , "--n", "4"], 1),
        (["solve", "--f=-12*x + 1", "--n", "8", "--override-assumptions"], 2),
        (["solve", "--f", "2x", "--n", "4"], 3),
        (["solve", "--f", "x + 1", "--n", "8", "--max-iter", "0"], 4),
        (["solve", "--n", "4"], 5),
        (["solve", "--name", "affine", "--f", "x", "--n", "4"], 5),
        (["solve", "--name", "nope", "--n", "4"], 5),
        (["solve", "--name", "affine", "--n", "1"], 5),
        (["frobnicate"], 5),
        (["study", "--name", "affine", "--schedule", "32,16"], 5),
        (["study", "--name", "exp", "--oracle", "closed-form"], 5),
        (["check", "--f", "x + 1", "--a", "1"], 5),
        (["solve", "--name", "affine", "--n", "4", "--tol", "-1"], 5),
    ],
)
def test_exit_codes(argv, code):
    assert call(*argv)[0] == code


def test_parse_error_message():
    code, _, err = call("check", "--f", "x +")
    assert code == 3 and "parse error at column 4:" in err


def test_override_warns():
    _, _, err = call("solve", "--name", "atan", "--n", "4", "--override-assumptions")
    assert "WARNING" in err


def test_config_file_and_flag_layering(tmp_path):
    cfg = tmp_path / "nl.cfg"
    cfg.write_text("f = x\nxrange = 5\n", encoding="utf-8")
    assert call("check", "--config", str(cfg))[0] == 1
    # flags win over the file
    code, out, _ = call("check", "--config", str(cfg), "--f", "x + 1")
    assert code == 0 and json.loads(out)["nonlinearity"]["f"] == "x + 1"
    bad = tmp_path / "bad.cfg"
    bad.write_text("g = 1\n", encoding="utf-8")
    assert call("check", "--config", str(bad))[0] == 5


@pytest.mark.parametrize(
    "argv",
    [
        ["study", "--name", "affine", "--schedule", "16,32,64,128,256"],
        ["solve", "--name", "cubic", "--n", "33", "--format", "json", "--include-solution"],
        ["spurious", "--format", "csv"],
        ["check", "--name", "sqrt", "--format", "csv"],
        ["verify", "--name", "atan-shift", "--n", "64"],
    ],
)
def test_output_files_byte_identical(tmp_path, argv):
    a, b = tmp_path / "a.out", tmp_path / "b.out"
    call(*argv, "--output", str(a))
    call(*argv, "--output", str(b))
    assert a.read_bytes() == b.read_bytes() and a.stat().st_size > 0


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "nonspurious", "solve", "--f", "x + 1", "--n", "2"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0 and "-0.1111111111111111" in proc.stdout


def test_threads_env(monkeypatch):
    monkeypatch.setenv("NONSPURIOUS_THREADS", "1")
    from nonspurious.analysis import worker_count

    assert worker_count() == 1
