import json
import subprocess
import sys

import pytest

from phaseless import cli
from phaseless.cli import EXIT_NUMERIC, EXIT_OK, EXIT_PHASE, EXIT_USAGE, UsageError, main, parse_box, parse_generator
from phaseless.errors import FrameSearchExhausted


@pytest.fixture(scope="module")
def g0_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "g0.json"
    assert main(["gen-set", "--generator", "tensor:3,3", "--grid", "6", "--out", str(path)]) == EXIT_OK
    return path


def test_parse_generator():
    assert parse_generator("bspline:4").id == "bspline(4)"
    assert parse_generator("zp").to_spec() == parse_generator("box:1,1,0,1;0,0,1,1").to_spec()
    assert parse_generator('{"kind": "tensor", "N": [3, 3]}').id == "tensor(3,3)"
    with pytest.raises(UsageError):
        parse_generator("spline:3")
    assert parse_box("0:9,0:8") == ((0, 0), (9, 8))
    with pytest.raises(UsageError):
        parse_box("0-9")


def test_phi_inv_norm(g0_file, capsys):
    assert main(["phi-inv-norm", "--set", str(g0_file)]) == EXIT_OK
    assert float(capsys.readouterr().out) == pytest.approx(2796.2, rel=1e-2)


def test_check_hat_example(capsys):
    assert main(["check", "--signal", "hat-example"]) == EXIT_OK
    assert capsys.readouterr().out.splitlines()[0] == "inconclusive"


def test_sample_and_reconstruct(g0_file, tmp_path, capsys):
    sig = tmp_path / "f.csv"
    sig.write_text("k1,k2,c\n0,0,1.0\n1,0,-0.5\n0,1,0.7\n1,1,0.3\n2,2,0.9\n")
    samples = tmp_path / "s.csv"
    args = ["sample", "--set", str(g0_file), "--signal", str(sig), "--K", "0:2,0:2", "--out", str(samples)]
    assert main(args) == EXIT_OK
    out = tmp_path / "r.csv"
    args = ["reconstruct", "--set", str(g0_file), "--samples", str(samples), "--format", "csv", "--out", str(out)]
    assert main(args) == EXIT_OK
    rows = dict(((int(a), int(b)), float(c)) for a, b, c in (l.split(",") for l in out.read_text().splitlines()[1:]))
    assert rows[(1, 0)] == pytest.approx(-0.5, abs=1e-10) and rows[(2, 2)] == pytest.approx(0.9, abs=1e-10)
    assert main(["reconstruct", "--set", str(g0_file), "--samples", str(samples)]) == EXIT_OK
    assert "coefficients" in json.loads(capsys.readouterr().out)


def test_bench_replays_identically(g0_file, capsys):
    args = ["bench", "--set", str(g0_file), "--noise", "1e-4", "--m0", "0.01", "--trials", "3", "--K", "0:4,0:4"]
    assert main(args) == EXIT_OK
    first = capsys.readouterr().out
    assert main(args) == EXIT_OK
    assert capsys.readouterr().out == first
    assert json.loads(first)["summary"]["phase_save_rate"] == 1.0


def test_bench_conflict_exit_code(g0_file, capsys):
    args = ["bench", "--set", str(g0_file), "--noise", "3e-2", "--m0", "0.01", "--trials", "3", "--K", "0:4,0:4"]
    assert main(args) == EXIT_PHASE
    assert json.loads(capsys.readouterr().out)["summary"]["conflicts"] > 0


def test_usage_errors(tmp_path, capsys):
    assert main(["bogus"]) == EXIT_USAGE
    assert main(["check"]) == EXIT_USAGE
    bad = tmp_path / "bad.csv"
    bad.write_text("m,l1,l2,g1,g2,z\n0,0,0,abc,0.1,3\n")
    assert main(["check", "--signal", str(bad), "--generator", "tensor:3,3"]) == EXIT_USAGE
    assert "bad.csv:1:" in capsys.readouterr().err


def test_malformed_samples_line_number(g0_file, tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("m,l1,l2,g1,g2,z\n0,0,0,abc,0.1,3\n")
    assert main(["reconstruct", "--set", str(g0_file), "--samples", str(bad)]) == EXIT_USAGE
    assert "bad.csv:2:" in capsys.readouterr().err


def test_lcp_check(capsys):
    assert main(["lcp-check", "--generator", "zp", "--region", "AU"]) == EXIT_OK
    assert main(["lcp-check", "--generator", "zp", "--region", "unit2"]) == EXIT_OK
    assert capsys.readouterr().out.split() == ["true", "false"]


def test_input_and_numeric_failure_exit_codes(monkeypatch):
    # locally dependent generators are rejected as bad input
    assert main(["gen-set", "--generator", "fixture:phi0"]) == EXIT_USAGE

    def exhausted(*args, **kwargs):
        raise FrameSearchExhausted("no frame")

    monkeypatch.setattr(cli, "build_patch_system", exhausted)
    assert main(["gen-set", "--generator", "zp", "--mode", "frame"]) == EXIT_NUMERIC


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "phaseless.cli", "check", "--signal", "hat-example"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("inconclusive")
