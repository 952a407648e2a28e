import csv
import json
import subprocess
import sys

import pytest

from lrswap import __version__
from lrswap.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    report = json.loads(out.out) if out.out.strip() else None
    error = json.loads(out.err) if out.err.strip() else None
    return code, report, error


def test_verify_drop_push(capsys):
    code, report, _ = run(capsys, "verify", "--rule", "drop-push", "--n", "3", "--N", "3", "--no-files")
    assert code == 0 and report["status"] == "pass"
    assert report["version"] == __version__ and report["config"]["N"] == 3
    assert not report["summary"]["failed"]


def test_verify_non_integrable_expects_reducibility_failure(capsys):
    code, report, _ = run(capsys, "verify", "--rule", "non-integrable", "--n", "3", "--N", "2", "--no-files")
    assert code == 0
    assert report["summary"]["yang_baxter"] is True
    assert report["summary"]["reducibility_failures"]


def test_verify_size_cap(capsys):
    code, _, error = run(capsys, "verify", "--n", "9", "--N", "3", "--no-files")
    assert code == 2 and error["error"] == "ResourceLimitError"


@pytest.mark.parametrize("argv", [("--rule", "drop-push", "--n", "3", "--N", "3"),
                                  ("--rule", "tasep", "--n", "2", "--N", "2")])
def test_generator_matches(capsys, argv):
    code, report, _ = run(capsys, "generator", *argv, "--no-files")
    assert code == 0 and all(not s["mismatches"] for s in report["shapes"])


def test_generator_rejects_non_integrable(capsys):
    code, _, error = run(capsys, "generator", "--rule", "non-integrable", "--no-files")
    assert code == 2 and error["error"] == "UnsupportedRuleError"


def test_prob_all_methods(capsys, tmp_path):
    code, report, _ = run(capsys, "prob", "--method", "all", "--n", "2", "--N", "2", "--nu", "21", "--t", "1.0",
                          "--trials", "20000", "--output-dir", str(tmp_path))
    assert code == 0
    checks = {c["name"]: c for c in report["checks"]}
    assert checks["bethe_vs_series"]["max_abs_diff"] < 1e-8
    assert checks["mc_vs_series"]["pass"]
    lines = (tmp_path / "prob.csv").read_text().splitlines()
    assert lines[0].startswith(f"# lrswap {__version__}")
    header = next(csv.reader([lines[1]]))
    assert header == ["x_1", "x_2", "word", "p_bethe", "p_series", "p_mc", "abs_diff", "imag_residual"]
    assert json.loads((tmp_path / "prob.json").read_text()) == report


def test_prob_identity_at_time_zero(capsys, tmp_path):
    code, report, _ = run(capsys, "prob", "--method", "bethe", "--nu", "21", "--t", "0", "--output-dir", str(tmp_path))
    assert code == 0
    rows = list(csv.DictReader((tmp_path / "prob.csv").read_text().splitlines()[1:]))
    for row in rows:
        expected = 1.0 if (row["x_1"], row["x_2"], row["word"]) == ("0", "1", "21") else 0.0
        assert abs(float(row["p_bethe"]) - expected) < 1e-10


def test_prob_monte_carlo_is_byte_identical(capsys, tmp_path):
    argv = ["prob", "--method", "mc", "--nu", "21", "--trials", "2000", "--seed", "7", "--output-dir", str(tmp_path)]
    assert main(argv + ["--prefix", "a"]) == 0
    assert main(argv + ["--prefix", "b"]) == 0
    capsys.readouterr()
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_prob_tolerance_breach_exits_one(capsys):
    code, report, _ = run(capsys, "prob", "--method", "all", "--nu", "21", "--trials", "50", "--mc-sigmas", "0",
                          "--mc-min-p", "0", "--no-files")
    assert code == 1 and report["status"] == "fail"


def test_prob_invalid_queries(capsys):
    assert run(capsys, "prob", "--method", "bethe", "--nu", "2113", "--no-files")[0] == 2
    assert run(capsys, "prob", "--nu", "21", "--n", "3", "--no-files")[0] == 2
    assert run(capsys, "prob", "--nu", "21", "--rule", "tasep", "--r", "1.5", "--no-files")[0] == 2
    assert run(capsys, "prob", "--no-files")[0] == 2
    assert run(capsys, "bogus")[0] == 2


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"nu": "21", "t": 0.5, "method": "series", "window": 4}))
    code, report, _ = run(capsys, "--config", str(cfg), "prob", "--t", "0.25", "--no-files")
    assert code == 0
    assert report["config"]["t"] == 0.25 and report["config"]["window"] == 4 and report["config"]["method"] == "series"
    cfg.write_text(json.dumps({"nu": "21", "unknown": 1}))
    assert run(capsys, "--config", str(cfg), "prob", "--no-files")[0] == 2


def test_output_directory_from_environment(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("LRSWAP_OUTPUT_DIR", str(tmp_path / "out"))
    assert main(["simulate", "--nu", "12", "--trials", "100", "--seed", "1"]) == 0
    capsys.readouterr()
    rows = (tmp_path / "out" / "simulate.csv").read_text().splitlines()
    assert rows[1] == "x_1,x_2,word,count,p_mc"
    assert sum(int(r.split(",")[3]) for r in rows[2:]) == 100


def test_table_command(capsys, tmp_path):
    code, report, _ = run(capsys, "table", "--nu", "11", "--rule", "tasep", "--t", "0.5", "--window", "8",
                          "--output-dir", str(tmp_path))
    assert code == 0
    assert report["cfg"] == {"r": 0.5, "r_min": 0.5, "M": 64}
    assert abs(report["deficit"]) < 1e-6
    header = (tmp_path / "table.csv").read_text().splitlines()[1]
    assert header == "x_1,x_2,word,p_bethe,imag_residual,conv_delta"


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "lrswap", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and __version__ in out.stdout
