import json
import subprocess
import sys

import pytest

from sobolev_lab import OUTPUT_DIR_ENV
from sobolev_lab.cli import main


def test_constant_command(capsys):
    assert main(["constant", "--n", "3", "--p", "2", "--resolution", "256", "512"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2
    values = [float(ln.split("=")[3].split()[0]) for ln in lines]
    deltas = [abs(float(ln.rsplit("delta=", 1)[1])) for ln in lines]
    assert values[0] == pytest.approx(2.3404922750420116, rel=1e-10)
    assert deltas[1] <= 1e-6 * values[1]


def test_constant_command_rejects_p(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["constant", "--n", "2", "--p", "0.5"])
    assert exc.value.code == 2
    assert "p must lie in (1,n)" in capsys.readouterr().err


def test_usage_errors_exit_two(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["certify", "--samples", "lots"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_certify_command(tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert main(["certify", "--samples", "6", "--output", str(out)]) == 0
    text = capsys.readouterr().out
    assert "Violated=0" in text and "min_slack=" in text
    assert out.read_text().count("Certified") == 6


def test_certify_empty(tmp_path):
    assert main(["certify", "--samples", "0", "--output", str(tmp_path / "e.csv")]) == 0


def test_certify_shrunk_constants_exit_one(tmp_path):
    assert main(["certify", "--samples", "30", "--shrink-constants", "64",
                 "--output", str(tmp_path / "s.csv")]) == 1


def test_certify_config_error(tmp_path, capsys):
    assert main(["certify", "--resolution", "100", "--output", str(tmp_path / "x.csv")]) == 2
    assert "power of two" in capsys.readouterr().err
    assert main(["certify", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_certify_json(tmp_path):
    out = tmp_path / "r.json"
    assert main(["certify", "--samples", "2", "--format", "json", "--output", str(out)]) == 0
    assert json.loads(out.read_text())["summary"]["samples"] == 2


def test_certify_projected_flag(tmp_path, capsys):
    out = tmp_path / "p.json"
    assert main(["certify", "--samples", "2", "--resolution", "64", "--projected",
                 "--format", "json", "--output", str(out)]) == 0
    assert "projected_counts=" in capsys.readouterr().out
    assert all("projected" in r for r in json.loads(out.read_text())["records"])


def test_report_reproduces_from_embedded_config(tmp_path, monkeypatch):
    first, second = tmp_path / "a", tmp_path / "b"
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(first))
    assert main(["certify", "--samples", "5", "--seed", "11", "--eps-grid", "0.2,0.4"]) == 0
    report = first / "certify.csv"
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(second))
    assert main(["certify", "--config", str(report)]) == 0
    assert (second / "certify.csv").read_bytes() == report.read_bytes()


@pytest.mark.parametrize("p", ["1.5", "2", "3"])
def test_clarkson_command(p, capsys):
    assert main(["clarkson", "--p", p, "--trials", "20000", "--seed", "7"]) == 0
    out = capsys.readouterr().out
    assert "VIOLATED" not in out
    if p == "2":
        line = next(ln for ln in out.splitlines() if ln.startswith("clarkson_pointwise_super"))
        assert "equality_cases=20000" in line


def test_clarkson_command_bad_trials():
    assert main(["clarkson", "--p", "1.5", "--trials", "0"]) == 2


def test_asymmetry_command(capsys):
    assert main(["asymmetry", "bubble(c=2, lam=3, center=[1,0])", "--n", "2", "--p", "1.5"]) == 0
    out = capsys.readouterr().out
    values = [float(ln.split("=")[1].split()[0]) for ln in out.splitlines()]
    assert len(values) == 2 and max(values) <= 1e-4
    assert "converged=" in out and "multistarts=" in out


def test_asymmetry_command_perturbed(capsys):
    spec = "bubble(c=1) + 0.2*gaussian(center=[1, 0], width=0.5, amp=1)"
    assert main(["asymmetry", spec, "--n", "2", "--p", "1.5"]) == 0
    values = [float(ln.split("=")[1].split()[0]) for ln in capsys.readouterr().out.splitlines()]
    assert all(v > 0 for v in values)


def test_asymmetry_command_parse_error(capsys):
    assert main(["asymmetry", "bubble(c=1,, lam=2)", "--n", "2", "--p", "1.5"]) == 2
    assert "column 12" in capsys.readouterr().err


def test_corpus_command(tmp_path):
    out = tmp_path / "c.json"
    assert main(["corpus", "--samples", "4", "--output", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert [s["sample_id"] for s in doc["samples"]] == ["s00000", "s00001", "s00002", "s00003"]


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sobolev_lab", "constant", "--n", "2", "--p",
                           "1.5", "--resolution", "128"], capture_output=True, text=True)
    assert proc.returncode == 0 and "2.5261839045947" in proc.stdout
