import json
import math
import subprocess
import sys

import numpy as np
import pytest

from povm_reversal import cli
from povm_reversal import qubit as qc
from povm_reversal import stats

SIM = ["simulate", "--lambda", "0.5", "--steps", "40", "--mode", "filtered", "--copies", "2000", "--seed", "7"]


def _run(args):
    return cli.main([str(a) for a in args])


def test_simulate_json(tmp_path, capsys):
    out = tmp_path / "z.json"
    assert _run(SIM + ["--ensemble", "z", "--out", out]) == 0
    payload = json.loads(out.read_text())
    assert payload["schema_version"] == stats.SCHEMA_VERSION
    assert payload["config"]["strength"] == 0.5
    assert payload["data"]["columns"][-1] == "n_over_N"
    assert len(payload["data"]["rows"]) == 2000
    assert payload["data"]["departures"]["k"] == 20
    peaks = payload["data"]["departures"]["peaks"]
    assert len(peaks) == 2 and peaks[0] < -0.25 < 0.25 < peaks[1]
    manifest = json.loads((tmp_path / "z.manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["config"]["seed"] == 7 and manifest["config"]["ensemble"]["kind"] == "z"
    assert "timestamp" in manifest and "artifact_version" in manifest
    assert "retained" in capsys.readouterr().out


def test_simulate_x_is_unimodal(tmp_path):
    out = tmp_path / "x.json"
    assert _run(SIM + ["--ensemble", "x", "--out", out]) == 0
    assert json.loads(out.read_text())["data"]["departures"]["peaks"] == [0.0]


def test_simulate_csv_outputs(tmp_path):
    out = tmp_path / "run.csv"
    args = ["simulate", "--ensemble", "x", "--lambda", "0.5", "--steps", "200", "--mode", "unfiltered",
            "--copies", "3000", "--condition-k", "10", "--seed", "1", "--out", out, "--format", "csv"]
    assert _run(args) == 0
    header, rows = stats.read_csv(out)
    assert header == ["copy", "preparation", "k", "n_plus", "n_minus", "n_over_N"]
    assert rows and all(r[2] == "10" for r in rows)
    zc_header, zc_rows = stats.read_csv(tmp_path / "run.zero_crossings.csv")
    assert zc_header == ["k", "count", "probability", "ratio_next"]
    assert sum(int(r[1]) for r in zc_rows) == 3000
    assert json.loads((tmp_path / "run.departures.json").read_text())["k"] == 10
    manifest = json.loads((tmp_path / "run.manifest.json").read_text())
    assert 0 < manifest["acceptance_rate"] < 1 and manifest["retained"] == len(rows)


def test_rerun_is_byte_identical(tmp_path):
    a, b, c = tmp_path / "a.json", tmp_path / "b.json", tmp_path / "c.json"
    assert _run(SIM + ["--ensemble", "x", "--out", a]) == 0
    assert _run(SIM + ["--ensemble", "x", "--out", b]) == 0
    assert _run(SIM + ["--ensemble", "x", "--out", c, "--workers", "2"]) == 0
    data = [json.loads(p.read_text())["data"] for p in (a, b, c)]
    assert a.read_bytes() == b.read_bytes()
    assert data[0] == data[2]


def test_custom_ensemble(tmp_path):
    spec = tmp_path / "ens.json"
    spec.write_text(json.dumps([
        {"state": [1, 0, 0, 0], "weight": 0.25},
        {"state": [0.6, 0, 0, 0.8], "weight": 0.75},
    ]))
    out = tmp_path / "c.json"
    assert _run(SIM + ["--ensemble", f"custom:{spec}", "--out", out]) == 0
    payload = json.loads(out.read_text())
    assert payload["config"]["ensemble"]["kind"] == "custom"
    preps = {row[1] for row in payload["data"]["rows"]}
    assert preps == {0, 1}


@pytest.mark.parametrize(
    "extra",
    [
        ["--ensemble", "q"],
        ["--ensemble", "z", "--lambda", "1.5"],
        ["--ensemble", "z", "--steps", "41"],
        ["--ensemble", "z", "--copies", "0"],
        ["--ensemble", "z", "--mode", "sideways"],
        ["--ensemble", "z", "--lambda", "1.0"],
        ["--ensemble", "z", "--condition-k", "3"],
    ],
)
def test_simulate_bad_flags(tmp_path, extra, capsys):
    args = list(SIM)
    for flag, value in zip(extra[::2], extra[1::2]):
        if flag in args:
            args[args.index(flag) + 1] = value
        else:
            args += [flag, value]
    try:
        code = _run(args + ["--out", tmp_path / "o.json"])
    except SystemExit as exc:  # argparse rejects choices before dispatch
        code = exc.code
    assert code == 1
    assert capsys.readouterr().err


def test_missing_required_flag_exits_1():
    with pytest.raises(SystemExit) as exc:
        cli.main(["simulate", "--ensemble", "z"])
    assert exc.value.code == 1


def test_simulate_empty_result(tmp_path):
    out = tmp_path / "e.json"
    args = ["simulate", "--ensemble", "z", "--lambda", "0.99", "--steps", "20", "--mode", "unfiltered",
            "--copies", "100", "--condition-k", "10", "--seed", "0", "--out", out]
    assert _run(args) == 2
    manifest = json.loads((tmp_path / "e.manifest.json").read_text())
    assert manifest["status"] == "empty" and manifest["acceptance_rate"] == 0.0


def test_simulate_io_error(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert _run(SIM + ["--ensemble", "z", "--out", blocker / "x.json"]) == 3


def test_oracle_small(tmp_path, capsys):
    out = tmp_path / "t4.csv"
    assert _run(["oracle", "--steps", "4", "--out", out]) == 0
    _, rows = stats.read_csv(out)
    assert [r[3] for r in rows if r[1] == "2"] == ["1", "2", "1"]
    manifest = json.loads((tmp_path / "t4.manifest.json").read_text())
    assert manifest["reflection_identity"]["passed"] is True
    assert manifest["no_return_walks"] == 6
    assert "PASS" in capsys.readouterr().out


def test_oracle_sixteen(tmp_path):
    out = tmp_path / "t16.json"
    assert _run(["oracle", "--steps", "16", "--out", out]) == 0
    manifest = json.loads((tmp_path / "t16.manifest.json").read_text())
    assert manifest["reflection_identity"]["passed"] and not manifest["reflection_identity"]["violations"]
    assert json.loads(out.read_text())["data"]["columns"] == ["T", "k", "l", "count"]


def test_oracle_quantum_null_result(tmp_path):
    pmfs = {}
    for state in ("x+", "z0"):
        out = tmp_path / f"{state}.json"
        args = ["oracle", "--steps", "12", "--quantum", "--lambda", "0.5", "--state", state,
                "--condition-k", "3", "--out", out]
        assert _run(args) == 0
        pmfs[state] = [row[2] for row in json.loads(out.read_text())["data"]["rows"]]
    np.testing.assert_allclose(pmfs["x+"], pmfs["z0"], atol=1e-12)
    np.testing.assert_allclose(pmfs["z0"], [1 / 8, 3 / 8, 3 / 8, 1 / 8], atol=1e-12)


@pytest.mark.parametrize("args", [["--steps", "26"], ["--steps", "5"], ["--steps", "22", "--quantum", "--lambda", "0.5", "--condition-k", "2"], ["--steps", "8", "--quantum"]])
def test_oracle_bad_input(tmp_path, args):
    assert _run(["oracle", *args, "--out", tmp_path / "o.csv"]) == 1


def test_verify_passes(capsys):
    assert _run(["verify", "--cases", "10"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 9 and "commutation" in out


def test_verify_default_cases(capsys):
    assert _run(["verify"]) == 0
    assert "1000" in capsys.readouterr().out


def test_verify_catches_sign_flip(monkeypatch, capsys):
    good = qc.build_measurement_pair

    def corrupted(lam):
        pair = good(lam)
        return qc.MeasurementPair(pair.m_plus, pair.m_minus @ np.diag([1, -1]), pair.strength)

    monkeypatch.setattr(qc, "build_measurement_pair", corrupted)
    assert _run(["verify", "--cases", "50"]) == 4
    err = capsys.readouterr().err
    assert "commutation" in err and "lambda" in err


def test_tomography(tmp_path):
    out = tmp_path / "t.json"
    assert _run(["tomography", "--state", "z0", "--lambda", "0.5", "--shots-per-axis", "1000000",
                 "--seed", "3", "--out", out]) == 0
    data = json.loads(out.read_text())["data"]
    assert data["error_norm"] < 0.01
    assert data["true"] == [0.0, 0.0, 1.0]
    assert (tmp_path / "t.manifest.json").exists()


def test_tomography_projective(tmp_path):
    out = tmp_path / "p.json"
    assert _run(["tomography", "--state", "z0", "--lambda", "1", "--shots-per-axis", "10000",
                 "--seed", "3", "--out", out]) == 0
    assert json.loads(out.read_text())["data"]["error_norm"] < 0.05


def test_tomography_custom_state(tmp_path):
    out = tmp_path / "c.json"
    assert _run(["tomography", "--state", "0.6,0,0.8,0", "--lambda", "0.7", "--shots-per-axis", "200000",
                 "--seed", "9", "--out", out]) == 0
    data = json.loads(out.read_text())["data"]
    assert math.dist(data["true"], [0.96, 0.0, -0.28]) < 1e-12


@pytest.mark.parametrize("args", [["--lambda", "0"], ["--lambda", "0.5", "--state", "bogus"], ["--lambda", "0.5", "--shots-per-axis", "0"]])
def test_tomography_refused(tmp_path, args):
    base = {"--state": "z0", "--lambda": "0.5", "--shots-per-axis": "100", "--seed": "0"}
    for flag, value in zip(args[::2], args[1::2]):
        base[flag] = value
    argv = ["tomography"] + [x for kv in base.items() for x in kv] + ["--out", str(tmp_path / "t.json")]
    assert cli.main(argv) == 1


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "povm_reversal", "oracle", "--steps", "2", "--out", str(tmp_path / "t.csv")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "t.csv").read_text() == "T,k,l,count\n2,1,0,1\n2,1,1,1\n"
