import csv
import io
import json
import subprocess
import sys

import pytest

from hypertn.cli import main, parse_grid
from hypertn.experiments import SPECTRAL_COLUMNS, THREE_POINT_COLUMNS, ConfigError


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_central_charge_prints_value(capsys):
    code, out, _ = run(["central-charge"], capsys)
    assert code == 0 and out.strip() == "18.947681"
    code, out, _ = run(["central-charge", "--format", "json"], capsys)
    assert json.loads(out)["central_charge_bound"] == pytest.approx(18.9477, abs=1e-4)


def test_parse_grid_forms():
    assert parse_grid("3") == ((0.0, 0.5, 1.0), (0.0, 0.5, 1.0))
    assert parse_grid("2x1") == ((0.0, 1.0), (0.0,))
    assert parse_grid("0.302;0.817,0.9") == ((0.302,), (0.817, 0.9))
    for bad in ("abc", "0x3", "1;2;3"):
        with pytest.raises(ConfigError):
            parse_grid(bad)


def test_sweep_csv_header_and_rows(capsys):
    code, out, _ = run(["sweep", "--grid", "0.302;0.817", "--turn", "both"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert tuple(rows[0].keys()) == SPECTRAL_COLUMNS
    assert [r["turn"] for r in rows] == ["right", "left"]
    assert float(rows[0]["lambda2"]) == pytest.approx(0.083127, abs=1e-6)
    assert float(rows[0]["delta"]) == pytest.approx(1.8887, abs=1e-4)


def test_sweep_zero_entangler_reports_infinite_delta(capsys):
    code, out, _ = run(["sweep", "--grid", "0;0"], capsys)
    row = next(csv.DictReader(io.StringIO(out)))
    assert code == 0 and row["delta"] == "inf"


def test_scan_is_deterministic(tmp_path, capsys):
    files = []
    for k in range(2):
        path = tmp_path / f"scan{k}.csv"
        code, _, err = run(["scan", "--seed", "7", "--samples", "3", "--out", str(path)], capsys)
        assert code == 0 and json.loads(err)["all_delta_positive"]
        files.append(path.read_text())
    assert files[0] == files[1]
    rows = list(csv.DictReader(io.StringIO(files[0])))
    assert len(rows) == 3 and all(float(r["delta"]) > 0 for r in rows)


def test_scan_parallel_matches_serial(tmp_path, capsys):
    serial, parallel = tmp_path / "s.csv", tmp_path / "p.csv"
    run(["scan", "--seed", "3", "--samples", "2", "--threads", "1", "--out", str(serial)], capsys)
    run(["scan", "--seed", "3", "--samples", "2", "--threads", "2", "--out", str(parallel)], capsys)
    assert serial.read_text() == parallel.read_text()


def test_scan_jsonl_has_provenance(capsys):
    code, out, _ = run(["scan", "--seed", "1", "--samples", "1", "--format", "jsonl"], capsys)
    record = json.loads(out.splitlines()[0])
    assert code == 0 and "provenance" in record and "wall_time" in record


def test_three_point_output(capsys):
    code, out, err = run(["three-point", "--seed", "5", "--samples", "3"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert tuple(rows[0].keys()) == THREE_POINT_COLUMNS and len(rows) == 3
    for r in rows:
        assert r["dismissed"] == "0"
        assert abs(float(r["C_imag"])) < 1e-8 * max(1.0, abs(float(r["C_real"])))
    assert "dismissal_rate" in err


def test_net_dump_formats(capsys):
    code, out, _ = run(["net-dump", "--layers", "1"], capsys)
    assert code == 0 and len(json.loads(out)["tiles"]) == 11
    code, out, _ = run(["net-dump", "--layers", "1", "--format", "csv"], capsys)
    assert code == 0 and out.count(" -- ") == 40


def test_verify_passes_and_fault_is_caught(capsys):
    code, out, _ = run(["verify"], capsys)
    report = json.loads(out)
    assert code == 0 and report["passed"]
    for fault in ("cnot-frame", "haar-frame"):
        code, out, err = run(["verify", "--inject-fault", fault], capsys)
        assert code == 1 and "verification failed" in err
        assert not json.loads(out)["passed"]


@pytest.mark.parametrize(
    "argv",
    [
        ["scan", "--samples", "2"],
        ["three-point", "--seed", "1", "--ports", "0,1"],
        ["three-point", "--seed", "1", "-a", "2"],
        ["sweep", "--grid", "bad"],
        ["net-dump", "--layers", "-1"],
        ["scan", "--seed", "1", "--threads", "0"],
    ],
)
def test_config_errors_exit_2(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 2 and "configuration error" in err


def test_unknown_option_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["scan", "--bogus"])
    assert exc.value.code == 2


def test_threads_env_override(monkeypatch, capsys):
    monkeypatch.setenv("HYPERTN_THREADS", "0")
    code, _, _ = run(["central-charge"], capsys)
    assert code == 2


def test_console_script_entry():
    proc = subprocess.run([sys.executable, "-m", "hypertn.cli", "central-charge"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == "18.947681"
