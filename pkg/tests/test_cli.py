import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from rabispec import RabiParams, oracle
from rabispec import cli


def run(capsys, *argv):
    status = cli.main(list(argv))
    out, err = capsys.readouterr()
    return status, out, err


def test_spectrum_csv_schema_and_values(capsys):
    status, out, _ = run(capsys, "rabi-spectrum", "--g", "1", "--delta", "0.4", "--xmax", "6")
    assert status == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == cli.LINE_COLUMNS
    for par in "+-":
        got = sorted(float(r["E"]) for r in rows if r["parity"] == par)
        ref = oracle.rabi_levels_below(RabiParams(1, 0.4, parity=par), 6.0, 1e-12)
        assert np.allclose(got, ref, atol=1e-8)


def test_floats_round_trip_through_csv(capsys):
    _, out, _ = run(capsys, "rabi-spectrum", "--g", "1", "--delta", "0.4", "--xmax", "3", "--no-check")
    text = [r["x"] for r in csv.DictReader(io.StringIO(out))]
    assert all(cli._fmt(float(t)) == t for t in text)


def test_json_round_trip_is_bit_exact(capsys, tmp_path):
    path = tmp_path / "lines.json"
    args = ["rabi-spectrum", "--g", "0.7", "--delta", "1.0", "--xmax", "5", "--format", "json"]
    assert cli.main(args + ["--output", str(path)]) == 0
    data = json.loads(path.read_text(encoding="utf-8"))
    _, out, _ = run(capsys, *args, "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [d["x"] for d in data] == [float(r["x"]) for r in rows]
    assert set(data[0]) == set(cli.LINE_COLUMNS)


def test_runs_are_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert cli.main(["rabi-sweep", "--g", "0.1:0.1:0.6", "--delta", "0.4", "--xmax", "3", "-o", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_trace_sign_changes_match_spectrum(capsys):
    _, out, _ = run(capsys, "gfunction-trace", "--g", "1", "--delta", "0.4", "--xmax", "6", "--samples", "1200")
    trace = list(csv.DictReader(io.StringIO(out)))
    _, out, _ = run(capsys, "rabi-spectrum", "--g", "1", "--delta", "0.4", "--xmax", "6")
    lines = list(csv.DictReader(io.StringIO(out)))
    x = np.array([float(r["x"]) for r in trace])
    step = x[1] - x[0]
    for col, par in (("G_plus", "+"), ("G_minus", "-")):
        v = np.array([float(r[col]) for r in trace])
        flip = np.flatnonzero(np.sign(v[:-1]) != np.sign(v[1:]))
        # flips across the poles at the integers are not roots
        roots = [x[i] for i in flip if np.floor(x[i]) == np.floor(x[i + 1])]
        levels = [float(r["x"]) for r in lines if r["parity"] == par]
        for a in roots:
            assert min(abs(a - lv) for lv in levels) < step
        # a uniform grid cannot separate a root from a pole closer than one step
        visible = [lv for lv in levels if x[0] < lv < x[-1] and abs(lv - round(lv)) > step]
        assert len(roots) == len(visible)


def test_omega_rescales_energies(capsys):
    _, out, _ = run(capsys, "rabi-spectrum", "--g", "2", "--delta", "0.8", "--omega", "2", "--xmax", "4", "--no-check")
    scaled = [float(r["E"]) for r in csv.DictReader(io.StringIO(out))]
    _, out, _ = run(capsys, "rabi-spectrum", "--g", "1", "--delta", "0.4", "--xmax", "4", "--no-check")
    plain = [float(r["E"]) for r in csv.DictReader(io.StringIO(out))]
    assert np.allclose(scaled, 2 * np.array(plain), rtol=1e-12)


def test_judd_points_table(capsys):
    status, out, _ = run(capsys, "judd-points", "--delta", "0.4", "--m-max", "2", "--g-range", "0.01:1", "--format", "json")
    rows = json.loads(out)
    assert status == 0 and {r["m"] for r in rows} == {1, 2}
    m1 = [r for r in rows if r["m"] == 1]
    assert m1[0]["g"] == pytest.approx(np.sqrt(1 - 0.16) / 2, rel=1e-12)


def test_census_rows(capsys):
    status, out, _ = run(capsys, "census", "--g", "1", "--delta", "0.4", "--xmax", "5")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert status == 0 and len(rows) == 10
    assert {r["count"] for r in rows} <= {"0", "1", "2"}
    assert all(r["violation"] == "False" for r in rows)


def test_verify_passes_and_reports(capsys, caplog):
    caplog.set_level("INFO", logger="rabispec")
    status, out, _ = run(capsys, "verify", "--g", "1", "--delta", "0.4", "--levels", "6")
    assert status == 0 and "verify PASS" in caplog.text
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 12 and max(float(r["dev_oracle"]) for r in rows) < 1e-8


def test_dicke_commands(capsys):
    status, out, _ = run(capsys, "dicke2-spectrum", "--g1", "0.5", "--g2", "0.5", "--delta1", "0.6", "--delta2", "0.4", "--k", "4")
    energies = [float(r["E"]) for r in csv.DictReader(io.StringIO(out)) if r["parity"] == "+"]
    assert status == 0 and min(abs(e - 1) for e in energies) < 1e-8
    status, out, _ = run(capsys, "dicke3-sweep", "--g", "0.1:0.1:0.3", "--delta", "0.7", "--k", "3")
    assert status == 0 and len(out.splitlines()) == 1 + 3 * 2 * 3


def test_contfrac_compare(capsys):
    status, out, _ = run(capsys, "contfrac-compare", "--g", "1", "--delta", "0.4", "--xmax", "4")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert status == 0 and max(float(r["difference"]) for r in rows) < 1e-6


@pytest.mark.parametrize(
    "argv",
    [
        ["rabi-spectrum", "--g", "1", "--delta", "0.4", "--xmax", "-1"],
        ["rabi-sweep", "--g", "0.5:0.1:0.2", "--delta", "0.4", "--xmax", "3"],
        ["rabi-spectrum", "--g", "1", "--delta", "0.4", "--xmax", "3", "--tol", "0"],
        ["rabi-spectrum", "--g", "1", "--delta", "0.4", "--xmax", "3", "--precision-bits", "24"],
        ["census", "--g", "0", "--delta", "0.4"],
        ["gfunction-trace", "--g", "1", "--delta", "0.4", "--xmin", "2", "--xmax", "1"],
    ],
)
def test_invalid_configuration_exits_2(capsys, argv):
    status, out, err = run(capsys, *argv)
    assert status == 2 and out == "" and "invalid configuration" in err


def test_unknown_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["rabi-spectrum", "--bogus"])
    assert info.value.code == 2


def test_computation_failure_exits_1(capsys):
    # the oracle cannot certify a cutoff for this coupling within its budget
    status, _, err = run(capsys, "dicke3-sweep", "--g", "40", "--delta", "0.7", "--k", "3")
    assert status == 1 and "computation failed" in err


def test_precision_from_environment(monkeypatch, capsys):
    monkeypatch.setenv("RABISPEC_PRECISION_BITS", "106")
    status, out, _ = run(capsys, "gfunction-trace", "--g", "1", "--delta", "0.4", "--xmax", "2", "--samples", "9")
    assert status == 0
    monkeypatch.delenv("RABISPEC_PRECISION_BITS")
    _, plain, _ = run(capsys, "gfunction-trace", "--g", "1", "--delta", "0.4", "--xmax", "2", "--samples", "9")
    hi = np.array([float(r["G_plus"]) for r in csv.DictReader(io.StringIO(out))])
    lo = np.array([float(r["G_plus"]) for r in csv.DictReader(io.StringIO(plain))])
    assert np.allclose(hi, lo, rtol=1e-12)
    monkeypatch.setenv("RABISPEC_PRECISION_BITS", "12")
    assert run(capsys, "gfunction-trace", "--g", "1", "--delta", "0.4", "--xmax", "2")[0] == 2


def test_parse_grid():
    assert np.allclose(cli.parse_grid("0.1:0.1:0.5"), [0.1, 0.2, 0.3, 0.4, 0.5])
    assert cli.parse_grid("0.7").tolist() == [0.7]
    with pytest.raises(cli.ConfigError):
        cli.parse_grid("1:2")


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "rabispec.cli", "judd-points", "--delta", "0.4", "--m-max", "1"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0 and proc.stdout.startswith("m,g,E,residual")
