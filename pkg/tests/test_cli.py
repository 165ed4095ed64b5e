import csv
import json
import math
import subprocess
import sys

import pytest

from slitloops import kappa_scan
from slitloops.cli import CSV_COLUMNS, ExitCode, main


def run_cli(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def out(tmp_path):
    return tmp_path / "scan.csv"


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestScan:
    def test_csv_matches_library(self, out, photon):
        assert run_cli("--preset", "photon", "--scan", -1e-3, 1e-3, 5, "--out", out) == 0
        rows = read_csv(out)
        assert tuple(rows[0]) == CSV_COLUMNS
        ref = kappa_scan(photon, -1e-3, 1e-3, 5)
        assert [float(r["kappa_full"]) for r in rows] == ref.kappa_full
        assert all(r["point_valid"] == "true" for r in rows)

    def test_negative_exponent_arguments(self, out):
        assert run_cli("--preset", "photon", "--scan", "-1.5e-3", "1.5e-3", "3", "--out", out) == 0
        assert float(read_csv(out)[0]["y_detector_m"]) == -1.5e-3

    def test_sidecar(self, out):
        run_cli("--preset", "photon", "--scan", -1e-4, 1e-4, 3, "--out", out)
        meta = json.loads((out.parent / (out.name + ".meta.json")).read_text())
        assert meta["source"] == "preset:photon"
        assert meta["scan"] == [-1e-4, 1e-4, 3]
        assert meta["error_budget"]["leading_source"] == "fraunhofer"
        assert meta["quadrature"]["points_per_cycle"] == 20.0
        assert "wall_clock_s" in meta and "started_utc" in meta

    def test_reproducible(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_cli("--preset", "photon", "--scan", -5e-4, 5e-4, 7, "--out", a)
        run_cli("--preset", "photon", "--scan", -5e-4, 5e-4, 7, "--out", b)
        assert a.read_bytes() == b.read_bytes()

    def test_rerun_from_sidecar(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_cli("--preset", "photon", "--scan", -5e-4, 5e-4, 7, "--tolerance", 1e-10, "--out", a)
        assert run_cli("--config", str(a) + ".meta.json", "--out", b) == 0
        assert a.read_bytes() == b.read_bytes()
        assert json.loads((tmp_path / "b.csv.meta.json").read_text())["quadrature"]["rel_tolerance"] == 1e-10

    def test_json_output(self, tmp_path):
        path = tmp_path / "s.json"
        assert run_cli("--preset", "photon", "--scan", -1e-4, 1e-4, 3, "--out", path) == 0
        data = json.loads(path.read_text())
        assert len(data["kappa_full"]) == 3 and data["metadata"]["normalization"] == "central_max"

    def test_stdout_when_no_out(self, capsys):
        assert run_cli("--preset", "photon", "--scan", -1e-4, 1e-4, 2) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS) and len(lines) == 3

    def test_disable_nonclassical(self, out):
        run_cli("--preset", "photon", "--scan", -1e-4, 1e-4, 3, "--disable-nonclassical", "--out", out)
        assert all(float(r["kappa_full"]) == 0.0 for r in read_csv(out))

    def test_invalid_points_written_as_nan(self, tmp_path, out):
        cfg = tmp_path / "far.yaml"
        cfg.write_text(
            "wavelength_m: 810e-9\nslit_centers_m: [-1.0e-4, 0.0, 1.0e-4]\nslit_width_m: 3.0e-5\n"
            "source_distance_m: 100\nscreen_distance_m: 100\n"
        )
        y0 = 810e-9 * 100 / 30e-6
        code = run_cli("--config", cfg, "--scan", -y0, y0, 3, "--normalization", "interference-sum", "--out", out)
        assert code == 0
        rows = read_csv(out)
        assert [r["point_valid"] for r in rows] == ["false", "true", "false"]
        assert rows[0]["kappa_full"] == "nan" and math.isfinite(float(rows[1]["kappa_full"]))


class TestPointAndErrors:
    def test_point(self, capsys):
        assert run_cli("--preset", "photon", "--point", 0) == 0
        text = capsys.readouterr().out
        kappa = float(next(l.split()[1] for l in text.splitlines() if l.startswith("kappa_full")))
        assert kappa == pytest.approx(-7.648465e-7, rel=1e-6)

    def test_errors_only(self, capsys):
        assert run_cli("--preset", "photon", "--errors") == 0
        text = capsys.readouterr().out
        assert "6.389e-04" in text and "(fraunhofer)" in text

    def test_material_flags(self, capsys):
        run_cli("--preset", "photon", "--errors", "--thickness", 0)
        assert "metal transmission    1.000e+00" in capsys.readouterr().out


class TestExitCodes:
    def test_usage(self):
        with pytest.raises(SystemExit) as info:
            run_cli("--scan", 0, 1, 3)
        assert info.value.code == ExitCode.USAGE

    def test_nothing_to_do(self):
        assert run_cli("--preset", "photon") == ExitCode.VALIDATION

    def test_unparseable_config(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("a: [1,\n")
        assert run_cli("--config", bad, "--point", 0) == ExitCode.CONFIG_PARSE

    def test_missing_config(self, tmp_path):
        assert run_cli("--config", tmp_path / "nope.yaml", "--point", 0) == ExitCode.CONFIG_PARSE

    def test_invalid_setup(self, tmp_path):
        cfg = tmp_path / "neg.yaml"
        cfg.write_text(
            "wavelength_m: 810e-9\nslit_centers_m: [-1.0e-4, 0.0, 1.0e-4]\nslit_width_m: -3.0e-5\n"
            "source_distance_m: 0.18\nscreen_distance_m: 0.18\n"
        )
        assert run_cli("--config", cfg, "--point", 0) == ExitCode.VALIDATION

    def test_bad_scan(self):
        assert run_cli("--preset", "photon", "--scan", 1, 0, 3) == ExitCode.VALIDATION
        assert run_cli("--preset", "photon", "--scan", 0, 1, 2.5) == ExitCode.VALIDATION

    def test_unwritable_output(self, tmp_path):
        assert run_cli("--preset", "photon", "--point", 0, "--out", tmp_path / "missing" / "x.csv") == ExitCode.OUTPUT
        assert run_cli("--preset", "photon", "--point", 0, "--out", tmp_path) == ExitCode.OUTPUT

    def test_no_partial_file_on_failure(self, tmp_path):
        out = tmp_path / "x.csv"
        code = run_cli(
            "--preset", "photon", "--point", 0, "--points-per-cycle", 4,
            "--max-refinements", 1, "--tolerance", 1e-14, "--out", out,
        )
        assert code == ExitCode.NUMERICAL
        assert list(tmp_path.iterdir()) == []


def test_entry_point_subprocess():
    res = subprocess.run([sys.executable, "-m", "slitloops", "--version"], capture_output=True, text=True, timeout=120)
    assert res.returncode == 0 and res.stdout.startswith("slitloops ")
