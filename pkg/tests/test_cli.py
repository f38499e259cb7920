import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from koblab import cli

SPECS = Path(__file__).resolve().parents[1] / "specs"


def run(tmp_path, *args):
    out = tmp_path / "out"
    code = cli.main([*map(str, args), "--out", str(out)])
    return code, (out.read_text() if out.exists() else None)


def test_curvature_json(tmp_path):
    code, text = run(tmp_path, "curvature", "--spec", SPECS / "poincare_disc.json", "--samples", 5)
    doc = json.loads(text)
    assert code == 0 and doc["exit_code"] == 0 and doc["command"] == "curvature"
    assert doc["result"]["K_max"] == pytest.approx(-4.0, abs=1e-4)
    assert doc["config"]["samples"] == 5 and doc["version"]


def test_output_is_byte_identical(tmp_path):
    args = ("metric", "--spec", SPECS / "poincare_disc.json", "--p", "0.1,0.2", "--xi", "1,0",
            "--N", 17, "--n-radii", 3, "--c", 4)
    _, a = run(tmp_path, *args)
    _, b = run(tmp_path, *args)
    assert a == b


def test_metric_csv(tmp_path):
    code, text = run(tmp_path, "metric", "--spec", SPECS / "euclidean.json", "--p", "0,0", "--xi", "1,0",
                     "--scales", "1,2", "--N", 17, "--r-cap", 4, "--n-radii", 1, "--format", "csv")
    lines = text.splitlines()
    assert code == 0 and lines[0].startswith("# koblab ")
    rows = list(csv.reader(lines[1:]))
    assert rows[0][:4] == ["p1", "p2", "xi1", "xi2"]
    assert [float(r[4]) for r in rows[1:]] == pytest.approx([0.25, 0.5])


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"spec": str(SPECS / "flat_torus.json"), "samples": 3, "seed": 4}))
    code, text = run(tmp_path, "curvature", "--config", cfg, "--samples", 2)
    doc = json.loads(text)
    assert code == 0 and doc["config"]["samples"] == 2 and doc["config"]["seed"] == 4


@pytest.mark.parametrize("payload", [{"spec": "x.json", "bogus": 1}, "[1, 2]"])
def test_strict_config(tmp_path, payload):
    cfg = tmp_path / "c.json"
    cfg.write_text(payload if isinstance(payload, str) else json.dumps(payload))
    assert cli.main(["curvature", "--config", str(cfg)]) == cli.EXIT_CONFIG


def test_config_errors_exit_2(tmp_path):
    assert cli.main(["curvature"]) == cli.EXIT_CONFIG
    assert cli.main(["nope"]) == cli.EXIT_CONFIG
    assert cli.main(["curvature", "--spec", str(tmp_path / "missing.json")]) == cli.EXIT_CONFIG
    assert cli.main(["disc", "--spec", str(SPECS / "poincare_disc.json"), "--p", "0,0", "--N", "4"]) == cli.EXIT_CONFIG
    assert cli.main(["metric", "--spec", str(SPECS / "poincare_disc.json"), "--p", "a,b"]) == cli.EXIT_CONFIG


def test_disc_numerical_failure_exit_3(tmp_path):
    code, text = run(tmp_path, "disc", "--spec", SPECS / "poincare_disc.json", "--p", "0,0", "--N", 9,
                     "--tol-c", "1e-14")
    assert code == cli.EXIT_NUMERICAL and json.loads(text)["result"]["admissible"] is False


def test_certificate_failure_exit_4(tmp_path):
    code, text = run(tmp_path, "certify", "--spec", SPECS / "euclidean.json", "--t0", "0.5", "--samples", 2)
    assert code == cli.EXIT_CERTIFICATE
    assert json.loads(text)["result"]["error"] == "PreconditionFailed"


def test_distance_equal_points(tmp_path):
    code, text = run(tmp_path, "distance", "--spec", SPECS / "poincare_disc.json", "--p", "0.1,0",
                     "--q", "0.1,0", "--N", 17)
    res = json.loads(text)["result"]
    assert code == 0 and res["chain"]["value"] == 0.0 and res["integrated"]["value"] == 0.0
    assert res["relative_gap"] == 0.0 and res["poincare_exact"] == 0.0


def test_brody_torus(tmp_path):
    code, text = run(tmp_path, "brody", "--spec", SPECS / "flat_torus.json", "--count", 4)
    res = json.loads(text)["result"]
    assert code == 0 and res["verdict"] == "NONCONSTANT_LIMIT"
    assert len(res["sequence"]["records"]) == 4


def test_brody_witness_invalid_exit_4(tmp_path):
    code, text = run(tmp_path, "brody", "--spec", SPECS / "poincare_disc.json", "--family", "radial",
                     "--count", 8, "--scale", 4)
    assert code == cli.EXIT_CERTIFICATE and json.loads(text)["result"]["error"] == "WitnessInvalid"


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "koblab.cli", "curvature", "--spec",
                           str(SPECS / "euclidean.json"), "--samples", "2", "--format", "csv"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.startswith("# koblab ") and "K" in proc.stdout.splitlines()[1]
