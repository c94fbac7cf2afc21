import csv
import json
from importlib.resources import files
from pathlib import Path

import numpy as np
import pytest

from momentqm.cli import ConfigError, build_config, load_config, main, run, splitmix64, substream, substream_seed, suite
from momentqm.cli.runner import check_assertion, fmt
from momentqm.cli.scenarios import COLUMNS

ROTATION = """
scenario = "nu"
name = "rot"
seed = 5
[instance]
n = 1
[path]
type = "rotation"
m = [1, 2]
[params]
inverse = true
[[assert]]
label = "rotation/m?"
column = "residual"
check = "abs_below"
tol = 1e-9
"""

RANDOM = """
scenario = "nu"
name = "rnd"
seed = 11
[instance]
n = 2
[path]
type = "random"
count = 3
pieces = 2
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_splitmix64_reference_vectors():
    assert f"{substream_seed(0, 0):016x}" == "e220a8397b1dcdaf"
    assert f"{substream_seed(0, 1):016x}" == "6e789e6aa1b965f4"
    assert f"{substream_seed(0, 2):016x}" == "06c45d188009454f"
    assert splitmix64(0) == substream_seed(0, 0)
    a, b = substream(7, 16), substream(7, 17)
    assert a.random() != b.random()


def test_rotation_run(tmp_path):
    out = tmp_path / "o"
    res = run(write(tmp_path, "rot.toml", ROTATION), out)
    assert res.exit_code == 0 and res.status == "pass"
    rows = read_csv(out / "rot.csv")
    assert list(rows[0]) == list(COLUMNS)
    by = {r["label"]: r for r in rows}
    assert float(by["rotation/m1"]["value"]) == pytest.approx(-2 * np.pi, rel=1e-10)
    assert float(by["rotation/m2/inverse"]["value"]) == pytest.approx(0.0, abs=1e-9)
    record = json.loads((out / "rot.run.json").read_text())
    assert record["seed"] == 5 and record["exit_code"] == 0
    for item in record["outputs"]:
        assert (out / item["file"]).stat().st_size == item["bytes"]


def test_reruns_are_byte_identical(tmp_path):
    cfg = write(tmp_path, "rnd.toml", RANDOM)
    run(cfg, tmp_path / "a")
    run(cfg, tmp_path / "b", threads=3)
    assert (tmp_path / "a/rnd.csv").read_bytes() == (tmp_path / "b/rnd.csv").read_bytes()
    run(cfg, tmp_path / "c", seed=12)
    assert (tmp_path / "a/rnd.csv").read_bytes() != (tmp_path / "c/rnd.csv").read_bytes()
    assert json.loads((tmp_path / "c/rnd.run.json").read_text())["seed"] == 12


def test_failed_assertion_exit_code(tmp_path):
    text = ROTATION.replace('check = "abs_below"\ntol = 1e-9', 'check = "close"\nexpected = 1.0\ntol = 1e-9')
    res = run(write(tmp_path, "rot.toml", text), tmp_path / "o")
    assert res.exit_code == 1
    assert (tmp_path / "o/rot.csv").exists()


@pytest.mark.parametrize(
    "mutation",
    [
        ("n = 1", "n = -1"),
        ("n = 1", "n = 1\nbogus = 2"),
        ('scenario = "nu"', 'scenario = "nope"'),
        ('type = "rotation"', 'type = "spiral"'),
        ('column = "residual"', 'column = "nonsense"'),
    ],
)
def test_invalid_configs_write_nothing(tmp_path, mutation):
    cfg = write(tmp_path, "bad.toml", ROTATION.replace(*mutation))
    res = run(cfg, tmp_path / "o")
    assert res.exit_code == 2
    assert not (tmp_path / "o").exists()


def test_unparsable_toml(tmp_path):
    assert run(write(tmp_path, "bad.toml", "scenario = "), tmp_path / "o").exit_code == 2


def test_numerical_failure_writes_nothing(tmp_path):
    text = """
scenario = "ham2d-run"
name = "stiff"
[instance]
domain = "torus"
N = 16
dt = 0.5
[flow]
type = "expression"
H = "3 * sin(2 * pi * x)"
"""
    res = run(write(tmp_path, "stiff.toml", text), tmp_path / "o")
    assert res.exit_code == 3
    assert not (tmp_path / "o").exists()


def test_build_config_digest_and_seed_override():
    import tomli

    doc = tomli.loads(ROTATION)
    a = build_config(doc, None)
    b = build_config(doc, None, seed=99)
    assert a.seed == 5 and b.seed == 99
    assert a.digest == build_config(doc, None).digest
    with pytest.raises(ConfigError):
        build_config({**doc, "extra": 1}, None)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "none.toml")


def test_suite_isolates_failures(tmp_path):
    d = tmp_path / "cfgs"
    d.mkdir()
    write(d, "a_rot.toml", ROTATION)
    write(d, "b_broken.toml", "scenario = 3")
    write(d, "c_rnd.toml", RANDOM)
    code = suite(d, tmp_path / "out", threads=2)
    assert code == 1
    rows = read_csv(tmp_path / "out/suite_summary.csv")
    assert [r["status"] for r in rows] == ["pass", "invalid", "pass"]
    assert (tmp_path / "out/c_rnd/rnd.csv").exists()


def test_empty_suite(tmp_path):
    (tmp_path / "empty").mkdir()
    assert suite(tmp_path / "empty", tmp_path / "out") == 0
    assert (tmp_path / "out/suite_summary.csv").read_text().count("\n") == 1
    assert suite(tmp_path / "missing", tmp_path / "out") == 2


def test_main_entry(tmp_path, capsys):
    assert main(["schema"]) == 0
    assert "top" in json.loads(capsys.readouterr().out)
    assert main(["run", str(write(tmp_path, "rot.toml", ROTATION)), "--out", str(tmp_path / "o")]) == 0
    with pytest.raises(SystemExit):
        main(["run", "x.toml", "--threads", "0"])


def test_fmt_is_round_trip():
    v = 0.1 + 0.2
    assert float(fmt(v)) == v
    assert fmt(float("nan")) == "nan" and fmt(None) == "" and fmt(np.int64(3)) == "3" and fmt(True) == "true"


@pytest.mark.parametrize(
    "check,value,extra,passed",
    [
        ("close", 1.05, {"expected": 1.0, "tol": 0.1}, True),
        ("abs_below", -0.2, {"tol": 0.1}, False),
        ("below", 1.05, {"expected": 1.0, "tol": 0.1}, True),
        ("above", 0.8, {"expected": 1.0, "tol": 0.1}, False),
        ("within_error", 0.3, {"tol": 0.0}, True),
        ("rel_below", 0.3, {"tol": 0.1}, True),
    ],
)
def test_check_assertion(check, value, extra, passed):
    rows = [{"label": "a/b", "value": value, "error": 0.5, "reference": 4.0}]
    ok, _ = check_assertion({"label": "a/*", "column": "value", "check": check, **extra}, rows)
    assert ok is passed


def test_assertion_without_rows_fails():
    ok, detail = check_assertion({"label": "zzz", "column": "value", "check": "abs_below", "tol": 1}, [])
    assert not ok and "no rows" in detail


def test_column_documentation_matches_header():
    doc = json.loads((files("momentqm.cli") / "csv_columns.json").read_text())
    assert list(doc["columns"]) == list(COLUMNS)


def test_shipped_configs_validate():
    root = Path(__file__).resolve().parents[1] / "configs"
    paths = sorted(root.rglob("*.toml"))
    assert paths
    for p in paths:
        load_config(p)
