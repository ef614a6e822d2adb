import csv
import io
import json

import pytest
from click.testing import CliRunner

from confhyp.cli import DEFAULT_SCENES, main


@pytest.fixture
def runner():
    return CliRunner()


def _json(result):
    doc = json.loads(result.output)
    doc.pop("timing", None)
    return doc


@pytest.mark.parametrize("command", sorted(DEFAULT_SCENES))
def test_default_scene_passes(runner, command):
    res = runner.invoke(main, [command, "--format", "json"])
    assert res.exit_code == 0, res.output
    doc = json.loads(res.output)
    assert doc["command"] == command and doc["passed"]
    assert doc["checks"]


def test_json_is_deterministic(runner):
    a = runner.invoke(main, ["yamabe", "--format", "json", "--seed", "3"])
    b = runner.invoke(main, ["yamabe", "--format", "json", "--seed", "3"])
    assert _json(a) == _json(b)


def test_table_and_out_file(runner, tmp_path):
    out = tmp_path / "r.txt"
    res = runner.invoke(main, ["invariants", "--out", str(out)])
    assert res.exit_code == 0
    assert "PASS" in out.read_text() or "pass" in out.read_text().lower()


def test_energy_samples_csv(runner):
    res = runner.invoke(main, ["energy", "--format", "csv", "--samples"])
    assert res.exit_code == 0, res.output
    rows = list(csv.DictReader(io.StringIO(res.output)))
    assert len(rows) > 10
    assert {"integrand", "dA"} <= set(rows[0])


def test_tight_tolerance_fails(runner):
    res = runner.invoke(main, ["gradient-check", "--tol", "1e-14", "--format", "json"])
    assert res.exit_code == 1
    assert not json.loads(res.output)["passed"]


def _scene(tmp_path, text):
    p = tmp_path / "scene.json"
    p.write_text(text)
    return str(p)


def test_unknown_key(runner, tmp_path):
    path = _scene(tmp_path, '{\n  "d": 3,\n  "colour": "red"\n}\n')
    res = runner.invoke(main, ["invariants", "--scene", path])
    assert res.exit_code == 2
    assert f"{path}:3:3" in res.output and "colour" in res.output


def test_bad_expression_position(runner, tmp_path):
    text = '{\n  "d": 3,\n  "hypersurface": {"kind": "graph", "f": "x^2 + *y"}\n}\n'
    path = _scene(tmp_path, text)
    res = runner.invoke(main, ["invariants", "--scene", path])
    assert res.exit_code == 2
    col = text.split("\n")[2].index("*y") + 1
    assert f"{path}:3:{col}" in res.output


def test_invalid_json_position(runner, tmp_path):
    path = _scene(tmp_path, '{\n  "d": 3,,\n}\n')
    res = runner.invoke(main, ["invariants", "--scene", path])
    assert res.exit_code == 2
    assert f"{path}:2:" in res.output


def test_wrong_type(runner, tmp_path):
    path = _scene(tmp_path, '{"d": "three"}')
    res = runner.invoke(main, ["invariants", "--scene", path])
    assert res.exit_code == 2


def test_missing_section(runner, tmp_path):
    path = _scene(tmp_path, '{"d": 3}')
    res = runner.invoke(main, ["energy", "--scene", path])
    assert res.exit_code == 2
    assert "closed_surface" in res.output


def test_usage_error(runner):
    assert runner.invoke(main, ["yamabe", "--order", "1"]).exit_code == 2
    assert runner.invoke(main, ["no-such-command"]).exit_code == 2


def test_selftest_quick(runner):
    res = runner.invoke(main, ["selftest", "--quick", "--format", "json"])
    assert res.exit_code == 0, res.output[-2000:]
    doc = json.loads(res.output)
    assert doc["passed"] and len(doc["checks"]) > 20
