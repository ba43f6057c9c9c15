import io
import json
import math

import pytest

from bishoplab.cli import COMMANDS, COMMON, RunConfig, main, parse_config_text, run
from bishoplab.errors import ConfigError


def run_json(command, **flags):
    buf = io.StringIO()
    code = run(RunConfig.resolve(command, {}, flags), buf)
    return code, json.loads(buf.getvalue()) if code == 0 else None


def test_spectral_radius_example():
    code, doc = run_json("spectral-radius", weight="x")
    assert code == 0
    assert doc["schema_version"] == 1 and doc["command"] == "spectral-radius"
    assert doc["result"]["r"] == pytest.approx(math.exp(-1), rel=1e-15)
    # every default is echoed into the output
    assert set(doc["config"]) == set(COMMANDS["spectral-radius"]) | set(COMMON)


def test_discrepancy_example(tmp_path):
    out = tmp_path / "d.json"
    assert main(["discrepancy", "--alpha", "golden", "--N", "5", "--x0", "0", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["result"]["table"][0]["D_N"] == pytest.approx(0.2721, abs=1e-4)


def test_discrepancy_csv(tmp_path):
    path = tmp_path / "d.csv"
    code, _ = run_json("discrepancy", N="10,100", csv=str(path))
    assert code == 0
    raw = path.read_bytes()
    assert b"\r" not in raw
    rows = raw.decode("utf-8").strip().split("\n")
    assert len(rows) == 3 and rows[1].startswith("10,")


def test_summary_goes_to_stdout_when_writing_a_file(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["liouville-gen", "--n-max", "5", "--out", str(out)]) == 0
    assert capsys.readouterr().out.startswith("liouville-gen: alpha ~ 0.110001")
    assert json.loads(out.read_text())["result"]["report"]["n0"] == 4


def test_type_check_and_bounds_scan():
    code, doc = run_json("type-check", alpha="golden", psi="constant:3", Q="1000")
    assert code == 0 and doc["result"]["verdict"] == "consistent"
    code, doc = run_json("bounds-scan", n_list="100,1000", G="5", direction="forward")
    assert code == 0 and doc["result"]["violations"] == 0


def test_exceptional_measure_is_seeded():
    _, a = run_json("exceptional-measure", samples="2000", seed="3")
    _, b = run_json("exceptional-measure", samples="2000", seed="3")
    _, c = run_json("exceptional-measure", samples="2000", seed="4")
    assert a == b
    assert a["result"] != c["result"]


def test_byte_identical_reproducibility(tmp_path):
    outs = []
    for k in range(2):
        p = tmp_path / f"c{k}.json"
        assert main(["calculus-apply", "--M", "256", "--G", "64", "--out", str(p)]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_config_file_precedence_and_roundtrip(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text("command = discrepancy\n# comment\nN = 5,8\nx0 = 0.3\n", encoding="utf-8")
    out = tmp_path / "d.json"
    assert main(["discrepancy", "--config", str(cfg_path), "--x0", "0", "--out", str(out)]) == 0
    conf = json.loads(out.read_text())["config"]
    assert conf["N"] == [5, 8] and conf["x0"] == 0.0

    file_values = parse_config_text(cfg_path.read_text())
    assert file_values.pop("command") == "discrepancy"
    cfg = RunConfig.resolve("discrepancy", file_values, {"direction": "backward"}, "x.json")
    assert RunConfig.from_text(cfg.to_text()) == cfg


def test_validation_errors(tmp_path, capsys):
    with pytest.raises(ConfigError):
        RunConfig.resolve("discrepancy", {"bogus": 1}, {})
    with pytest.raises(ConfigError):
        RunConfig.resolve("discrepancy", {}, {"N": "1.5"})
    with pytest.raises(ConfigError):
        RunConfig.resolve("nope", {}, {})
    cfg_path = tmp_path / "bad.cfg"
    cfg_path.write_text("command = type-check\n", encoding="utf-8")
    assert main(["discrepancy", "--config", str(cfg_path)]) == 2
    assert main(["discrepancy", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert main(["bounds-scan", "--direction", "sideways"]) == 2
    with pytest.raises(SystemExit) as e:
        main(["type-check", "--bogus", "1"])
    assert e.value.code == 2


def test_rational_angle_is_rejected(capsys):
    assert main(["exceptional-measure", "--alpha", "1/3"]) == 2
    err = capsys.readouterr().err
    assert "rational" in err and "period 3" in err and "not ergodic" in err


def test_rational_angle_is_fine_where_ergodicity_is_not_needed():
    code, doc = run_json("discrepancy", alpha="1/3", N="3")
    assert code == 0
    assert doc["result"]["table"][0]["D_N"] == pytest.approx(1 / 3)


def test_numeric_abort_carries_a_stage(capsys):
    assert main(["calculus-apply", "--epsilon", "1", "--M", "64"]) == 3
    assert capsys.readouterr().err.startswith("numeric abort [")


@pytest.mark.slow
def test_demo_defaults(tmp_path, capsys):
    out = tmp_path / "demo.json"
    assert main(["demo-subspace", "--out", str(out)]) == 0
    res = json.loads(out.read_text())["result"]
    assert res["passed"] is True
    assert [c["name"] for c in res["certificates"]] == ["disjointness", "nonzero_witness", "membership",
                                                        "nontriviality"]
    assert "FAIL" not in capsys.readouterr().out
