import csv
import json

import jsonschema
import numpy as np
import pytest

from adm_shells.cli import build_parser, main, resolve_config
from adm_shells.config import SCHEMA, RunConfig, load_config


def _run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def test_default_config_round_trips_through_the_schema(tmp_path):
    cfg = RunConfig()
    jsonschema.validate(cfg.to_json(), SCHEMA)
    path = tmp_path / "c.json"
    path.write_text(cfg.dumps())
    assert load_config(path) == cfg


@pytest.mark.parametrize(
    "bad",
    [{"bogus": 1}, {"alpha": [0, 0]}, {"k_list": [0.5]}, {"seed": {"x": 1.0}}, {"corrector": {"L": 1}}],
)
def test_invalid_config_exits_2(tmp_path, bad, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    assert _run(tmp_path, "adm", "--config", str(path)) == 2
    assert "invalid configuration" in capsys.readouterr().err


def test_overrides():
    args = build_parser().parse_args(["adm", "--resolution", "32x64", "--k", "2,4", "--radii", "10,20,40", "--no-E-normalization"])
    cfg = resolve_config(args)
    assert cfg.resolution == (32, 64) and cfg.k_list == (2.0, 4.0) and cfg.radii == (10.0, 20.0, 40.0)
    assert cfg.normalize_by_E is False
    with pytest.raises(SystemExit):
        build_parser().parse_args(["adm", "--resolution", "64by128"])


def test_bad_overrides_exit_2(tmp_path):
    assert _run(tmp_path, "adm", "--k", "0.5") == 2
    assert _run(tmp_path, "adm", "--radii", "10,20") == 2


def test_schema_command(tmp_path):
    assert _run(tmp_path, "schema") == 0
    assert json.loads((tmp_path / "config.schema.json").read_text()) == SCHEMA
    assert json.loads((tmp_path / "config.json").read_text()) == json.loads(json.dumps(RunConfig(out_dir=str(tmp_path)).to_json()))


def test_verify_passes_for_defaults_and_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["verify", "--out", str(a)]) == 0
    assert main(["verify", "--out", str(b)]) == 0
    ra, rb = json.loads((a / "verify.json").read_text()), json.loads((b / "verify.json").read_text())
    assert ra["ok"] and ra["checks"] == rb["checks"]
    assert (a / "convergence.csv").read_text() == (b / "convergence.csv").read_text()
    rows = list(csv.reader((a / "convergence.csv").open()))
    assert rows[0] == ["resolution", "identity_error", "order"] and len(rows) == 5


def test_verify_names_the_broken_invariant(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text(json.dumps({"sigma_profile": [1.0, 1.95]}))
    assert _run(tmp_path, "verify", "--config", str(path)) == 1
    assert "FAIL profile_support_inside_unit_shell[sigma]" in capsys.readouterr().out
    report = json.loads((tmp_path / "verify.json").read_text())
    failed = [c["name"] for c in report["checks"] if not c["ok"]]
    assert failed == ["profile_support_inside_unit_shell[sigma]"]


def test_adm_reports_schwarzschild_mass(tmp_path):
    assert _run(tmp_path, "adm") == 0
    rep = json.loads((tmp_path / "adm.json").read_text())
    assert abs(rep["E"] - 1.0) < 1e-4
    assert len(list(csv.reader((tmp_path / "adm.csv").open()))) == 4


def test_target_zero_alpha_writes_a_two_shell_composition(tmp_path):
    path = tmp_path / "zero.json"
    path.write_text(json.dumps({"alpha": [0, 0, 0]}))
    assert _run(tmp_path, "target", "--config", str(path)) == 0
    rep = json.loads((tmp_path / "moments.json").read_text())
    comp = rep["angular"]["composition"]
    assert [c["scale"] for c in comp] == [4.0, 8.0]
    assert np.linalg.norm(comp[0]["moment"]["values"]) > 1
    assert np.max(np.abs(rep["angular"]["total"])) < 1e-10
    for name in ("sigma_k", "tau_k", "sigma_2k", "tau_2k"):
        assert (tmp_path / f"{name}.chsh").exists()


def test_target_reports_conventions(tmp_path):
    assert _run(tmp_path, "target") == 0
    rep = json.loads((tmp_path / "moments.json").read_text())
    assert rep["conventions"]["lambda"] == "-8 pi E alpha"
    m = rep["angular"]["moment"]["values"]
    assert np.linalg.norm(np.subtract(m, rep["angular"]["target"])) < 1e-6 * np.linalg.norm(m)


def test_moments_command_is_scale_invariant(tmp_path):
    assert _run(tmp_path, "moments", "--k", "2,8") == 0
    rows = list(csv.reader((tmp_path / "moments.csv").open()))
    a, b = [float(v) for v in rows[1][1:4]], [float(v) for v in rows[2][1:4]]
    assert np.allclose(a, b, rtol=1e-10, atol=1e-12)


def test_pipeline_command_small(tmp_path):
    path = tmp_path / "small.json"
    path.write_text(json.dumps({"k_list": [4], "corrector": {"L": 6, "ds": 0.04}}))
    assert _run(tmp_path, "pipeline", "--config", str(path)) == 0
    rep = json.loads((tmp_path / "pipeline.json").read_text())
    assert len(rep["rows"]) == 1 and "conventions" in rep
    assert (tmp_path / "pipeline.csv").read_text().startswith("k,A,")
