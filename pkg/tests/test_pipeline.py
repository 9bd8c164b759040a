from dataclasses import replace

import numpy as np
import pytest

from adm_shells import pipeline
from adm_shells.config import CorrectorConfig


def test_radius_ladder_clears_every_shell(cfg):
    for k in (1.0, 4.0, 16.0, 64.0):
        radii = pipeline.radius_ladder(cfg, k)
        assert len(radii) == len(cfg.radii) and radii == sorted(radii)
        # the CM shell reaches 2 * CM_SHELL_FACTOR * k
        assert radii[0] >= 2 * pipeline.CM_SHELL_FACTOR * k
    assert pipeline.radius_ladder(cfg, 1.0) == [50.0, 100.0, 200.0]


def test_targeted_fields_by_request(cfg):
    none = pipeline.targeted_fields(cfg, (0, 0, 0), (0, 0, 0), 1.0)
    assert none.shells(4.0) == []
    both = pipeline.targeted_fields(cfg, (0, 0, 0.1), (0, 0, 0.1), 1.0)
    shells = both.shells(4.0)
    assert len(shells) == 3
    assert shells[0].support == (4.2, 7.8) and shells[2].support == (8.4, 15.6)


def test_targeted_pair_is_balanced(cfg):
    f = pipeline.targeted_fields(cfg, (0.1, 0.0, 0.0), (0, 0, 0), 1.0)
    assert f.sigma.amplitude > 0 and f.tau.amplitude > 0


def test_energy_shift_matches_monopole(angular_run):
    for r in angular_run["rows"]:
        assert abs(r["E_bar"] - r["E_plus_half_A"]) < 1e-6
        assert r["A"] > 0


def test_rows_carry_targets_and_moments(angular_run):
    for r in angular_run["rows"]:
        assert r["alpha"] == [0.0, 0.0, 0.1]
        assert np.allclose(r["dC"], 0, atol=1e-6)
        lam = -8 * np.pi * r["E"] * np.asarray(r["alpha"])
        assert np.linalg.norm(np.asarray(r["angular_moment"]) - lam) < 1e-6 * np.linalg.norm(lam)
        assert r["residual_after"]["sup_H"] < r["residual_before"]["sup_H"]
    assert angular_run["conventions"]["lambda"] == "-8 pi E alpha"
    assert angular_run["dev_J_exponent"] > 0.5


def test_report_csv_layout(angular_run):
    lines = pipeline.report_csv(angular_run).splitlines()
    assert lines[0].split(",") == pipeline.CSV_COLUMNS
    assert len(lines) == 1 + len(angular_run["rows"])
    first = [float(v) for v in lines[1].split(",")]
    assert first[0] == 4.0 and len(first) == len(pipeline.CSV_COLUMNS)


def test_stage_error_names_the_stage(cfg, monkeypatch):
    def boom(*a, **kw):
        raise RuntimeError("solver blew up")

    monkeypatch.setattr(pipeline, "correct", boom)
    fields = pipeline.targeted_fields(cfg, (0, 0, 0.1), (0, 0, 0), 1.0)
    with pytest.raises(pipeline.StageError) as err:
        pipeline.run_k(cfg, fields, 4.0)
    assert err.value.stage == "correct" and "solver blew up" in str(err.value)


def test_single_k_run_is_deterministic(cfg):
    small = replace(cfg, k_list=(4.0,), corrector=CorrectorConfig(L=6, ds=0.04))
    a = pipeline.report_csv(pipeline.run_pipeline(small))
    b = pipeline.report_csv(pipeline.run_pipeline(small))
    assert a == b
