import json

import numpy as np
import pytest

from infsens.dataset import emit_report, write_csv
from infsens.experiments import (
    ExperimentSpec,
    box_stats,
    illustrative_replicate,
    planted_two_piece,
    replicate_seeds,
    report_meta,
    run_csv_workflow,
    run_noise_sweep,
    run_scenario_study,
    scenario_replicate,
    study_sensors,
)
from infsens.mis import MisConfig

FAST_MIS = MisConfig(node_limit=5, multistart=4, multistart_keep=1)


def _small(kind, **kw):
    base = dict(kind=kind, replicates=2, n_per_regime=30, illustrative_n=16, mis=FAST_MIS, illustrative_mis=FAST_MIS)
    base.update(kw)
    return ExperimentSpec(**base)


# ---------------------------------------------------------------- box statistics


def test_box_stats_basic():
    b = box_stats([1.0, 2.0, 3.0, 4.0, 5.0])
    assert (b.q25, b.median, b.q75) == (2.0, 3.0, 4.0)
    assert b.whiskers == (1.0, 5.0)
    assert b.outliers == ()
    assert b.count == 5


def test_box_stats_flags_outlier():
    b = box_stats([1.0, 2.0, 3.0, 4.0, 100.0])
    # IQR 2 -> upper fence 4 + 3 = 7
    assert b.outliers == (100.0,)
    assert b.whiskers == (1.0, 4.0)


def test_box_stats_needs_four_values():
    with pytest.raises(ValueError):
        box_stats([1.0, 2.0, 3.0])


# ---------------------------------------------------------------- spec and seeds


def test_replicate_seeds_are_stable_and_distinct():
    a = replicate_seeds(0, 50)
    assert a == replicate_seeds(0, 50)
    assert len(set(a)) == 50
    assert replicate_seeds(0, 10) == a[:10]
    assert replicate_seeds(1, 10) != a[:10]


def test_spec_round_trip_through_json():
    spec = _small("scenario_study", sigmas=(0.1, 5.0))
    back = ExperimentSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
    assert back == spec


@pytest.mark.parametrize(
    "kw",
    [dict(kind="bogus"), dict(replicates=0), dict(methods=("olsr", "magic")), dict(train_fraction=1.0), dict(sigmas=(-1.0,))],
)
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        ExperimentSpec(**kw)


# ---------------------------------------------------------------- studies (small)


def test_illustrative_replicate_reports_every_set():
    rep = illustrative_replicate(_small("illustrative"), 123)
    assert set(rep["one_cluster"]) == {"olsr"}
    assert set(rep["two_cluster"]) == {"olsr", "sota", "con", "con_lab"}
    assert set(rep["indistinct"]) == {"olsr", "con_lab"}
    for method in ("con", "con_lab"):
        info = rep["two_cluster"][method]
        assert info["coef_residual"] <= 1e-7 and info["gap"] <= 1e-6


def test_scenario_replicate_shapes():
    rep = scenario_replicate(_small("scenario_study"), 7)
    for sc in ("desirable", "undesirable"):
        assert set(rep[sc]) == {"olsr", "sota", "con", "con_lab"}
        assert all(np.isfinite(v["rmse_test"]) for v in rep[sc].values())


def test_scenario_study_aggregates_boxes():
    spec = _small("scenario_study", replicates=4, methods=("olsr", "sota"))
    with pytest.warns(RuntimeWarning, match="fewer than 10"):
        res = run_scenario_study(spec)
    assert res["failed"] == []
    box = res["box"]["desirable"]["olsr"]
    vals = [r["desirable"]["olsr"]["rmse_test"] for r in res["replicates"]]
    assert box["median"] == pytest.approx(float(np.median(vals)))


def test_noise_sweep_medians_per_sigma():
    spec = _small("noise_sweep", sigmas=(0.1, 25.0), methods=("olsr",))
    res = run_noise_sweep(spec)
    assert len(res["medians"]["olsr"]) == 2
    assert res["medians"]["olsr"][0] < res["medians"]["olsr"][1]


def test_csv_workflow_lists_every_method(tmp_path):
    write_csv(planted_two_piece(200, seed=3), tmp_path / "plant.csv")
    spec = ExperimentSpec(kind="csv_workflow", mis=FAST_MIS)
    res = run_csv_workflow(tmp_path / "plant.csv", "y", spec)
    names = {s["method"] for s in res["sensors"]}
    sis = {"sis_olsr", "sis_pcr", "sis_lasso", "sis_ref", "sis_ss1", "sis_ss2"}
    mis = {f"mis_{m}_{s}" for m in ("sota", "con", "con_lab") for s in ("ref", "ss1", "ss2")}
    assert names == sis | mis
    assert res["split"] == {"train": 100, "test": 100}
    pcr = next(s for s in res["sensors"] if s["method"] == "sis_pcr")
    assert 1 <= pcr["n_pc_star"] <= 5


def test_csv_workflow_rejects_unknown_reference(tmp_path):
    write_csv(planted_two_piece(60, seed=0), tmp_path / "plant.csv")
    with pytest.raises(ValueError):
        run_csv_workflow(tmp_path / "plant.csv", "y", ExperimentSpec(kind="csv_workflow", ref_column="nope", mis=FAST_MIS))


def test_planted_data_validation():
    with pytest.raises(ValueError):
        planted_two_piece(10, n_p=1)


def test_report_records_and_meta():
    spec = _small("noise_sweep", sigmas=(1.0,), methods=("olsr",), replicates=1)
    res = run_noise_sweep(spec)
    text = emit_report(study_sensors(res, spec), res, report_meta(spec, res))
    doc = json.loads(text)
    assert doc["meta"]["timestamp"] is None
    assert doc["meta"]["spec"]["kind"] == "noise_sweep"
    rec = doc["sensors"][0]
    assert set(rec) >= {"method", "n_p_star", "n_pc_star", "rmse_train", "rmse_test", "config", "seed"}
