import json

import numpy as np
import pytest

import sthyper

sthyper.set_num_threads(1)

CONFIG = {
    "input_len": 32,
    "horizon": 8,
    "pooling_ratio": 4,
    "spatial_scales": 2,
    "temporal_scales": 2,
    "patch_len": 8,
    "hidden_dim": 8,
    "memory_items": 4,
    "memory_dim": 4,
    "hyperedges": 4,
    "nodes_per_hyperedge": 4,
    "max_epochs": 2,
    "seed": 5,
}


def dtw_reference(a, b):
    d = np.full((len(a) + 1, len(b) + 1), np.inf)
    d[0, 0] = 0.0
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            d[i, j] = abs(a[i - 1] - b[j - 1]) + min(d[i - 1, j], d[i, j - 1], d[i - 1, j - 1])
    return d[-1, -1]


def test_dtw_matches_reference():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a = rng.normal(size=rng.integers(1, 20))
        b = rng.normal(size=rng.integers(1, 20))
        assert sthyper.dtw_distance(a.tolist(), b.tolist()) == dtw_reference(a, b)
    assert sthyper.dtw_distance([1.0, 2.0, 3.0], [1.0, 2.0, 2.0, 3.0]) == 0.0


def test_dtw_affinity_is_symmetric_with_unit_diagonal():
    series = np.random.default_rng(4).normal(size=(5, 24))
    aff, sigma = sthyper.dtw_affinity(series)
    assert aff.shape == (5, 5)
    assert np.array_equal(aff, aff.T)
    assert np.all(np.diag(aff) == 1.0)
    assert sigma > 0


def test_synthetic_is_deterministic():
    a = sthyper.generate_synthetic(seed=7)
    b = sthyper.generate_synthetic(seed=7)
    assert a["values"].shape == (12, 512)
    assert np.array_equal(a["values"], b["values"])
    assert sorted(set(a["group_labels"])) == [0, 1, 2]


def test_metrics_examples():
    m = sthyper.metrics(np.array([3.0, -4.0]), np.zeros(2))
    assert m["MAE"] == 3.5 and m["MSE"] == 12.5
    assert m["RMSE"] == pytest.approx(np.sqrt(12.5), abs=1e-12)
    assert sthyper.metrics(np.array([11.0, 18.0]), np.array([10.0, 20.0]))["MAPE"] == pytest.approx(10.0)


def test_config_errors_raise():
    with pytest.raises(sthyper.Error):
        sthyper.validate_config({"gp_weight": 2.0}, 209)
    with pytest.raises(sthyper.Error):
        sthyper.validate_config({"not_a_field": 1}, 209)
    assert sthyper.default_config()["hidden_dim"] == 64


def test_train_evaluate_predict_export(tmp_path):
    data = sthyper.generate_synthetic(length=256, seed=2)["values"]
    result = sthyper.train(CONFIG, data, tmp_path / "ck")
    assert len(result["history"]) == 2
    assert all(np.isfinite(r["train_loss"]) for r in result["history"])

    report = sthyper.evaluate(tmp_path / "ck", data, "test")
    assert {"all", "horizon_1", "samples"} <= report.keys()
    assert report["all"]["RMSE"] == pytest.approx(np.sqrt(report["all"]["MSE"]), abs=1e-9)

    window = data[:, -32:]
    pred = sthyper.predict(tmp_path / "ck", window)
    assert pred.shape == (12, 8)
    assert np.array_equal(pred, sthyper.predict(tmp_path / "ck", window))
    bad = window.copy()
    bad[0, 0] = np.nan
    with pytest.raises(sthyper.Error):
        sthyper.predict(tmp_path / "ck", bad)
    with pytest.raises(sthyper.Error, match="12 x 32"):
        sthyper.predict(tmp_path / "ck", window[:, :16])

    stems = sthyper.export_structures(tmp_path / "ck", tmp_path / "ex")
    assert {"S_1", "A_1", "A_2", "labels_1", "omega"} <= set(stems)
    lam = np.loadtxt(tmp_path / "ex" / "Lambda_tilde_1.csv", delimiter=",", ndmin=2)
    meta = json.loads((tmp_path / "ex" / "Lambda_tilde_1.json").read_text())
    assert np.all((lam != 0).sum(axis=0) == meta["keep_per_column"])


def test_same_seed_same_history(tmp_path):
    data = sthyper.generate_synthetic(length=256, seed=2)["values"]
    a = sthyper.train(CONFIG, data, tmp_path / "a", max_steps=3)
    b = sthyper.train(CONFIG, data, tmp_path / "b", max_steps=3)
    assert a["history"] == b["history"]
    assert a["steps"] == 3
