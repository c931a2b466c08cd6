import json
import math

import pytest

import fcmf

TOY = {
    "dim": 8,
    "heads": 2,
    "layers": 1,
    "max_len": 60,
    "geo_dim": 8,
    "epochs": 2,
    "learning_rate": 1e-3,
}


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    counts = fcmf.generate_synthetic(str(d), seed=3, n_samples=40)
    assert counts == {"train": 28, "dev": 6, "test": 6}
    return d


def test_metric_examples():
    assert fcmf.macro_prf1([0, 0, 1, 1], [0, 1, 1, 1], 2)["f1"] == pytest.approx(11 / 15, abs=1e-15)
    assert fcmf.cohen_kappa([0, 0, 1], [0, 1, 1]) == pytest.approx(0.4, abs=1e-15)
    assert fcmf.iou((0, 0, 2, 2), (1, 1, 2, 2)) == pytest.approx(1 / 7, abs=1e-15)


def test_grad_check():
    r = fcmf.model_grad_check(samples=20)
    assert r["passed"]
    assert r["coordinates"] >= 20
    assert r["max_rel_error"] < 1e-4


def test_default_config():
    cfg = fcmf.default_config()
    assert cfg["learning_rate"] == 3e-5
    assert cfg["heads"] == 12
    assert cfg["dim"] % cfg["heads"] == 0


def test_config_errors():
    with pytest.raises(fcmf.ConfigError):
        fcmf.train("/nonexistent", {"dim": 7, "heads": 2})
    with pytest.raises(ValueError):
        fcmf.train("/nonexistent", {"no_such_key": 1})


def test_train_and_predict(synth_dir, tmp_path):
    ckpt = tmp_path / "ckpt"
    r = fcmf.train(synth_dir, TOY, seed=1, checkpoint_dir=ckpt)
    assert r["seed"] == 1
    assert len(r["history"]) == 2 * (TOY["epochs"] + 1)
    assert 0.0 <= r["dev_macro_f1"] <= 1.0
    assert "test_macro_f1" in r
    again = fcmf.train(synth_dir, TOY, seed=1)
    assert again["history"] == r["history"]

    preds = fcmf.predict(str(ckpt), str(synth_dir / "test.jsonl"))
    assert len(preds) == 6
    for p in preds:
        assert set(p["labels"]) == {"Location", "Food", "Room", "Facilities", "Service", "PublicArea"}
        for probs in p["probs"].values():
            assert math.isclose(sum(probs), 1.0, abs_tol=1e-12)


def test_missing_file_is_io_error(tmp_path):
    with pytest.raises(OSError):
        fcmf.predict(str(tmp_path / "nope"), str(tmp_path / "nope.jsonl"))


def test_run_cli(synth_dir, tmp_path):
    code, out, _ = fcmf.run_cli(["stats", str(synth_dir / "train.jsonl"), "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "stats.csv").exists()
    code, _, err = fcmf.run_cli(["train"])
    assert code == 1
    assert "--data" in err
    code, out, _ = fcmf.run_cli(["gradcheck", "--samples", "10", "--out", str(tmp_path)])
    assert code == 0 and out.startswith("PASS")
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "gradcheck"
