import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from rfadvdef import rfsynth
from rfadvdef.config import ExperimentConfig
from rfadvdef.service import app

client = TestClient(app)


def tiny_config(out_dir, **overrides):
    cfg = {
        "dataset": {"schemes": ["BPSK", "QPSK", "PSK8", "QAM16"],
                    "snr_db_min": 14.0, "snr_db_max": 20.0,
                    "train_per_class": 24, "test_per_class": 8, "seed": 3},
        "train": {"epochs": 2, "batch_size": 32, "learning_rate": 1e-3,
                  "seed": 3, "adv_eval_samples": 8},
        "attack": {"epsilon": 0.1},
        "suites": {"classical": True, "ae": True, "greybox": True,
                   "adversarial_training": False, "ks_suite": True,
                   "simplex_3class": False},
        "out_dir": str(out_dir),
    }
    cfg.update(overrides)
    return cfg


def test_health():
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json()["status"] == "ok"


def test_schema_violation_names_field(tmp_path):
    cfg = tiny_config(tmp_path)
    cfg["dataset"]["schemes"] = ["BPSK", "NOTAMOD"]
    resp = client.post("/synth", json=cfg)
    assert resp.status_code == 422
    detail = resp.json()["detail"]
    assert any("schemes" in str(err.get("loc", [])) for err in detail)


def test_unknown_field_rejected(tmp_path):
    cfg = tiny_config(tmp_path)
    cfg["dataset"]["bogus_knob"] = 1
    resp = client.post("/synth", json=cfg)
    assert resp.status_code == 422
    assert any("bogus_knob" in str(err.get("loc", [])) for err in resp.json()["detail"])


def test_missing_artifact_conflict(tmp_path):
    cfg = tiny_config(tmp_path / "empty")
    resp = client.post("/train", json=cfg)
    assert resp.status_code == 409
    assert "rf-advdef synth" in resp.json()["detail"]


def test_synth_stage(tmp_path):
    cfg = tiny_config(tmp_path)
    resp = client.post("/synth", json=cfg)
    assert resp.status_code == 200
    body = resp.json()
    assert body["stage"] == "synth"
    assert body["config_hash"] == ExperimentConfig(**cfg).config_hash()
    train = rfsynth.load_rfds(tmp_path / "train.rfds")
    assert len(train) == 4 * 24
    assert (tmp_path / "train.json").exists()


@pytest.mark.slow
def test_full_pipeline_and_artifacts(tmp_path):
    cfg = tiny_config(tmp_path)
    resp = client.post("/all", json=cfg)
    assert resp.status_code == 200, resp.text
    out = resp.json()["outputs"]
    assert set(out) == {"synth", "train", "attack", "eval", "kstest", "report"}

    for name in ("classical_3.rfwt", "surrogate_1003.rfwt", "autoencoder_3.rfwt",
                 "ae_classifier_3.rfwt", "classical_trace.csv", "ae_pretrain_trace.csv",
                 "ae_classifier_trace.csv", "surrogate_trace.csv",
                 "attack_whitebox_classical_adv.rfds", "attack_whitebox_classical_orig.rfds",
                 "attack_whitebox_classical.json", "attack_greybox_adv.rfds",
                 "confusion_clean_classical.csv", "confusion_fgsm_classical.csv",
                 "confusion_fgsm_ae.csv", "ks_classical.csv", "ks_ae.csv",
                 "eval_metrics.json", "summary.json"):
        assert (tmp_path / name).exists(), name

    # confusion rows are normalized
    lines = (tmp_path / "confusion_clean_classical.csv").read_text().splitlines()
    assert lines[1].split(",")[0] == "true_class"
    for row in lines[2:]:
        vals = [float(v) for v in row.split(",")[1:]]
        assert abs(sum(vals) - 1.0) < 1e-6

    # adversarial batch respects the budget exactly
    orig = rfsynth.load_rfds(tmp_path / "attack_whitebox_classical_orig.rfds")
    adv = rfsynth.load_rfds(tmp_path / "attack_whitebox_classical_adv.rfds")
    assert (np.abs(adv.frames - orig.frames) <= np.float32(0.1)).all()

    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["config_hash"] == resp.json()["config_hash"]
    assert "clean_classical_acc" in summary["accuracies"]

    # report rerun alone is fine (artifacts cached)
    resp2 = client.post("/report", json=cfg)
    assert resp2.status_code == 200
