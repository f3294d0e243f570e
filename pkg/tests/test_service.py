import json
import warnings

import numpy as np
import pytest

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    from starlette.testclient import TestClient

import farnet
from farnet.service import create_app


@pytest.fixture(scope="module")
def client():
    with TestClient(create_app(), raise_server_exceptions=False) as c:
        yield c


@pytest.fixture(scope="module")
def data_dir(client, tmp_path_factory):
    out = str(tmp_path_factory.mktemp("svc") / "data")
    resp = client.post("/synth", json={"out_dir": out, "samples_per_cell": [3, 2],
                                       "shape": [1, 128, 1]})
    assert resp.status_code == 200, resp.text
    return out


@pytest.fixture(scope="module")
def run_dir(client, data_dir, tmp_path_factory):
    out = str(tmp_path_factory.mktemp("svc-run"))
    resp = client.post("/train", json={
        "data_dir": data_dir, "sources": [0, 1], "target": 2, "out_dir": out,
        "epochs": 1, "k_per_class": 2, "variant": "m4", "seed": 0,
    })
    assert resp.status_code == 200, resp.text
    return out, resp.json()


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"
    assert body["version"] == farnet.__version__


def test_synth_reports_counts(client, data_dir):
    resp = client.post("/synth", json={"out_dir": data_dir,
                                       "samples_per_cell": [3, 2],
                                       "shape": [1, 128, 1]})
    body = resp.json()
    assert body["n_records"] == 4 * 3 * 5
    assert body["n_classes"] == 4 and body["n_domains"] == 3
    assert body["sample_shape"] == [1, 128, 1]


def test_synth_rejects_bad_spec(client, tmp_path):
    resp = client.post("/synth", json={"out_dir": str(tmp_path / "x"),
                                       "n_classes": 0})
    assert resp.status_code == 400


def test_train_response_shape(run_dir):
    _, body = run_dir
    assert 0.0 <= body["accuracy"] <= 1.0
    assert body["sources"] == [0, 1] and body["target"] == 2
    assert body["input_scale"] > 0
    assert len(body["confusion"]) == 4
    assert len(body["history"]) == 1


def test_train_writes_artifacts(run_dir):
    out, _ = run_dir
    from pathlib import Path
    for name in ("history.csv", "confusion.csv", "metrics.json", "checkpoint.npz"):
        assert (Path(out) / name).is_file(), name


def test_train_missing_dataset(client):
    resp = client.post("/train", json={"data_dir": "/nonexistent/nowhere",
                                       "sources": [0, 1], "target": 2})
    assert resp.status_code == 404


def test_train_bad_domains(client, data_dir):
    resp = client.post("/train", json={"data_dir": data_dir, "sources": [0, 2],
                                       "target": 2, "epochs": 1})
    assert resp.status_code == 400


def test_eval_matches_training_accuracy(client, data_dir, run_dir):
    out, body = run_dir
    resp = client.post("/eval", json={"checkpoint": f"{out}/checkpoint.npz",
                                      "data_dir": data_dir, "split": "test",
                                      "domains": [2]})
    assert resp.status_code == 200, resp.text
    got = resp.json()
    assert got["accuracy"] == pytest.approx(body["accuracy"])
    assert got["n_samples"] == int(np.array(body["confusion"]).sum())
    assert np.array(got["confusion"]).sum() == got["n_samples"]


def test_eval_class_count_mismatch(client, run_dir, tmp_path):
    out, _ = run_dir
    other = str(tmp_path / "three")
    resp = client.post("/synth", json={"out_dir": other, "n_classes": 3,
                                       "samples_per_cell": [2, 2],
                                       "shape": [1, 128, 1]})
    assert resp.status_code == 200
    resp = client.post("/eval", json={"checkpoint": f"{out}/checkpoint.npz",
                                      "data_dir": other})
    assert resp.status_code == 400
    assert "classes" in resp.json()["detail"]


def test_eval_missing_checkpoint(client, data_dir):
    resp = client.post("/eval", json={"checkpoint": "/nonexistent.npz",
                                      "data_dir": data_dir})
    assert resp.status_code == 404


def test_domain_stats_endpoint(client, data_dir):
    resp = client.get("/domain-stats", params={"data_dir": data_dir})
    assert resp.status_code == 200
    body = resp.json()
    assert body["rho"] > 0
    assert body["domains"] == [0, 1, 2]
    assert set(body["per_class_rho"]) == {"0", "1", "2", "3"}


def test_domain_stats_missing_dataset(client):
    resp = client.get("/domain-stats", params={"data_dir": "/nonexistent"})
    assert resp.status_code == 404


def test_domain_stats_bad_split(client, data_dir):
    resp = client.get("/domain-stats", params={"data_dir": data_dir,
                                               "split": "bogus"})
    assert resp.status_code == 400


def test_preview_swap_is_exact(client, data_dir):
    resp = client.post("/preview-swap", json={"data_dir": data_dir,
                                              "index_a": 0, "index_b": 30})
    assert resp.status_code == 200, resp.text
    body = resp.json()
    assert body["amp_gap_to_b"] < 1e-9
    assert body["pha_gap_to_a"] < 1e-9
    assert body["swapped_std"] > 0


def test_preview_swap_index_range(client, data_dir):
    resp = client.post("/preview-swap", json={"data_dir": data_dir,
                                              "index_a": 0, "index_b": 10_000})
    assert resp.status_code == 400


def test_export_embeddings(client, data_dir, run_dir, tmp_path):
    out, _ = run_dir
    dest = str(tmp_path / "emb.csv")
    resp = client.post("/export-embeddings", json={
        "checkpoint": f"{out}/checkpoint.npz", "data_dir": data_dir,
        "out_path": dest, "split": "test",
    })
    assert resp.status_code == 200, resp.text
    body = resp.json()
    lines = open(dest).read().strip().splitlines()
    assert len(lines) == body["n_rows"] + 1
    assert lines[0].startswith("class_id,domain_id,e0")
