import json
import math

import numpy as np
import pytest
from fastapi.testclient import TestClient

from gravscan import crowd_report, load_store
from gravscan.service import create_app


@pytest.fixture()
def stimulus_dir(tmp_path):
    """Manifest with 12 human and 12 synthetic stimuli (8x8 images)."""
    rng = np.random.default_rng(99)
    entries = []
    d = math.hypot(8, 8)
    for k in range(24):
        truth = "human" if k < 12 else "synthetic"
        sid = f"stim{k:02d}"
        img = tmp_path / f"{sid}.pgm"
        img.write_bytes(b"P5\n8 8\n255\n" + bytes(rng.integers(0, 256, size=64).tolist()))
        sp = tmp_path / f"{sid}.json"
        traj = [
            {"x": (1 + i) / d, "y": (2 + i) / d, "t": i * 0.04} for i in range(5)
        ]
        sp.write_text(
            json.dumps(
                {
                    "width": 8,
                    "height": 8,
                    "provenance": truth,
                    "fixations": [{"x": 2 / d, "y": 2 / d, "t": 0.0, "d": 0.2}],
                    "trajectory": traj,
                }
            )
        )
        entries.append({"id": sid, "image": img.name, "scanpath": sp.name, "truth": truth})
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps({"stimuli": entries}))
    return tmp_path


def _client(stimulus_dir, store_name="store.jsonl", seed=7):
    app = create_app(stimulus_dir / "manifest.json", stimulus_dir / store_name, seed=seed)
    return TestClient(app)


def _truths(stimulus_dir):
    doc = json.loads((stimulus_dir / "manifest.json").read_text())
    return {e["id"]: e["truth"] for e in doc["stimuli"]}


def _no_truth_key(obj):
    if isinstance(obj, dict):
        return all(k != "truth" and _no_truth_key(v) for k, v in obj.items())
    if isinstance(obj, list):
        return all(_no_truth_key(v) for v in obj)
    return True


def test_session_has_balanced_truth_split(stimulus_dir):
    client = _client(stimulus_dir)
    resp = client.post("/sessions", json={"education": "MSc", "expertise": 4})
    assert resp.status_code == 200
    body = resp.json()
    assert len(body["stimuli"]) == 20
    truths = _truths(stimulus_dir)
    counts = {"human": 0, "synthetic": 0}
    for stim in body["stimuli"]:
        counts[truths[stim["id"]]] += 1
    assert counts == {"human": 10, "synthetic": 10}


def test_no_truth_leaks_into_any_payload(stimulus_dir):
    client = _client(stimulus_dir)
    body = client.post("/sessions", json={"education": "", "expertise": 1}).json()
    assert _no_truth_key(body)
    image = client.get(body["stimuli"][0]["image_url"]).json()
    assert _no_truth_key(image)
    stats = client.get("/stats").json()
    assert _no_truth_key(stats.get("sessions_created"))  # scalar, trivially fine
    # replay payload carries the dense trajectory
    assert len(body["stimuli"][0]["trajectory"]) == 5
    assert body["stimuli"][0]["duration_s"] == pytest.approx(0.16)


def test_sessions_differ_across_creations(stimulus_dir):
    client = _client(stimulus_dir)
    a = client.post("/sessions", json={"expertise": 2}).json()
    b = client.post("/sessions", json={"expertise": 2}).json()
    assert a["session_id"] != b["session_id"]
    ids_a = [s["id"] for s in a["stimuli"]]
    ids_b = [s["id"] for s in b["stimuli"]]
    assert ids_a != ids_b  # different draw or at least different order


def test_invalid_expertise_is_400(stimulus_dir):
    client = _client(stimulus_dir)
    assert client.post("/sessions", json={"expertise": 7}).status_code == 400
    assert client.post("/sessions", json={"expertise": "high"}).status_code == 400
    assert client.post("/sessions", json={}).status_code == 400


def test_insufficient_pool_is_503(tmp_path, stimulus_dir):
    # manifest with only 9 human stimuli
    doc = json.loads((stimulus_dir / "manifest.json").read_text())
    keep = [e for e in doc["stimuli"] if e["truth"] == "human"][:9] + [
        e for e in doc["stimuli"] if e["truth"] == "synthetic"
    ]
    small = stimulus_dir / "small.json"
    small.write_text(json.dumps({"stimuli": keep}))
    app = create_app(small, stimulus_dir / "s2.jsonl", seed=1)
    assert TestClient(app).post("/sessions", json={"expertise": 3}).status_code == 503


def test_judgment_flow_idempotency_and_conflict(stimulus_dir):
    client = _client(stimulus_dir)
    body = client.post("/sessions", json={"expertise": 3}).json()
    sid = body["session_id"]
    stim = body["stimuli"][0]["id"]
    store = stimulus_dir / "store.jsonl"

    assert client.post(f"/sessions/{sid}/judgments", json={"stimulus_id": stim, "label": "human"}).status_code == 200
    size1 = store.stat().st_size

    # identical resubmission: success, no new record
    assert client.post(f"/sessions/{sid}/judgments", json={"stimulus_id": stim, "label": "human"}).status_code == 200
    assert store.stat().st_size == size1

    # flipped label: conflict
    assert (
        client.post(f"/sessions/{sid}/judgments", json={"stimulus_id": stim, "label": "synthetic"}).status_code
        == 409
    )

    assert client.post(f"/sessions/{sid}/judgments", json={"stimulus_id": "nope", "label": "human"}).status_code == 404
    assert client.post("/sessions/ghost/judgments", json={"stimulus_id": stim, "label": "human"}).status_code == 404
    assert client.post(f"/sessions/{sid}/judgments", json={"stimulus_id": stim, "label": "robot"}).status_code == 400


def test_acknowledged_judgments_survive_restart(stimulus_dir):
    client = _client(stimulus_dir)
    body = client.post("/sessions", json={"expertise": 5}).json()
    sid = body["session_id"]
    truths = _truths(stimulus_dir)
    for stim in body["stimuli"]:
        client.post(f"/sessions/{sid}/judgments", json={"stimulus_id": stim["id"], "label": truths[stim["id"]]})

    # a new app instance over the same files sees everything
    reborn = _client(stimulus_dir)
    stats = reborn.get("/stats").json()
    assert stats["judgments"] == 20
    assert stats["complete_sessions"] == 1
    # and conflicting resubmission is still detected after restart
    stim0 = body["stimuli"][0]["id"]
    flipped = "synthetic" if truths[stim0] == "human" else "human"
    assert (
        reborn.post(f"/sessions/{sid}/judgments", json={"stimulus_id": stim0, "label": flipped}).status_code == 409
    )


def test_stats_empty_store(stimulus_dir):
    client = _client(stimulus_dir, store_name="fresh.jsonl")
    stats = client.get("/stats").json()
    assert stats["judgments"] == 0
    assert stats["sessions_created"] == 0
    assert stats["report"]["overall_acc"] is None
    assert stats["report"]["n_annotators"] == 0


def test_stats_matches_agreement_module(stimulus_dir):
    client = _client(stimulus_dir)
    truths = _truths(stimulus_dir)
    body = client.post("/sessions", json={"expertise": 4}).json()
    sid = body["session_id"]
    for stim in body["stimuli"]:
        client.post(f"/sessions/{sid}/judgments", json={"stimulus_id": stim["id"], "label": truths[stim["id"]]})

    endpoint_report = client.get("/stats").json()["report"]
    offline_report = crowd_report(load_store(stimulus_dir / "store.jsonl"), session_size=20).as_dict()
    assert endpoint_report == offline_report
    assert endpoint_report["overall_acc"]["mean"] == 1.0
    assert endpoint_report["overall_acc"]["std"] == 0.0


def test_image_endpoint_serves_raw_grayscale(stimulus_dir):
    client = _client(stimulus_dir)
    resp = client.get("/stimuli/stim00/image")
    assert resp.status_code == 200
    body = resp.json()
    assert body["w"] == 8 and body["h"] == 8
    assert len(body["gray"]) == 64
    assert all(0 <= v <= 255 for v in body["gray"])
    raw = (stimulus_dir / "stim00.pgm").read_bytes()[-64:]
    assert body["gray"] == list(raw)
    assert client.get("/stimuli/ghost/image").status_code == 404
