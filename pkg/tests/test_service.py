import base64
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from spadal.dataset import Pools
from spadal.service import clone_pools, create_app, parse_config, render_png

from conftest import make_group


def payload(**kw):
    base = dict(strategy="random", rounds=1, n_batch=2, initial_labeled=2,
                seed=0, oracle_mode="human", train={"epochs": 2})
    base.update(kw)
    return base


def wait_for(client, sid, states, timeout=120.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        snap = client.get(f"/api/sessions/{sid}").json()
        if snap["state"] in states:
            return snap
        assert snap["state"] != "failed", snap["error"]
        time.sleep(0.05)
    raise TimeoutError(f"session {sid} never reached {states}")


def label_all(client, sid, cls=0):
    items = client.get(f"/api/sessions/{sid}/queries").json()["items"]
    labels = {it["group_id"]: cls for it in items}
    r = client.post(f"/api/sessions/{sid}/labels", json={"labels": labels})
    assert r.status_code == 200
    return labels


@pytest.fixture(scope="module")
def client(small_dataset_dir):
    app = create_app(small_dataset_dir, restore=False, label_timeout_s=None)
    with TestClient(app) as c:
        yield c


class TestBasics:
    def test_health(self, client):
        assert client.get("/api/health").json() == {"status": "ok"}

    def test_classes(self, client):
        names = client.get("/api/classes").json()["class_names"]
        assert len(names) == 6 and "sphere" in names

    def test_unknown_session(self, client):
        assert client.get("/api/sessions/doesnotexist").status_code == 404

    def test_invalid_config(self, client):
        r = client.post("/api/sessions", json=payload(rounds=0))
        assert r.status_code == 400

    def test_budget_too_large(self, client):
        r = client.post("/api/sessions", json=payload(rounds=50, n_batch=10))
        assert r.status_code == 400

    def test_distinct_ids(self, client):
        a = client.post("/api/sessions", json=payload(oracle_mode="simulated",
                                                      rounds=1, n_batch=1,
                                                      initial_labeled=1))
        b = client.post("/api/sessions", json=payload(oracle_mode="simulated",
                                                      rounds=1, n_batch=1,
                                                      initial_labeled=1))
        assert a.status_code == b.status_code == 201
        assert a.json()["id"] != b.json()["id"]


class TestHumanLoop:
    def test_full_round_trip(self, client):
        r = client.post("/api/sessions", json=payload(rounds=1))
        assert r.status_code == 201
        sid = r.json()["id"]

        snap = wait_for(client, sid, {"awaiting_labels"})
        assert snap["round"] == 0
        assert snap["pending_count"] == 2

        items = client.get(f"/api/sessions/{sid}/queries").json()["items"]
        assert len(items) == 2
        for it in items:
            assert len(it["variant_pngs"]) == 2  # M variants
            png = base64.b64decode(it["observed_png"])
            assert png[:8] == b"\x89PNG\r\n\x1a\n"
            assert it["classes"] == snap["class_names"]

        # partial submission must not advance the round
        first = items[0]["group_id"]
        r = client.post(f"/api/sessions/{sid}/labels",
                        json={"labels": {first: 1}})
        assert r.status_code == 200 and r.json()["remaining"] == 1
        assert client.get(f"/api/sessions/{sid}").json()["state"] == "awaiting_labels"

        # resubmission overwrites before the round closes
        r = client.post(f"/api/sessions/{sid}/labels",
                        json={"labels": {first: 2}})
        assert r.status_code == 200

        # remaining unlabeled items are the only ones still queried
        remaining = client.get(f"/api/sessions/{sid}/queries").json()["items"]
        assert [it["group_id"] for it in remaining] == [items[1]["group_id"]]

        label_all(client, sid, cls=0)
        snap = wait_for(client, sid, {"awaiting_labels"})
        assert snap["round"] == 1
        assert snap["labeled_count"] == 2
        assert len(snap["metrics"]) == 1  # round 0 evaluated

        label_all(client, sid, cls=1)
        snap = wait_for(client, sid, {"finished"})
        assert snap["labeled_count"] == 4
        assert len(snap["metrics"]) == 2  # rounds 0..1

        csv = client.get(f"/api/sessions/{sid}/metrics.csv").text
        lines = csv.strip().splitlines()
        assert lines[0] == "round,labeled_count,accuracy,precision,recall,f1,strategy,seed"
        assert len(lines) == 3

    def test_submit_validation(self, client):
        sid = client.post("/api/sessions", json=payload(rounds=1)).json()["id"]
        wait_for(client, sid, {"awaiting_labels"})
        r = client.post(f"/api/sessions/{sid}/labels",
                        json={"labels": {"not_a_group": 0}})
        assert r.status_code == 422
        items = client.get(f"/api/sessions/{sid}/queries").json()["items"]
        gid = items[0]["group_id"]
        r = client.post(f"/api/sessions/{sid}/labels", json={"labels": {gid: 99}})
        assert r.status_code == 422
        r = client.post(f"/api/sessions/{sid}/labels", json={"labels": "zap"})
        assert r.status_code == 422

    def test_queries_409_when_not_awaiting(self, client):
        sid = client.post("/api/sessions",
                          json=payload(oracle_mode="simulated", rounds=1,
                                       n_batch=1, initial_labeled=1)).json()["id"]
        wait_for(client, sid, {"finished"})
        assert client.get(f"/api/sessions/{sid}/queries").status_code == 409
        r = client.post(f"/api/sessions/{sid}/labels", json={"labels": {"x": 0}})
        assert r.status_code == 409


class TestSimulatedMode:
    def test_runs_to_completion(self, client):
        sid = client.post("/api/sessions",
                          json=payload(oracle_mode="simulated", rounds=2,
                                       n_batch=1, initial_labeled=2)).json()["id"]
        snap = wait_for(client, sid, {"finished"})
        assert [m["round"] for m in snap["metrics"]] == [0, 1, 2]
        assert [m["labeled_count"] for m in snap["metrics"]] == [2, 3, 4]


class TestRestore:
    def test_restart_restores_pending_batch(self, small_dataset_dir):
        app1 = create_app(small_dataset_dir, restore=False, label_timeout_s=None)
        with TestClient(app1) as c1:
            sid = c1.post("/api/sessions", json=payload(rounds=1)).json()["id"]
            wait_for(c1, sid, {"awaiting_labels"})
            items = c1.get(f"/api/sessions/{sid}/queries").json()["items"]
            pending_before = sorted(it["group_id"] for it in items)

        app2 = create_app(small_dataset_dir, restore=True, label_timeout_s=None)
        with TestClient(app2) as c2:
            snap = wait_for(c2, sid, {"awaiting_labels"})
            items = c2.get(f"/api/sessions/{sid}/queries").json()["items"]
            assert sorted(it["group_id"] for it in items) == pending_before
            assert snap["round"] == 0

            # the restored session keeps working end to end
            label_all(c2, sid, cls=3)
            wait_for(c2, sid, {"awaiting_labels"})
            label_all(c2, sid, cls=4)
            snap = wait_for(c2, sid, {"finished"})
            assert snap["labeled_count"] == 4


class TestHelpers:
    def test_render_png_constant_image(self):
        png = render_png(np.full((4, 4), 7.0))
        assert png[:8] == b"\x89PNG\r\n\x1a\n"

    def test_clone_pools_independent(self):
        pools = Pools(["a", "b"], (0.0, 1.0))
        pools.add_unlabeled(make_group("g0", 1.0, m=1, shape=(4, 4)), hidden_label=1)
        clone = clone_pools(pools)
        from spadal.dataset import move_to_labeled
        move_to_labeled(clone, ["g0"], [0])
        assert "g0" in pools.unlabeled  # original untouched
        assert clone.hidden_label("g0") == 1

    def test_parse_config_defaults(self):
        cfg = parse_config({})
        assert cfg.strategy == "duis" and cfg.rounds == 6
        assert cfg.oracle_mode == "human"
