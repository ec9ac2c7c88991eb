import threading

import pytest
from fastapi.testclient import TestClient

from impactlab import schemas
from impactlab.composer import SceneComposition, place_pair
from impactlab.service import create_app
from impactlab.simulator import make_two_body_scene, sample_observations, simulate
from impactlab.solver import SolveConfig, reconstruct


@pytest.fixture(scope="module")
def record():
    gt = simulate(make_two_body_scene(seed=40, mass_ratio=1.8, restitution=0.6))
    obs = sample_observations(gt, interval=10)
    return reconstruct(obs, SolveConfig(seed=3))


@pytest.fixture()
def client(record):
    comp = SceneComposition(pairs=[place_pair(record), place_pair(record, translation=[4.0, 0, 0])])
    return TestClient(create_app(comp))


class TestSceneEndpoint:
    def test_get_scene_matches_file_modulo_revision(self, record, client):
        comp = SceneComposition(pairs=[place_pair(record), place_pair(record, translation=[4.0, 0, 0])])
        expected = schemas.scene_to_dict(comp)
        got = client.get("/scene").json()
        revision = got.pop("revision")
        assert revision == 1
        assert got == expected

    def test_patch_translation_only_changes_that_pair(self, client):
        before = client.get("/scene").json()
        rev = before["revision"]
        r = client.patch("/pairs/0", json={"revision": rev, "translation": [9.0, 0.0, 0.0]})
        assert r.status_code == 200
        after = r.json()
        assert after["revision"] == rev + 1
        assert after["pairs"][0]["translation"] == [9.0, 0.0, 0.0]
        assert after["pairs"][1] == before["pairs"][1]

    def test_stale_revision_conflict(self, client):
        rev = client.get("/scene").json()["revision"]
        ok = client.patch("/pairs/0", json={"revision": rev, "time_offset": 2.0})
        assert ok.status_code == 200
        stale = client.patch("/pairs/0", json={"revision": rev, "time_offset": 5.0})
        assert stale.status_code == 409

    def test_concurrent_patches_one_wins(self, record):
        comp = SceneComposition(pairs=[place_pair(record)])
        test_client = TestClient(create_app(comp))
        rev = test_client.get("/scene").json()["revision"]
        codes = []
        lock = threading.Lock()

        def patch(value):
            r = test_client.patch("/pairs/0", json={"revision": rev, "time_offset": value})
            with lock:
                codes.append(r.status_code)

        threads = [threading.Thread(target=patch, args=(v,)) for v in (1.0, 2.0)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(codes) == [200, 409]

    def test_invalid_transform_rejected(self, client):
        rev = client.get("/scene").json()["revision"]
        r = client.patch(
            "/pairs/0",
            json={"revision": rev, "rotation_axis": [1.0, 0.0, 0.0], "rotation_about_gravity": 0.4},
        )
        assert r.status_code == 400
        ok = client.patch(
            "/pairs/0",
            json={"revision": rev, "rotation_axis": [0.0, 1.0, 0.0], "rotation_about_gravity": 0.4},
        )
        assert ok.status_code == 200

    def test_unknown_pair_404(self, client):
        rev = client.get("/scene").json()["revision"]
        assert client.patch("/pairs/7", json={"revision": rev, "time_offset": 1.0}).status_code == 404


class TestPredictionEndpoints:
    def test_auto_time_applies_offset(self, client):
        rev = client.get("/scene").json()["revision"]
        r = client.post("/auto-time", json={"revision": rev, "pair_early": 0, "pair_late": 1})
        assert r.status_code == 200
        body = r.json()
        assert body["revision"] == rev + 1
        scene = client.get("/scene").json()
        assert scene["pairs"][1]["time_offset"] == pytest.approx(body["time_offset"])

    def test_keyframes_require_prediction(self, client):
        assert client.get("/keyframes").status_code == 404

    def test_predict_then_keyframes(self, client):
        rev = client.get("/scene").json()["revision"]
        r = client.post("/predict", json={"revision": rev})
        assert r.status_code == 200
        payload = r.json()
        assert "events" in payload and "keyframes" in payload
        schemas.validate_keyframes(payload["keyframes"])
        kf = client.get("/keyframes")
        assert kf.status_code == 200
        assert kf.json()["base_revision"] == rev
        assert kf.json()["keyframes"] == payload["keyframes"]

    def test_predict_stale_revision(self, client):
        rev = client.get("/scene").json()["revision"]
        assert client.post("/predict", json={"revision": rev + 5}).status_code == 409
