import json
import subprocess
import sys

import numpy as np
import pytest

from impactlab import schemas
from impactlab.cli import main
from impactlab.composer import SceneComposition, place_pair
from impactlab.errors import SchemaError
from impactlab.simulator import make_drop_scene, make_two_body_scene, sample_observations, simulate
from impactlab.solver import SolveConfig, reconstruct, reconstruct_single_body


@pytest.fixture(scope="module")
def record():
    gt = simulate(make_two_body_scene(seed=40, mass_ratio=1.8, restitution=0.6))
    obs = sample_observations(gt, interval=10)
    return reconstruct(obs, SolveConfig(seed=3))


class TestRoundTrips:
    def test_annotation_round_trip(self, record):
        doc = schemas.annotation_to_dict(record.obs)
        obs2 = schemas.annotation_from_dict(doc)
        doc2 = schemas.annotation_to_dict(obs2)
        assert doc == doc2
        for a, b in zip(record.obs.bodies, obs2.bodies):
            assert np.array_equal(a.p, b.p) and np.array_equal(a.q, b.q) and np.array_equal(a.t, b.t)

    def test_solution_round_trip(self, record):
        doc = schemas.solution_to_dict(record)
        rec2 = schemas.solution_from_dict(doc)
        assert np.array_equal(rec2.x, record.x)
        assert rec2.t_c == record.t_c
        assert rec2.restitution == record.restitution
        assert schemas.solution_to_dict(rec2) == doc

    def test_single_body_solution_round_trip(self):
        scene = make_drop_scene(restitution=0.75)
        gt = simulate(scene)
        obs = sample_observations(gt, interval=6)
        rec = reconstruct_single_body(obs, scene.plane.point, scene.plane.normal, SolveConfig(seed=2))
        doc = schemas.solution_to_dict(rec)
        rec2 = schemas.solution_from_dict(doc)
        assert np.array_equal(rec2.x, rec.x)
        assert np.array_equal(rec2.plane_normal, rec.plane_normal)
        assert schemas.solution_to_dict(rec2) == doc

    def test_scene_round_trip(self, record):
        comp = SceneComposition(
            pairs=[
                place_pair(record, translation=[1.0, 0.0, 2.0], rotation=0.3, time_offset=5.0),
                place_pair(record, reference_mass=2.0),
            ]
        )
        doc = schemas.scene_to_dict(comp)
        comp2 = schemas.scene_from_dict(doc)
        assert schemas.scene_to_dict(comp2) == doc

    def test_file_round_trip_bytes(self, record, tmp_path):
        path = tmp_path / "sol.json"
        schemas.save_json(schemas.solution_to_dict(record), path)
        rec2 = schemas.solution_from_dict(schemas.load_json(path))
        path2 = tmp_path / "sol2.json"
        schemas.save_json(schemas.solution_to_dict(rec2), path2)
        assert path.read_bytes() == path2.read_bytes()


class TestValidation:
    def test_missing_field_reports_path(self):
        with pytest.raises(SchemaError, match=r"annotation\.fps"):
            schemas.annotation_from_dict({"version": 1, "bodies": []})

    def test_bad_observation_reports_nested_path(self, record):
        doc = schemas.annotation_to_dict(record.obs)
        del doc["bodies"][1]["observations"][2]["p"]
        with pytest.raises(SchemaError, match=r"bodies\[1\]\.observations\[2\]\.p"):
            schemas.annotation_from_dict(doc)

    def test_non_increasing_frames_rejected(self, record):
        doc = schemas.annotation_to_dict(record.obs)
        doc["bodies"][0]["observations"][1]["frame"] = doc["bodies"][0]["observations"][0]["frame"]
        with pytest.raises(SchemaError, match="strictly increasing"):
            schemas.annotation_from_dict(doc)

    def test_version_checked(self, record):
        doc = schemas.annotation_to_dict(record.obs)
        doc["version"] = 99
        with pytest.raises(SchemaError, match="version"):
            schemas.annotation_from_dict(doc)


class TestCli:
    def run_cli(self, *args):
        return main(list(args))

    def test_simulate_deterministic_bytes(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert self.run_cli("simulate", "--preset", "two-box", "--seed", "7", "--output", str(a)) == 0
        assert self.run_cli("simulate", "--preset", "two-box", "--seed", "7", "--output", str(b)) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_reconstruct_success_and_determinism(self, tmp_path):
        ann = tmp_path / "ann.json"
        self.run_cli("simulate", "--preset", "two-box", "--seed", "3", "--interval", "10", "--output", str(ann))
        out1, out2 = tmp_path / "s1.json", tmp_path / "s2.json"
        assert self.run_cli("reconstruct", "--input", str(ann), "--output", str(out1), "--seed", "5") == 0
        assert self.run_cli("reconstruct", "--input", str(ann), "--output", str(out2), "--seed", "5") == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_reconstruct_insufficient_data_exit_1(self, tmp_path):
        ann = tmp_path / "ann.json"
        self.run_cli("simulate", "--preset", "two-box", "--seed", "3", "--interval", "10", "--output", str(ann))
        doc = schemas.load_json(ann)
        for body in doc["bodies"]:
            body["observations"] = body["observations"][3:5]  # one per side
        schemas.save_json(doc, ann)
        assert self.run_cli("reconstruct", "--input", str(ann), "--output", str(tmp_path / "x.json")) == 1

    def test_reconstruct_schema_error_exit_1(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"version": 1}))
        assert self.run_cli("reconstruct", "--input", str(bad), "--output", str(tmp_path / "x.json")) == 1

    def test_reconstruct_flagged_exit_2(self, tmp_path):
        # time-reversed bounce has c > 1, which flags the solve as unreliable
        scene = make_drop_scene(restitution=0.75)
        gt = simulate(scene)
        obs = sample_observations(gt, interval=6)
        body = obs.bodies[0]
        doc = schemas.annotation_to_dict(obs)
        duration = float(gt.duration)
        reversed_obs = [
            {"frame": duration - float(t), "p": [float(v) for v in p], "q": [float(v) for v in q]}
            for t, p, q in zip(body.t[::-1], body.p[::-1], body.q[::-1])
        ]
        doc["bodies"][0]["observations"] = reversed_obs
        ann = tmp_path / "rev.json"
        schemas.save_json(doc, ann)
        plane = [str(v) for v in scene.plane.point] + [str(v) for v in scene.plane.normal]
        code = self.run_cli(
            "reconstruct", "--input", str(ann), "--output", str(tmp_path / "rev-sol.json"),
            "--single-body", "--plane", *plane,
        )
        assert code == 2
        sol = schemas.load_json(tmp_path / "rev-sol.json")
        assert sol["flags"]["restitution_out_of_range"] is True

    def test_single_body_cli(self, tmp_path):
        scene = make_drop_scene(restitution=0.75)
        gt = simulate(scene)
        obs = sample_observations(gt, interval=6)
        ann = tmp_path / "drop.json"
        schemas.save_json(schemas.annotation_to_dict(obs), ann)
        out = tmp_path / "drop-sol.json"
        plane = [str(v) for v in scene.plane.point] + [str(v) for v in scene.plane.normal]
        assert self.run_cli(
            "reconstruct", "--input", str(ann), "--output", str(out), "--single-body", "--plane", *plane
        ) == 0
        sol = schemas.load_json(out)
        assert abs(sol["restitution"] - 0.75) < 0.02

    def test_compose_single_solution(self, tmp_path, record):
        sol = tmp_path / "sol.json"
        schemas.save_json(schemas.solution_to_dict(record), sol)
        scene_path = tmp_path / "scene.json"
        assert self.run_cli("compose", "--solutions", str(sol), "--output", str(scene_path)) == 0
        comp = schemas.scene_from_dict(schemas.load_json(scene_path))
        assert len(comp.pairs) == 1

    def test_compose_auto_time_matches_library(self, tmp_path, record):
        from impactlab.composer import auto_time

        sol = tmp_path / "sol.json"
        schemas.save_json(schemas.solution_to_dict(record), sol)
        scene_path = tmp_path / "scene.json"
        assert self.run_cli(
            "compose", "--solutions", str(sol), str(sol), "--output", str(scene_path), "--auto-time", "0", "1"
        ) == 0
        comp = schemas.scene_from_dict(schemas.load_json(scene_path))
        expected = auto_time(place_pair(record), place_pair(record))
        assert comp.pairs[1].time_offset == pytest.approx(expected.offset, abs=1e-12)

    def test_evaluate_emits_requested_noise_rows(self, tmp_path):
        out = tmp_path / "table.json"
        assert self.run_cli(
            "evaluate", "--trials", "1", "--intervals", "19", "--noise", "0,0.05,0.10",
            "--seed", "2", "--output", str(out),
        ) == 0
        doc = schemas.load_json(out)
        noises = {row["noise"] for row in doc["summary"]}
        assert noises == {0.0, 0.05, 0.10}
        zero_rows = [r for r in doc["summary"] if r["noise"] == 0.0]
        assert all(r["max_mass_rel_error"] < 1e-3 for r in zero_rows)

    def test_entry_point_runs(self):
        proc = subprocess.run(
            [sys.executable, "-m", "impactlab", "--help"], capture_output=True, text=True
        )
        assert proc.returncode == 0
        assert "reconstruct" in proc.stdout
