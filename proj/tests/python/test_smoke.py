import json

import numpy as np
import pytest

import oostraj


def test_metric_matches_hand_computation():
    gt = np.zeros((4, 2))
    pred = gt + [3.0, 4.0]
    assert oostraj.mse_t(pred, gt) == pytest.approx(5.0)
    assert oostraj.mse_t(pred, gt, "squared") == pytest.approx(25.0)


def test_errors_carry_code_and_exit_status():
    with pytest.raises(oostraj.OostrajError) as info:
        oostraj.mse_t(np.zeros((3, 2)), np.zeros((4, 2)))
    assert info.value.args[1] == "LengthMismatch"
    with pytest.raises(oostraj.OostrajError) as info:
        oostraj.resolve_config({"sim": {"t_obs": 1}})
    assert info.value.args[2] == 2
    assert "t_obs" in info.value.args[0]


def test_dlt_recovers_projection():
    rng = np.random.default_rng(0)
    cam = np.array([[500.0, 0, 320, 10], [0, 500, 240, -5], [0, 0, 1, 4]])
    world = rng.uniform(-2, 2, size=(20, 3))
    px = oostraj.project(cam, world)
    est = oostraj.dlt_estimate(world, px)
    assert np.allclose(oostraj.project(est, world), px, atol=1e-6)


def test_scene_generation_is_deterministic():
    cfg = {"sim": {"t_obs": 6, "t_pred": 4}}
    a = oostraj.make_scene(3, cfg)
    assert a == oostraj.make_scene(3, cfg)
    assert sum(agent["out_of_sight"] for agent in a["agents"]) == 1
    assert len(a["agents"][0]["pixel"]) == 10


def test_simulate_train_eval(tmp_path):
    cfg = {
        "sim": {"t_obs": 6, "t_pred": 4},
        "splits": {"train": 4, "val": 2, "test": 2},
        "model": {"width": 8, "layers": 1, "heads": 2},
        "train": {"epochs": 2},
    }
    oostraj.simulate(tmp_path / "data", cfg)
    manifest = json.loads((tmp_path / "data" / "manifest.json").read_text())
    assert manifest["splits"]["train"]["count"] == 4
    oostraj.train(tmp_path / "data", tmp_path / "models", ["ours"], cfg)
    csv = oostraj.eval(tmp_path / "data", tmp_path / "report", [tmp_path / "models"], ["ours", "smoother"], cfg)
    rows = [line.split(",") for line in csv.splitlines() if line and not line.startswith(("#", "method"))]
    assert [r[0] for r in rows] == ["ours", "smoother"]
    for r in rows:
        assert float(r[4]) == pytest.approx(float(r[5]) + float(r[6]), abs=1e-9)
    assert "ours" in oostraj.method_names()
