from __future__ import annotations

import io
import json
import subprocess
import sys

import pytest

from drivesim.scene import save_dataset
from drivesim.simulation import DrivingEnv, EnvConfig, env_config_to_dict
from drivesim.raster import RasterConfig
from drivesim.stream import serve
from drivesim.synthetic import generate_synthetic

SMALL = EnvConfig(raster=RasterConfig(width_px=24, height_px=24, history_frames=1))


def talk(env: DrivingEnv, requests: list[dict]) -> list[dict]:
    stdin = io.StringIO("\n".join(json.dumps(r) for r in requests) + "\n")
    stdout = io.StringIO()
    serve(env, stdin, stdout)
    return [json.loads(line) for line in stdout.getvalue().splitlines()]


@pytest.fixture(scope="module")
def dataset():
    return generate_synthetic(seed=4, n_scenes=2, frames_per_scene=40, n_agents=2)


def test_reset_step_close_happy_path(dataset):
    responses = talk(DrivingEnv(dataset, SMALL), [
        {"op": "reset", "scene_index": 0},
        {"op": "step", "action": {"pose_delta": {"dx": 1.0, "dy": 0.0, "dyaw": 0.0}}},
        {"op": "step", "action": {"kinematic": {"acceleration": 0.0, "steer": 0.0}}},
        {"op": "close"},
    ])
    reset, step, bad_mode, closed = responses
    assert reset["ok"] is True
    assert reset["observation"]["shape"] == [7, 24, 24]
    assert len(reset["observation"]["data"]) == 7 * 24 * 24
    assert step["ok"] is True
    assert step["done"] is False
    assert step["info"]["frame_index"] == 1
    assert step["info"]["collision"] == "none"
    assert set(step["info"]["ego_pose"]) == {"centroid", "yaw"}
    assert bad_mode["ok"] is False  # kinematic action in pose_delta mode
    assert closed["ok"] is True


def test_step_without_reset_is_error(dataset):
    responses = talk(DrivingEnv(dataset, SMALL), [
        {"op": "step", "action": {"pose_delta": {"dx": 0.0, "dy": 0.0, "dyaw": 0.0}}},
        {"op": "close"},
    ])
    assert responses[0]["ok"] is False
    assert "reset" in responses[0]["error"]


def test_unknown_op_and_bad_json_recoverable(dataset):
    env = DrivingEnv(dataset, SMALL)
    stdin = io.StringIO('{"op": "fly"}\nnot json at all\n{"op": "close"}\n')
    stdout = io.StringIO()
    serve(env, stdin, stdout)
    responses = [json.loads(line) for line in stdout.getvalue().splitlines()]
    assert responses[0]["ok"] is False
    assert responses[1]["ok"] is False
    assert responses[2]["ok"] is True


def test_observation_values_in_unit_interval(dataset):
    responses = talk(DrivingEnv(dataset, SMALL), [
        {"op": "reset", "scene_index": 1},
        {"op": "close"},
    ])
    values = responses[0]["observation"]["data"]
    assert min(values) >= 0.0
    assert max(values) <= 1.0


def test_rewards_match_in_process_env(dataset):
    script = [{"pose_delta": {"dx": 0.9, "dy": 0.05, "dyaw": 0.01}}] * 5
    requests = [{"op": "reset", "scene_index": 0}]
    requests += [{"op": "step", "action": a} for a in script]
    requests += [{"op": "close"}]
    responses = talk(DrivingEnv(dataset, SMALL), requests)
    stream_rewards = [r["reward"] for r in responses[1:-1]]

    env = DrivingEnv(dataset, SMALL)
    env.reset(0)
    from drivesim.kinematics import PoseDelta

    core_rewards = [env.step(PoseDelta(0.9, 0.05, 0.01)).reward for _ in range(5)]
    assert stream_rewards == core_rewards


def test_stream_subprocess_end_to_end(dataset, tmp_path):
    dataset_path = tmp_path / "scenes.json"
    save_dataset(dataset, dataset_path)
    config_path = tmp_path / "env.json"
    config_path.write_text(json.dumps(env_config_to_dict(SMALL)), encoding="utf-8")

    requests = [
        {"op": "reset", "scene_index": 0},
        {"op": "step", "action": {"pose_delta": {"dx": 1.0, "dy": 0.0, "dyaw": 0.0}}},
        {"op": "close"},
    ]
    proc = subprocess.run(
        [sys.executable, "-m", "drivesim.stream", "--dataset", str(dataset_path),
         "--env-config", str(config_path)],
        input="\n".join(json.dumps(r) for r in requests) + "\n",
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == 0, proc.stderr
    responses = [json.loads(line) for line in proc.stdout.splitlines()]
    assert [r["ok"] for r in responses] == [True, True, True]
    assert responses[1]["info"]["frame_index"] == 1
