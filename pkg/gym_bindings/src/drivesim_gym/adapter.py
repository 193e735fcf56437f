"""Gym-style adapter over the simulation core.

Two interchangeable backends sit behind one adapter interface: an in-process
backend holding a core environment instance, and a stream backend driving a
core subprocess over the line-delimited stdio protocol. The adapter itself is
a thin translation layer (arrays in, arrays out); all simulation logic stays
in the core.
"""

from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path
from typing import Any

import numpy as np

from drivesim.kinematics import Action, KinematicAction, PoseDelta
from drivesim.scene import load_dataset
from drivesim.simulation import DrivingEnv, EnvConfig, env_config_from_dict, env_config_to_dict
from drivesim.stream import action_to_wire

from .spaces import Box

DEFAULT_POSE_DELTA_BOUNDS = ([-5.0, -5.0, -np.pi], [5.0, 5.0, np.pi])
DEFAULT_KINEMATIC_BOUNDS = ([-5.0, -1.0], [5.0, 1.0])


class BackendError(RuntimeError):
    """Raised when a backend reports or encounters a failure."""


class InProcessBackend:
    """Directly wraps a core environment instance."""

    def __init__(self, dataset_path: str | Path, env_config: EnvConfig):
        dataset = load_dataset(dataset_path)
        self._env = DrivingEnv(dataset, env_config)
        self.n_scenes = len(dataset.scenes)

    def reset(self, scene_index: int) -> np.ndarray:
        return self._env.reset(scene_index).data

    def step(self, action: Action) -> tuple[np.ndarray, float, bool, dict[str, Any]]:
        result = self._env.step(action)
        info = {
            "frame_index": result.info["frame_index"],
            "collision": result.info["collision"].value,
        }
        return result.observation.data, result.reward, result.done, info

    def close(self) -> None:
        pass


class StreamBackend:
    """Drives a core subprocess over the stdio protocol."""

    def __init__(self, dataset_path: str | Path, env_config: EnvConfig,
                 workdir: str | Path | None = None):
        self.n_scenes = len(load_dataset(dataset_path).scenes)
        config_dir = Path(workdir) if workdir is not None else Path(dataset_path).parent
        self._config_path = config_dir / "stream_env_config.json"
        self._config_path.write_text(json.dumps(env_config_to_dict(env_config)),
                                     encoding="utf-8")
        self._proc = subprocess.Popen(
            [sys.executable, "-m", "drivesim.stream",
             "--dataset", str(dataset_path), "--env-config", str(self._config_path)],
            stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True)

    def _request(self, message: dict[str, Any]) -> dict[str, Any]:
        if self._proc.poll() is not None:
            raise BackendError("stream backend process has exited")
        self._proc.stdin.write(json.dumps(message) + "\n")
        self._proc.stdin.flush()
        line = self._proc.stdout.readline()
        if not line:
            raise BackendError("stream backend closed its output")
        response = json.loads(line)
        if not response.get("ok"):
            raise BackendError(response.get("error", "unknown backend error"))
        return response

    @staticmethod
    def _decode(observation: dict[str, Any]) -> np.ndarray:
        data = np.asarray(observation["data"], dtype=np.float32)
        return data.reshape(observation["shape"])

    def reset(self, scene_index: int) -> np.ndarray:
        response = self._request({"op": "reset", "scene_index": scene_index})
        return self._decode(response["observation"])

    def step(self, action: Action) -> tuple[np.ndarray, float, bool, dict[str, Any]]:
        response = self._request({"op": "step", "action": action_to_wire(action)})
        info = {
            "frame_index": response["info"]["frame_index"],
            "collision": response["info"]["collision"],
        }
        return (self._decode(response["observation"]), response["reward"],
                response["done"], info)

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.write(json.dumps({"op": "close"}) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, ValueError):
                pass
            self._proc.wait(timeout=10)


class GymEnvAdapter:
    """Classic gym surface: reset() -> obs, step(a) -> (obs, reward, done, info)."""

    def __init__(self, backend, env_config: EnvConfig,
                 scene_policy: int | str = "cycle",
                 action_low=None, action_high=None):
        self._backend = backend
        self._config = env_config
        self._scene_policy = scene_policy
        self._next_scene = 0
        self._done = True
        self._started = False

        raster = env_config.raster
        self.observation_space = Box(
            0.0, 1.0, (raster.channels, raster.height_px, raster.width_px))
        if action_low is None or action_high is None:
            defaults = (DEFAULT_POSE_DELTA_BOUNDS
                        if env_config.action_mode == "pose_delta"
                        else DEFAULT_KINEMATIC_BOUNDS)
            action_low = defaults[0] if action_low is None else action_low
            action_high = defaults[1] if action_high is None else action_high
        self.action_space = Box(np.asarray(action_low, dtype=np.float32),
                                np.asarray(action_high, dtype=np.float32))
        expected = 3 if env_config.action_mode == "pose_delta" else 2
        if self.action_space.shape != (expected,):
            raise ValueError(
                f"action space must have {expected} components for "
                f"{env_config.action_mode} mode, got shape {self.action_space.shape}")

    def _pick_scene(self) -> int:
        if isinstance(self._scene_policy, int):
            return self._scene_policy
        scene = self._next_scene
        self._next_scene = (self._next_scene + 1) % self._backend.n_scenes
        return scene

    def reset(self) -> np.ndarray:
        observation = self._backend.reset(self._pick_scene())
        self._done = False
        self._started = True
        return observation

    def step(self, action) -> tuple[np.ndarray, float, bool, dict[str, Any]]:
        if not self._started:
            raise RuntimeError("reset has not been called")
        if self._done:
            raise RuntimeError("episode is done; call reset")
        array = np.asarray(action, dtype=np.float32)
        if not self.action_space.contains(array):
            raise ValueError(f"action {array!r} outside the declared bounds")
        if self._config.action_mode == "pose_delta":
            core_action: Action = PoseDelta(float(array[0]), float(array[1]),
                                            float(array[2]))
        else:
            core_action = KinematicAction(float(array[0]), float(array[1]))
        observation, reward, done, info = self._backend.step(core_action)
        self._done = done
        return observation, reward, done, info

    def close(self) -> None:
        self._backend.close()


def adapter_from_config(config_path: str | Path) -> GymEnvAdapter:
    """Build an adapter from a single JSON config file.

    Schema: {"dataset": path, "backend": "in_process"|"stream",
             "env": {core environment config}, "scene_policy": "cycle"|int,
             "action_low": [...], "action_high": [...]}.
    Relative dataset paths resolve against the config file location.
    """
    config_path = Path(config_path)
    document = json.loads(config_path.read_text(encoding="utf-8"))
    dataset_path = Path(document["dataset"])
    if not dataset_path.is_absolute():
        dataset_path = config_path.parent / dataset_path
    env_config = env_config_from_dict(document.get("env", {}))
    backend_kind = document.get("backend", "in_process")
    if backend_kind == "in_process":
        backend = InProcessBackend(dataset_path, env_config)
    elif backend_kind == "stream":
        backend = StreamBackend(dataset_path, env_config,
                                workdir=config_path.parent)
    else:
        raise ValueError(f"unknown backend {backend_kind!r}")
    return GymEnvAdapter(
        backend, env_config,
        scene_policy=document.get("scene_policy", "cycle"),
        action_low=document.get("action_low"),
        action_high=document.get("action_high"),
    )
