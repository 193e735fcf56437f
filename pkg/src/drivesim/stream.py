"""Line-delimited JSON request/response protocol over standard streams.

Requests, one JSON object per line:

    {"op": "reset", "scene_index": 0}
    {"op": "step", "action": {"pose_delta": {"dx": 1.0, "dy": 0.0, "dyaw": 0.0}}}
    {"op": "step", "action": {"kinematic": {"acceleration": 0.5, "steer": 0.0}}}
    {"op": "close"}

Responses mirror the scene-file field names; observations travel as a flat
value list with a shape header:

    {"ok": true, "observation": {"shape": [C, H, W], "data": [...]}, ...}

Run with `python -m drivesim.stream --dataset scenes.json [--env-config cfg.json]`.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Any, IO

from .kinematics import Action, KinematicAction, PoseDelta
from .raster import Raster
from .scene import load_dataset
from .simulation import DrivingEnv, EnvConfig, EpisodeDoneError, env_config_from_dict


def _raster_to_wire(raster: Raster) -> dict[str, Any]:
    return {"shape": list(raster.data.shape),
            "data": [float(v) for v in raster.data.ravel()]}


def action_from_wire(value: Any) -> Action:
    if not isinstance(value, dict) or len(value) != 1:
        raise ValueError("action must be {'pose_delta': {...}} or {'kinematic': {...}}")
    if "pose_delta" in value:
        fields = value["pose_delta"]
        return PoseDelta(dx=float(fields["dx"]), dy=float(fields["dy"]),
                         dyaw=float(fields["dyaw"]))
    if "kinematic" in value:
        fields = value["kinematic"]
        return KinematicAction(acceleration=float(fields["acceleration"]),
                               steer=float(fields["steer"]))
    raise ValueError(f"unknown action kind: {list(value)!r}")


def action_to_wire(action: Action) -> dict[str, Any]:
    if isinstance(action, PoseDelta):
        return {"pose_delta": {"dx": action.dx, "dy": action.dy, "dyaw": action.dyaw}}
    return {"kinematic": {"acceleration": action.acceleration, "steer": action.steer}}


def _info_to_wire(info: dict[str, Any]) -> dict[str, Any]:
    ego = info["ego_pose"]
    recorded = info["recorded_ego_pose"]
    return {
        "frame_index": info["frame_index"],
        "ego_pose": {"centroid": list(ego.centroid), "yaw": ego.yaw},
        "recorded_ego_pose": {"centroid": list(recorded.centroid),
                              "yaw": recorded.yaw},
        "collision": info["collision"].value,
    }


def serve(env: DrivingEnv, stdin: IO[str], stdout: IO[str]) -> None:
    """Process requests until `close` or end of input."""
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
            op = request.get("op")
            if op == "reset":
                observation = env.reset(int(request["scene_index"]))
                response: dict[str, Any] = {"ok": True,
                                            "observation": _raster_to_wire(observation)}
            elif op == "step":
                result = env.step(action_from_wire(request.get("action")))
                response = {
                    "ok": True,
                    "observation": _raster_to_wire(result.observation),
                    "reward": result.reward,
                    "done": result.done,
                    "info": _info_to_wire(result.info),
                }
            elif op == "close":
                print(json.dumps({"ok": True}), file=stdout, flush=True)
                return
            else:
                response = {"ok": False, "error": f"unknown op: {op!r}"}
        except (KeyError, ValueError, TypeError, IndexError,
                EpisodeDoneError, json.JSONDecodeError) as exc:
            response = {"ok": False, "error": str(exc)}
        print(json.dumps(response), file=stdout, flush=True)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="drivesim-stream",
        description="Serve an environment over stdin/stdout")
    parser.add_argument("--dataset", required=True, help="scene dataset file")
    parser.add_argument("--env-config", help="environment config JSON file")
    args = parser.parse_args(argv)

    dataset = load_dataset(args.dataset)
    if args.env_config:
        with open(args.env_config, encoding="utf-8") as handle:
            config = env_config_from_dict(json.load(handle))
    else:
        config = EnvConfig()
    serve(DrivingEnv(dataset, config), sys.stdin, sys.stdout)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
