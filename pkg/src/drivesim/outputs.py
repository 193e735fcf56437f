"""Rollout results: paired simulated/recorded ego trajectories per scene."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

from .geometry import Pose2
from .scene import AgentRecord


@dataclass(frozen=True)
class SimulationOutput:
    """One scene rollout: ego trajectories plus simulated agent states.

    The pose lists cover exactly the rolled-out frames (start frame included)
    and always have equal length. `ego_extent` is carried along so collision
    metrics can rebuild the ego box without the source dataset; `dt` so
    downstream consumers can convert frame offsets to seconds.
    """

    scene_id: str
    start_frame: int
    dt: float
    ego_extent: tuple[float, float]
    simulated_ego_states: tuple[Pose2, ...]
    recorded_ego_states: tuple[Pose2, ...]
    simulated_agent_states: tuple[tuple[AgentRecord, ...], ...]

    def __post_init__(self) -> None:
        n = len(self.simulated_ego_states)
        if len(self.recorded_ego_states) != n:
            raise ValueError(
                f"simulated ({n}) and recorded ({len(self.recorded_ego_states)}) "
                "ego state lists must have equal length"
            )
        if len(self.simulated_agent_states) != n:
            raise ValueError(
                f"agent state list length {len(self.simulated_agent_states)} != {n}"
            )

    def __len__(self) -> int:
        return len(self.simulated_ego_states)


def _pose_to_dict(pose: Pose2) -> dict[str, Any]:
    return {"centroid": list(pose.centroid), "yaw": pose.yaw}


def _pose_from_dict(value: dict[str, Any]) -> Pose2:
    return Pose2((value["centroid"][0], value["centroid"][1]), value["yaw"])


def output_to_dict(output: SimulationOutput) -> dict[str, Any]:
    return {
        "scene_id": output.scene_id,
        "start_frame": output.start_frame,
        "dt": output.dt,
        "ego_extent": list(output.ego_extent),
        "simulated_ego_states": [_pose_to_dict(p) for p in output.simulated_ego_states],
        "recorded_ego_states": [_pose_to_dict(p) for p in output.recorded_ego_states],
        "simulated_agent_states": [
            [{"track_id": a.track_id,
              "centroid": list(a.pose.centroid),
              "yaw": a.pose.yaw,
              "extent": list(a.extent),
              "velocity": list(a.velocity)} for a in frame_agents]
            for frame_agents in output.simulated_agent_states
        ],
    }


def output_from_dict(value: dict[str, Any]) -> SimulationOutput:
    return SimulationOutput(
        scene_id=value["scene_id"],
        start_frame=value["start_frame"],
        dt=value["dt"],
        ego_extent=(value["ego_extent"][0], value["ego_extent"][1]),
        simulated_ego_states=tuple(_pose_from_dict(p)
                                   for p in value["simulated_ego_states"]),
        recorded_ego_states=tuple(_pose_from_dict(p)
                                  for p in value["recorded_ego_states"]),
        simulated_agent_states=tuple(
            tuple(AgentRecord(track_id=a["track_id"],
                              pose=Pose2((a["centroid"][0], a["centroid"][1]), a["yaw"]),
                              extent=(a["extent"][0], a["extent"][1]),
                              velocity=(a["velocity"][0], a["velocity"][1]))
                  for a in frame_agents)
            for frame_agents in value["simulated_agent_states"]
        ),
    )


def save_outputs(outputs: Sequence[SimulationOutput], path: str | Path) -> None:
    document = {"outputs": [output_to_dict(o) for o in outputs]}
    Path(path).write_text(json.dumps(document, indent=1) + "\n", encoding="utf-8")


def load_outputs(path: str | Path) -> list[SimulationOutput]:
    document = json.loads(Path(path).read_text(encoding="utf-8"))
    return [output_from_dict(o) for o in document["outputs"]]
