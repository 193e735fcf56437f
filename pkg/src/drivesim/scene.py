"""Logged-scene data model, validation, and the JSON on-disk format.

A dataset file is a single UTF-8 JSON document:

    {"format_version": 1,
     "map": {"lanes": [{"id", "left_boundary": [[x,y],...], "right_boundary": [[x,y],...]}],
             "crosswalks": [{"id", "polygon": [[x,y],...]}],
             "traffic_lights": [{"id", "position": [x,y],
                                 "states": [{"frame": int, "color": "red"|"yellow"|"green"}]}]},
     "scenes": [{"scene_id", "dt",
                 "frames": [{"timestamp",
                             "ego": {"centroid": [x,y], "yaw", "extent": [l,w], "velocity": [vx,vy]},
                             "agents": [{"track_id", "centroid", "yaw", "extent", "velocity"}]}]}]}

Lengths in meters, angles in radians, speeds in m/s. Files are rejected,
never repaired, when any invariant fails.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .geometry import Pose2, Vec2

EGO_TRACK_ID = 0
FORMAT_VERSION = 1
TIMESTAMP_TOLERANCE = 1e-6
LIGHT_COLORS = ("red", "yellow", "green")

Polyline = tuple[Vec2, ...]


class DatasetError(Exception):
    """Base class for dataset load/save failures."""


class DatasetFormatError(DatasetError):
    """File does not parse as the documented schema."""


class DatasetInvariantError(DatasetError):
    """Parsed data violates a type invariant."""


@dataclass(frozen=True)
class AgentRecord:
    track_id: int
    pose: Pose2
    extent: Vec2
    velocity: Vec2


@dataclass(frozen=True)
class Frame:
    index: int
    timestamp: float
    ego: AgentRecord
    agents: tuple[AgentRecord, ...]


@dataclass(frozen=True)
class Scene:
    scene_id: str
    dt: float
    frames: tuple[Frame, ...]


@dataclass(frozen=True)
class Lane:
    lane_id: str
    left_boundary: Polyline
    right_boundary: Polyline

    def polygon(self) -> Polyline:
        return self.left_boundary + tuple(reversed(self.right_boundary))


@dataclass(frozen=True)
class Crosswalk:
    crosswalk_id: str
    polygon: Polyline


@dataclass(frozen=True)
class TrafficLight:
    light_id: str
    position: Vec2
    states: tuple[tuple[int, str], ...]

    def color_at(self, frame_index: int) -> str | None:
        """Piecewise-constant color: the latest state at or before the frame."""
        color = None
        for state_frame, state_color in self.states:
            if state_frame > frame_index:
                break
            color = state_color
        return color


@dataclass(frozen=True)
class SemanticMap:
    lanes: tuple[Lane, ...] = ()
    crosswalks: tuple[Crosswalk, ...] = ()
    traffic_lights: tuple[TrafficLight, ...] = ()


@dataclass(frozen=True)
class Dataset:
    scenes: tuple[Scene, ...]
    map: SemanticMap = field(default_factory=SemanticMap)
    format_version: int = FORMAT_VERSION


def validate_dataset(dataset: Dataset) -> None:
    """Check every type invariant, raising DatasetInvariantError with a locus."""
    if dataset.format_version != FORMAT_VERSION:
        raise DatasetInvariantError(
            f"format_version: expected {FORMAT_VERSION}, got {dataset.format_version}"
        )
    _validate_map(dataset.map)
    seen_ids: set[str] = set()
    for scene in dataset.scenes:
        if scene.scene_id in seen_ids:
            raise DatasetInvariantError(f"scene_id {scene.scene_id!r} duplicated")
        seen_ids.add(scene.scene_id)
        _validate_scene(scene)


def _validate_map(semantic_map: SemanticMap) -> None:
    for lane in semantic_map.lanes:
        for side, boundary in (
            ("left_boundary", lane.left_boundary),
            ("right_boundary", lane.right_boundary),
        ):
            if len(boundary) < 2:
                raise DatasetInvariantError(
                    f"map lane {lane.lane_id!r} {side}: polyline needs >= 2 points"
                )
    for crosswalk in semantic_map.crosswalks:
        if len(crosswalk.polygon) < 3:
            raise DatasetInvariantError(
                f"map crosswalk {crosswalk.crosswalk_id!r} polygon: needs >= 3 points"
            )
    for light in semantic_map.traffic_lights:
        previous = -1
        for state_frame, color in light.states:
            if color not in LIGHT_COLORS:
                raise DatasetInvariantError(
                    f"map traffic_light {light.light_id!r}: unknown color {color!r}"
                )
            if state_frame < previous:
                raise DatasetInvariantError(
                    f"map traffic_light {light.light_id!r}: state frames decrease"
                )
            previous = state_frame


def _validate_scene(scene: Scene) -> None:
    locus = f"scene {scene.scene_id!r}"
    if not scene.dt > 0.0:
        raise DatasetInvariantError(f"{locus}: dt must be > 0, got {scene.dt}")
    if len(scene.frames) < 2:
        raise DatasetInvariantError(f"{locus}: needs >= 2 frames, got {len(scene.frames)}")
    for i, frame in enumerate(scene.frames):
        frame_locus = f"{locus} frame {i}"
        if frame.index != i:
            raise DatasetInvariantError(f"{frame_locus}: index {frame.index} != position {i}")
        if i > 0:
            step = frame.timestamp - scene.frames[i - 1].timestamp
            if step <= 0.0:
                raise DatasetInvariantError(f"{frame_locus}: timestamps must strictly increase")
            if abs(step - scene.dt) > TIMESTAMP_TOLERANCE:
                raise DatasetInvariantError(
                    f"{frame_locus}: timestamp step {step} differs from dt {scene.dt}"
                )
        if frame.ego.track_id != EGO_TRACK_ID:
            raise DatasetInvariantError(
                f"{frame_locus}: ego track_id must be {EGO_TRACK_ID}"
            )
        _validate_record(frame.ego, f"{frame_locus} ego")
        seen_tracks: set[int] = set()
        for agent in frame.agents:
            agent_locus = f"{frame_locus} agent {agent.track_id}"
            if agent.track_id <= 0:
                raise DatasetInvariantError(f"{agent_locus}: track_id must be positive")
            if agent.track_id in seen_tracks:
                raise DatasetInvariantError(f"{agent_locus}: track_id duplicated in frame")
            seen_tracks.add(agent.track_id)
            _validate_record(agent, agent_locus)


def _validate_record(record: AgentRecord, locus: str) -> None:
    length, width = record.extent
    if not (length > 0.0 and width > 0.0):
        raise DatasetInvariantError(f"{locus}: extent must be > 0, got {record.extent}")
    for name, value in (("extent", record.extent), ("velocity", record.velocity)):
        if not all(math.isfinite(v) for v in value):
            raise DatasetInvariantError(f"{locus}: {name} must be finite, got {value}")


# --- parsing -----------------------------------------------------------------


def _require(mapping: Any, key: str, locus: str) -> Any:
    if not isinstance(mapping, dict):
        raise DatasetFormatError(f"{locus}: expected an object")
    if key not in mapping:
        raise DatasetFormatError(f"{locus}: missing field {key!r}")
    return mapping[key]


def _number(value: Any, locus: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DatasetFormatError(f"{locus}: expected a number, got {value!r}")
    number = float(value)
    if not math.isfinite(number):
        raise DatasetFormatError(f"{locus}: expected a finite number, got {value!r}")
    return number


def _integer(value: Any, locus: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise DatasetFormatError(f"{locus}: expected an integer, got {value!r}")
    return value


def _string(value: Any, locus: str) -> str:
    if not isinstance(value, str):
        raise DatasetFormatError(f"{locus}: expected a string, got {value!r}")
    return value


def _vec2(value: Any, locus: str) -> Vec2:
    if not isinstance(value, list) or len(value) != 2:
        raise DatasetFormatError(f"{locus}: expected [x, y], got {value!r}")
    return (_number(value[0], f"{locus}[0]"), _number(value[1], f"{locus}[1]"))


def _points(value: Any, locus: str) -> Polyline:
    if not isinstance(value, list):
        raise DatasetFormatError(f"{locus}: expected a list of points")
    return tuple(_vec2(p, f"{locus}[{i}]") for i, p in enumerate(value))


def _list(value: Any, locus: str) -> list:
    if not isinstance(value, list):
        raise DatasetFormatError(f"{locus}: expected a list")
    return value


def _parse_record(value: Any, track_id: int, locus: str) -> AgentRecord:
    try:
        pose = Pose2(_vec2(_require(value, "centroid", locus), f"{locus}.centroid"),
                     _number(_require(value, "yaw", locus), f"{locus}.yaw"))
    except ValueError as exc:
        raise DatasetInvariantError(f"{locus}: {exc}") from exc
    extent = _vec2(_require(value, "extent", locus), f"{locus}.extent")
    velocity = _vec2(_require(value, "velocity", locus), f"{locus}.velocity")
    return AgentRecord(track_id=track_id, pose=pose, extent=extent, velocity=velocity)


def _parse_map(value: Any) -> SemanticMap:
    lanes = []
    for i, lane in enumerate(_list(_require(value, "lanes", "map"), "map.lanes")):
        locus = f"map.lanes[{i}]"
        lanes.append(Lane(
            lane_id=_string(_require(lane, "id", locus), f"{locus}.id"),
            left_boundary=_points(_require(lane, "left_boundary", locus), f"{locus}.left_boundary"),
            right_boundary=_points(_require(lane, "right_boundary", locus), f"{locus}.right_boundary"),
        ))
    crosswalks = []
    for i, crosswalk in enumerate(_list(_require(value, "crosswalks", "map"), "map.crosswalks")):
        locus = f"map.crosswalks[{i}]"
        crosswalks.append(Crosswalk(
            crosswalk_id=_string(_require(crosswalk, "id", locus), f"{locus}.id"),
            polygon=_points(_require(crosswalk, "polygon", locus), f"{locus}.polygon"),
        ))
    lights = []
    for i, light in enumerate(_list(_require(value, "traffic_lights", "map"), "map.traffic_lights")):
        locus = f"map.traffic_lights[{i}]"
        states = []
        for j, state in enumerate(_list(_require(light, "states", locus), f"{locus}.states")):
            state_locus = f"{locus}.states[{j}]"
            states.append((
                _integer(_require(state, "frame", state_locus), f"{state_locus}.frame"),
                _string(_require(state, "color", state_locus), f"{state_locus}.color"),
            ))
        lights.append(TrafficLight(
            light_id=_string(_require(light, "id", locus), f"{locus}.id"),
            position=_vec2(_require(light, "position", locus), f"{locus}.position"),
            states=tuple(states),
        ))
    return SemanticMap(lanes=tuple(lanes), crosswalks=tuple(crosswalks),
                       traffic_lights=tuple(lights))


def dataset_from_dict(document: Any) -> Dataset:
    """Build and validate a Dataset from a parsed JSON document."""
    version = _integer(_require(document, "format_version", "document"), "format_version")
    semantic_map = _parse_map(_require(document, "map", "document"))
    scenes = []
    for i, scene in enumerate(_list(_require(document, "scenes", "document"), "scenes")):
        locus = f"scenes[{i}]"
        scene_id = _string(_require(scene, "scene_id", locus), f"{locus}.scene_id")
        dt = _number(_require(scene, "dt", locus), f"{locus}.dt")
        frames = []
        for j, frame in enumerate(_list(_require(scene, "frames", locus), f"{locus}.frames")):
            frame_locus = f"{locus}.frames[{j}]"
            ego = _parse_record(_require(frame, "ego", frame_locus), EGO_TRACK_ID,
                                f"{frame_locus}.ego")
            agents = []
            for k, agent in enumerate(_list(_require(frame, "agents", frame_locus),
                                            f"{frame_locus}.agents")):
                agent_locus = f"{frame_locus}.agents[{k}]"
                track_id = _integer(_require(agent, "track_id", agent_locus),
                                    f"{agent_locus}.track_id")
                agents.append(_parse_record(agent, track_id, agent_locus))
            frames.append(Frame(
                index=j,
                timestamp=_number(_require(frame, "timestamp", frame_locus),
                                  f"{frame_locus}.timestamp"),
                ego=ego,
                agents=tuple(agents),
            ))
        scenes.append(Scene(scene_id=scene_id, dt=dt, frames=tuple(frames)))
    dataset = Dataset(scenes=tuple(scenes), map=semantic_map, format_version=version)
    validate_dataset(dataset)
    return dataset


def _record_to_dict(record: AgentRecord, with_track_id: bool) -> dict[str, Any]:
    out: dict[str, Any] = {}
    if with_track_id:
        out["track_id"] = record.track_id
    out["centroid"] = list(record.pose.centroid)
    out["yaw"] = record.pose.yaw
    out["extent"] = list(record.extent)
    out["velocity"] = list(record.velocity)
    return out


def dataset_to_dict(dataset: Dataset) -> dict[str, Any]:
    return {
        "format_version": dataset.format_version,
        "map": {
            "lanes": [
                {"id": lane.lane_id,
                 "left_boundary": [list(p) for p in lane.left_boundary],
                 "right_boundary": [list(p) for p in lane.right_boundary]}
                for lane in dataset.map.lanes
            ],
            "crosswalks": [
                {"id": cw.crosswalk_id, "polygon": [list(p) for p in cw.polygon]}
                for cw in dataset.map.crosswalks
            ],
            "traffic_lights": [
                {"id": light.light_id,
                 "position": list(light.position),
                 "states": [{"frame": f, "color": c} for f, c in light.states]}
                for light in dataset.map.traffic_lights
            ],
        },
        "scenes": [
            {"scene_id": scene.scene_id,
             "dt": scene.dt,
             "frames": [
                 {"timestamp": frame.timestamp,
                  "ego": _record_to_dict(frame.ego, with_track_id=False),
                  "agents": [_record_to_dict(a, with_track_id=True) for a in frame.agents]}
                 for frame in scene.frames
             ]}
            for scene in dataset.scenes
        ],
    }


def load_dataset(path: str | Path) -> Dataset:
    """Load and validate a dataset file; invalid data is rejected, not repaired."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    return dataset_from_dict(document)


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write a dataset such that load_dataset returns an equal value."""
    validate_dataset(dataset)
    text = json.dumps(dataset_to_dict(dataset), indent=1)
    Path(path).write_text(text + "\n", encoding="utf-8")
