from __future__ import annotations

import math

import pytest

from drivesim.geometry import Pose2
from drivesim.scene import AgentRecord, Dataset, EGO_TRACK_ID, Frame, Scene, SemanticMap
from drivesim.synthetic import generate_synthetic

DT = 0.1


def record(x: float, y: float, yaw: float = 0.0, track_id: int = EGO_TRACK_ID,
           extent: tuple[float, float] = (4.87, 1.85),
           velocity: tuple[float, float] = (0.0, 0.0)) -> AgentRecord:
    return AgentRecord(track_id=track_id, pose=Pose2((x, y), yaw),
                       extent=extent, velocity=velocity)


def straight_scene(n_frames: int = 40, speed: float = 10.0, yaw: float = 0.0,
                   origin: tuple[float, float] = (1000.0, 2000.0),
                   agents_per_frame=None, scene_id: str = "straight",
                   dt: float = DT) -> Scene:
    """Constant-velocity ego along `yaw`; `agents_per_frame(k)` may add agents."""
    ux, uy = math.cos(yaw), math.sin(yaw)
    frames = []
    for k in range(n_frames):
        ego = AgentRecord(
            track_id=EGO_TRACK_ID,
            pose=Pose2((origin[0] + ux * speed * k * dt,
                        origin[1] + uy * speed * k * dt), yaw),
            extent=(4.87, 1.85),
            velocity=(speed * ux, speed * uy),
        )
        agents = tuple(agents_per_frame(k)) if agents_per_frame else ()
        frames.append(Frame(index=k, timestamp=k * dt, ego=ego, agents=agents))
    return Scene(scene_id=scene_id, dt=dt, frames=tuple(frames))


def scene_dataset(*scenes: Scene, semantic_map: SemanticMap | None = None) -> Dataset:
    return Dataset(scenes=tuple(scenes),
                   map=semantic_map if semantic_map is not None else SemanticMap())


@pytest.fixture(scope="session")
def synthetic_dataset() -> Dataset:
    return generate_synthetic(seed=7, n_scenes=6, frames_per_scene=60, n_agents=5)
