"""Ego state propagation: ego-frame pose deltas and the unicycle model."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import Pose2, frame_to_world, normalize_angle


@dataclass(frozen=True)
class PoseDelta:
    """Ego-frame displacement (meters) plus heading change (radians)."""

    dx: float
    dy: float
    dyaw: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.dx, self.dy, self.dyaw)):
            raise ValueError(f"pose delta components must be finite: {self!r}")


@dataclass(frozen=True)
class KinematicAction:
    """Unicycle controls: longitudinal acceleration (m/s^2) and yaw rate (rad/s)."""

    acceleration: float
    steer: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.acceleration) and math.isfinite(self.steer)):
            raise ValueError(f"kinematic action components must be finite: {self!r}")


Action = PoseDelta | KinematicAction


@dataclass(frozen=True)
class EgoKinematicState:
    pose: Pose2
    speed: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.speed):
            raise ValueError(f"speed must be finite, got {self.speed}")


def apply_pose_delta(pose: Pose2, delta: PoseDelta) -> Pose2:
    """Compose a rigid motion expressed in the pose's own frame."""
    centroid = frame_to_world(pose, (delta.dx, delta.dy))
    return Pose2(centroid, normalize_angle(pose.yaw + delta.dyaw))


def unicycle_step(state: EgoKinematicState, action: KinematicAction, dt: float,
                  allow_reverse: bool = False) -> EgoKinematicState:
    """Semi-implicit unicycle update: speed and yaw first, then position.

    Speed is clamped at zero unless `allow_reverse` is set, so the ego never
    backs up under the default configuration.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    speed = state.speed + action.acceleration * dt
    if not allow_reverse and speed < 0.0:
        speed = 0.0
    yaw = normalize_angle(state.pose.yaw + action.steer * dt)
    centroid = (
        state.pose.centroid[0] + speed * dt * math.cos(yaw),
        state.pose.centroid[1] + speed * dt * math.sin(yaw),
    )
    return EgoKinematicState(pose=Pose2(centroid, yaw), speed=speed)
