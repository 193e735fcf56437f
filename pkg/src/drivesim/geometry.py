"""Planar rigid transforms and oriented-bounding-box collision tests."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

Vec2 = tuple[float, float]

# Bearing sector boundaries for collision classification, in radians.
FRONT_SECTOR_HALF_ANGLE = math.pi / 4.0
REAR_SECTOR_MIN_ANGLE = 3.0 * math.pi / 4.0


def normalize_angle(angle: float) -> float:
    """Wrap an angle to the interval (-pi, pi]."""
    if not math.isfinite(angle):
        raise ValueError(f"angle must be finite, got {angle!r}")
    wrapped = math.remainder(angle, math.tau)
    if wrapped <= -math.pi:
        wrapped += math.tau
    return wrapped


@dataclass(frozen=True)
class Pose2:
    """Position plus heading in the world plane (meters, radians CCW from +x)."""

    centroid: Vec2
    yaw: float

    def __post_init__(self) -> None:
        x, y = self.centroid
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError(f"centroid must be finite, got {self.centroid!r}")
        object.__setattr__(self, "centroid", (float(x), float(y)))
        object.__setattr__(self, "yaw", normalize_angle(float(self.yaw)))


def rotate(yaw: float, vec: Vec2) -> Vec2:
    c, s = math.cos(yaw), math.sin(yaw)
    return (c * vec[0] - s * vec[1], s * vec[0] + c * vec[1])


def world_to_frame(pose: Pose2, point: Vec2) -> Vec2:
    """Express a world point in the frame whose origin/orientation is `pose`."""
    dx = point[0] - pose.centroid[0]
    dy = point[1] - pose.centroid[1]
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    return (c * dx + s * dy, -s * dx + c * dy)


def frame_to_world(pose: Pose2, point: Vec2) -> Vec2:
    """Inverse of :func:`world_to_frame`."""
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    return (
        pose.centroid[0] + c * point[0] - s * point[1],
        pose.centroid[1] + s * point[0] + c * point[1],
    )


class CollisionType(Enum):
    NONE = "none"
    FRONT = "front"
    SIDE = "side"
    REAR = "rear"


@dataclass(frozen=True)
class OrientedBox:
    """Rectangle with `extent = (length, width)`, length along the heading axis."""

    pose: Pose2
    extent: Vec2

    def __post_init__(self) -> None:
        length, width = self.extent
        if not (length > 0.0 and width > 0.0):
            raise ValueError(f"extent components must be > 0, got {self.extent!r}")
        object.__setattr__(self, "extent", (float(length), float(width)))

    def corners(self) -> tuple[Vec2, Vec2, Vec2, Vec2]:
        hl, hw = self.extent[0] / 2.0, self.extent[1] / 2.0
        return (
            frame_to_world(self.pose, (hl, hw)),
            frame_to_world(self.pose, (hl, -hw)),
            frame_to_world(self.pose, (-hl, -hw)),
            frame_to_world(self.pose, (-hl, hw)),
        )


def _axes(box: OrientedBox) -> tuple[Vec2, Vec2]:
    c, s = math.cos(box.pose.yaw), math.sin(box.pose.yaw)
    return ((c, s), (-s, c))


def _project(corners: tuple[Vec2, ...], axis: Vec2) -> tuple[float, float]:
    dots = [p[0] * axis[0] + p[1] * axis[1] for p in corners]
    return min(dots), max(dots)


def obb_intersects(a: OrientedBox, b: OrientedBox) -> bool:
    """Closed-rectangle overlap via the separating-axis test (touching counts)."""
    corners_a = a.corners()
    corners_b = b.corners()
    for axis in _axes(a) + _axes(b):
        min_a, max_a = _project(corners_a, axis)
        min_b, max_b = _project(corners_b, axis)
        if max_a < min_b or max_b < min_a:
            return False
    return True


def classify_collision(ego: OrientedBox, agent: OrientedBox) -> CollisionType:
    """Classify an ego/agent overlap by the agent-centroid bearing in the ego frame.

    Front for |bearing| <= pi/4, rear for |bearing| >= 3*pi/4, side otherwise;
    NONE whenever the boxes do not intersect.
    """
    if not obb_intersects(ego, agent):
        return CollisionType.NONE
    local = world_to_frame(ego.pose, agent.pose.centroid)
    bearing = abs(math.atan2(local[1], local[0]))
    if bearing <= FRONT_SECTOR_HALF_ANGLE:
        return CollisionType.FRONT
    if bearing >= REAR_SECTOR_MIN_ANGLE:
        return CollisionType.REAR
    return CollisionType.SIDE
