"""Deterministic synthetic scene generator.

Scenes are drawn from three templates: straight constant-velocity travel, a
constant-curvature turn, and a stop at a red traffic light that later turns
green. Agents drive on laterally offset lanes so logged trajectories never
collide, and the semantic map carries a lane along every trajectory.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import Pose2, normalize_angle
from .scene import (
    AgentRecord,
    Crosswalk,
    Dataset,
    EGO_TRACK_ID,
    Frame,
    Lane,
    Scene,
    SemanticMap,
    TrafficLight,
    validate_dataset,
)

DEFAULT_DT = 0.1
EGO_EXTENT = (4.87, 1.85)  # placeholder vehicle footprint, meters
LANE_HALF_WIDTH = 1.75
LANE_PITCH = 3.5  # lateral spacing between adjacent lane centers, meters

# Scene origins sit far from the world origin so per-step pose deltas are tiny
# relative to position magnitude; replaying logged deltas then reproduces the
# logged trajectory bit-exactly in double precision.
ORIGIN_BASE = (4000.0, 3000.0)
ORIGIN_PITCH = 500.0


class _FloatDraws:
    """Uniform draws as plain Python floats (keeps datasets JSON-clean)."""

    def __init__(self, rng: np.random.Generator):
        self._rng = rng

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        return float(self._rng.uniform(low, high))


def _unit(yaw: float) -> tuple[float, float]:
    return (math.cos(yaw), math.sin(yaw))


def _left(yaw: float) -> tuple[float, float]:
    return (-math.sin(yaw), math.cos(yaw))


def _lane_offset(slot: int) -> float:
    """Lateral center offset for agent slot 0, 1, 2, ...: +3.5, -3.5, +7, ..."""
    magnitude = LANE_PITCH * (slot // 2 + 1)
    return magnitude if slot % 2 == 0 else -magnitude


class _StraightPath:
    """Constant-velocity travel along a fixed heading."""

    def __init__(self, origin: tuple[float, float], yaw: float, speed: float,
                 lateral: float, along: float):
        ux, uy = _unit(yaw)
        nx, ny = _left(yaw)
        self._start = (origin[0] + nx * lateral + ux * along,
                       origin[1] + ny * lateral + uy * along)
        self._yaw = yaw
        self._speed = speed

    def state(self, t: float) -> tuple[Pose2, tuple[float, float]]:
        ux, uy = _unit(self._yaw)
        s = self._speed * t
        pose = Pose2((self._start[0] + ux * s, self._start[1] + uy * s), self._yaw)
        return pose, (self._speed * ux, self._speed * uy)

    def centerline(self, length_before: float, length_after: float):
        ux, uy = _unit(self._yaw)
        stations = np.arange(-length_before, length_after + 5.0, 5.0)
        return [(self._start[0] + ux * s, self._start[1] + uy * s) for s in stations]


class _ArcPath:
    """Constant angular rate around a fixed center; speed scales with radius."""

    def __init__(self, origin: tuple[float, float], yaw0: float, speed: float,
                 radius: float, turn_sign: float, lateral: float, phase: float):
        self._yaw0 = yaw0
        self._omega = turn_sign * speed / radius
        self._sign = turn_sign
        # Lateral offset to the left shrinks the radius in a left turn.
        self._radius = radius - turn_sign * lateral
        if self._radius < 5.0:
            self._radius = 5.0
        nx, ny = _left(yaw0)
        self._center = (origin[0] + nx * turn_sign * radius,
                        origin[1] + ny * turn_sign * radius)
        self._phase = phase

    def _heading(self, t: float) -> float:
        return self._yaw0 + self._omega * t + self._sign * self._phase

    def state(self, t: float) -> tuple[Pose2, tuple[float, float]]:
        heading = self._heading(t)
        nx, ny = _left(heading)
        centroid = (self._center[0] - self._sign * self._radius * nx,
                    self._center[1] - self._sign * self._radius * ny)
        speed = abs(self._omega) * self._radius
        ux, uy = _unit(heading)
        return Pose2(centroid, normalize_angle(heading)), (speed * ux, speed * uy)

    def centerline(self, duration: float):
        points = []
        for t in np.linspace(-2.0, duration + 2.0, 40):
            heading = self._heading(t)
            nx, ny = _left(heading)
            points.append((self._center[0] - self._sign * self._radius * nx,
                           self._center[1] - self._sign * self._radius * ny))
        return points


class _StopPath:
    """Cruise, brake to a stop line, wait for green, then pull away."""

    def __init__(self, origin: tuple[float, float], yaw: float, speed: float,
                 stop_distance: float, decel: float, green_time: float,
                 lateral: float, accel: float = 2.0):
        ux, uy = _unit(yaw)
        nx, ny = _left(yaw)
        self._start = (origin[0] + nx * lateral, origin[1] + ny * lateral)
        self._yaw = yaw
        self._v = speed
        self._decel = decel
        self._accel = accel
        brake_dist = speed * speed / (2.0 * decel)
        self._t_brake = max(stop_distance - brake_dist, speed * 0.5) / speed
        self._stop_s = self._v * self._t_brake + brake_dist
        self._t_stop = self._t_brake + speed / decel
        self._t_go = max(green_time, self._t_stop) + 1.0  # 1 s reaction time

    def _profile(self, t: float) -> tuple[float, float]:
        if t <= self._t_brake:
            return self._v * t, self._v
        if t <= self._t_stop:
            tau = t - self._t_brake
            return (self._v * self._t_brake + self._v * tau - 0.5 * self._decel * tau * tau,
                    self._v - self._decel * tau)
        if t <= self._t_go:
            return self._stop_s, 0.0
        tau = t - self._t_go
        t_full = (self._v / self._accel)
        if tau <= t_full:
            return self._stop_s + 0.5 * self._accel * tau * tau, self._accel * tau
        return (self._stop_s + 0.5 * self._accel * t_full * t_full
                + self._v * (tau - t_full), self._v)

    def state(self, t: float) -> tuple[Pose2, tuple[float, float]]:
        s, speed = self._profile(t)
        ux, uy = _unit(self._yaw)
        pose = Pose2((self._start[0] + ux * s, self._start[1] + uy * s), self._yaw)
        return pose, (speed * ux, speed * uy)

    def stop_point(self) -> tuple[float, float]:
        ux, uy = _unit(self._yaw)
        return (self._start[0] + ux * self._stop_s, self._start[1] + uy * self._stop_s)

    def centerline(self, duration: float):
        end_s, _ = self._profile(duration)
        ux, uy = _unit(self._yaw)
        stations = np.arange(-20.0, end_s + 25.0, 5.0)
        return [(self._start[0] + ux * s, self._start[1] + uy * s) for s in stations]


def _lane_from_centerline(lane_id: str, centerline, yaw_of_point) -> Lane:
    left, right = [], []
    for point, yaw in zip(centerline, yaw_of_point):
        nx, ny = _left(yaw)
        left.append((float(point[0] + nx * LANE_HALF_WIDTH),
                     float(point[1] + ny * LANE_HALF_WIDTH)))
        right.append((float(point[0] - nx * LANE_HALF_WIDTH),
                      float(point[1] - ny * LANE_HALF_WIDTH)))
    return Lane(lane_id=lane_id, left_boundary=tuple(left), right_boundary=tuple(right))


def generate_synthetic(seed: int, n_scenes: int, frames_per_scene: int,
                       n_agents: int) -> Dataset:
    """Build a deterministic synthetic dataset; a pure function of its arguments."""
    if n_scenes < 1:
        raise ValueError(f"n_scenes must be >= 1, got {n_scenes}")
    if frames_per_scene < 2:
        raise ValueError(f"frames_per_scene must be >= 2, got {frames_per_scene}")
    if n_agents < 0:
        raise ValueError(f"n_agents must be >= 0, got {n_agents}")

    dt = DEFAULT_DT
    scenes = []
    lanes: list[Lane] = []
    crosswalks: list[Crosswalk] = []
    lights: list[TrafficLight] = []

    for scene_index in range(n_scenes):
        base_rng = np.random.default_rng([seed, scene_index])
        rng = _FloatDraws(base_rng)
        template = scene_index % 3
        origin = (ORIGIN_BASE[0] + ORIGIN_PITCH * scene_index + rng.uniform(-50.0, 50.0),
                  ORIGIN_BASE[1] + ORIGIN_PITCH * (scene_index % 7) + rng.uniform(-50.0, 50.0))
        yaw0 = rng.uniform(-math.pi, math.pi)
        speed = rng.uniform(5.0, 12.0)
        duration = (frames_per_scene - 1) * dt
        scene_id = f"scene_{scene_index:04d}"

        paths = []
        if template == 0:
            paths.append(_StraightPath(origin, yaw0, speed, 0.0, 0.0))
            for slot in range(n_agents):
                paths.append(_StraightPath(origin, yaw0, rng.uniform(4.0, 12.0),
                                           _lane_offset(slot), rng.uniform(-20.0, 20.0)))
            for i, path in enumerate(paths):
                center = path.centerline(55.0, 12.0 * duration + 55.0)
                lanes.append(_lane_from_centerline(f"{scene_id}_lane_{i}", center,
                                                   [yaw0] * len(center)))
        elif template == 1:
            radius = rng.uniform(25.0, 60.0)
            turn_sign = 1.0 if rng.uniform() < 0.5 else -1.0
            speed = min(speed, 10.0)
            paths.append(_ArcPath(origin, yaw0, speed, radius, turn_sign, 0.0, 0.0))
            for slot in range(n_agents):
                paths.append(_ArcPath(origin, yaw0, speed, radius, turn_sign,
                                      _lane_offset(slot), rng.uniform(-0.1, 0.1)))
            for i, path in enumerate(paths):
                center = path.centerline(duration)
                yaws = []
                for j in range(len(center)):
                    after = center[min(j + 1, len(center) - 1)]
                    before = center[max(j - 1, 0)]
                    yaws.append(math.atan2(after[1] - before[1], after[0] - before[0]))
                lanes.append(_lane_from_centerline(f"{scene_id}_lane_{i}", center, yaws))
        else:
            stop_distance = rng.uniform(18.0, 35.0)
            decel = rng.uniform(1.5, 3.0)
            green_frame = max(1, int(frames_per_scene * 0.7))
            green_time = green_frame * dt
            ego_path = _StopPath(origin, yaw0, speed, stop_distance, decel, green_time, 0.0)
            paths.append(ego_path)
            for slot in range(n_agents):
                paths.append(_StopPath(origin, yaw0, rng.uniform(4.0, 10.0),
                                       stop_distance, rng.uniform(1.5, 3.0), green_time,
                                       _lane_offset(slot)))
            for i, path in enumerate(paths):
                center = path.centerline(duration)
                lanes.append(_lane_from_centerline(f"{scene_id}_lane_{i}", center,
                                                   [yaw0] * len(center)))
            stop = ego_path.stop_point()
            ux, uy = _unit(yaw0)
            nx, ny = _left(yaw0)
            span = LANE_PITCH * (n_agents // 2 + 1) + LANE_HALF_WIDTH
            ahead = 3.0
            crosswalks.append(Crosswalk(
                crosswalk_id=f"{scene_id}_crosswalk",
                polygon=(
                    (stop[0] + ux * ahead + nx * span, stop[1] + uy * ahead + ny * span),
                    (stop[0] + ux * (ahead + 3.0) + nx * span,
                     stop[1] + uy * (ahead + 3.0) + ny * span),
                    (stop[0] + ux * (ahead + 3.0) - nx * span,
                     stop[1] + uy * (ahead + 3.0) - ny * span),
                    (stop[0] + ux * ahead - nx * span, stop[1] + uy * ahead - ny * span),
                ),
            ))
            lights.append(TrafficLight(
                light_id=f"{scene_id}_light",
                position=(stop[0] + ux * 2.0 - nx * (span + 1.0),
                          stop[1] + uy * 2.0 - ny * (span + 1.0)),
                states=((0, "red"), (green_frame, "green")),
            ))

        agent_extents = [(rng.uniform(4.0, 5.2), rng.uniform(1.65, 2.0))
                         for _ in range(n_agents)]
        frames = []
        for k in range(frames_per_scene):
            t = k * dt
            ego_pose, ego_velocity = paths[0].state(t)
            ego = AgentRecord(track_id=EGO_TRACK_ID, pose=ego_pose,
                              extent=EGO_EXTENT, velocity=ego_velocity)
            agents = []
            for slot in range(n_agents):
                pose, velocity = paths[slot + 1].state(t)
                agents.append(AgentRecord(
                    track_id=slot + 1,
                    pose=pose,
                    extent=agent_extents[slot],
                    velocity=velocity,
                ))
            frames.append(Frame(index=k, timestamp=t, ego=ego, agents=tuple(agents)))
        scenes.append(Scene(scene_id=scene_id, dt=dt, frames=tuple(frames)))

    dataset = Dataset(
        scenes=tuple(scenes),
        map=SemanticMap(lanes=tuple(lanes), crosswalks=tuple(crosswalks),
                        traffic_lights=tuple(lights)),
    )
    validate_dataset(dataset)
    return dataset
