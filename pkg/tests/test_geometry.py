from __future__ import annotations

import math

import numpy as np
import pytest

from drivesim.geometry import (
    CollisionType,
    OrientedBox,
    Pose2,
    classify_collision,
    frame_to_world,
    normalize_angle,
    obb_intersects,
    world_to_frame,
)


def box(x: float, y: float, yaw: float, length: float, width: float) -> OrientedBox:
    return OrientedBox(pose=Pose2((x, y), yaw), extent=(length, width))


# --- brute-force intersection oracle -----------------------------------------
#
# Two convex rectangles intersect iff a corner of one lies inside the other or
# their boundaries cross. Corners are tested exactly; boundary crossings are
# found by sampling every edge densely, so the oracle resolves overlaps down
# to its sampling step. Pairs whose best evidence is within ORACLE_MARGIN of
# the boundary are reported as marginal and excluded from comparisons.

ORACLE_MARGIN = 1e-3


def _boundary_points(b: OrientedBox, step: float) -> np.ndarray:
    corners = np.asarray(b.corners())
    points = [corners]
    for i in range(4):
        p, q = corners[i], corners[(i + 1) % 4]
        n = max(2, int(math.ceil(np.linalg.norm(q - p) / step)))
        t = np.linspace(0.0, 1.0, n)[:, None]
        points.append(p + t * (q - p))
    return np.concatenate(points, axis=0)


def _max_signed_depth(b: OrientedBox, points: np.ndarray) -> float:
    """Max over points of the signed depth inside b (positive inside)."""
    c, s = math.cos(b.pose.yaw), math.sin(b.pose.yaw)
    d = points - np.asarray(b.pose.centroid)
    u = c * d[:, 0] + s * d[:, 1]
    v = -s * d[:, 0] + c * d[:, 1]
    hl, hw = b.extent[0] / 2.0, b.extent[1] / 2.0
    return float(np.minimum(hl - np.abs(u), hw - np.abs(v)).max())


def obb_oracle(a: OrientedBox, b: OrientedBox,
               step: float = ORACLE_MARGIN) -> tuple[bool, bool]:
    """(intersects, is_marginal) by dense boundary sampling and containment."""
    depth = max(_max_signed_depth(b, _boundary_points(a, step)),
                _max_signed_depth(a, _boundary_points(b, step)))
    return depth >= 0.0, abs(depth) < ORACLE_MARGIN


def random_box(rng: np.random.Generator, span: float = 8.0) -> OrientedBox:
    return box(rng.uniform(-span, span), rng.uniform(-span, span),
               rng.uniform(-math.pi, math.pi),
               rng.uniform(0.5, 6.0), rng.uniform(0.5, 3.0))


# --- world/frame transforms ---------------------------------------------------


def test_world_to_frame_identity():
    assert world_to_frame(Pose2((0.0, 0.0), 0.0), (3.0, 4.0)) == (3.0, 4.0)


def test_world_to_frame_hand_rotation():
    u, v = world_to_frame(Pose2((1.0, 0.0), math.pi / 2), (1.0, 1.0))
    assert abs(u - 1.0) < 1e-12
    assert abs(v - 0.0) < 1e-12


def test_frame_round_trip():
    rng = np.random.default_rng(3)
    for _ in range(200):
        pose = Pose2((rng.uniform(-50, 50), rng.uniform(-50, 50)),
                     rng.uniform(-math.pi, math.pi))
        p = (rng.uniform(-50, 50), rng.uniform(-50, 50))
        q = frame_to_world(pose, world_to_frame(pose, p))
        assert abs(q[0] - p[0]) < 1e-9
        assert abs(q[1] - p[1]) < 1e-9


def test_normalize_angle_range():
    for a in np.linspace(-20.0, 20.0, 400):
        w = normalize_angle(float(a))
        assert -math.pi < w <= math.pi
        # same direction modulo a full turn
        assert abs(math.remainder(w - a, math.tau)) < 1e-9
    assert normalize_angle(math.pi) == math.pi
    assert normalize_angle(-math.pi) == math.pi


def test_pose_requires_finite():
    with pytest.raises(ValueError):
        Pose2((math.nan, 0.0), 0.0)
    with pytest.raises(ValueError):
        Pose2((0.0, 0.0), math.inf)


# --- obb_intersects -------------------------------------------------------------


def test_identical_boxes_intersect():
    a = box(0.0, 0.0, 0.3, 2.0, 1.0)
    assert obb_intersects(a, a)


def test_distant_unit_squares_disjoint():
    assert not obb_intersects(box(0, 0, 0, 1, 1), box(3, 0, 0, 1, 1))


def test_touching_boxes_count_as_intersecting():
    assert obb_intersects(box(0, 0, 0, 2, 1), box(2, 0, 0, 2, 1))


def test_sat_matches_brute_force_oracle():
    rng = np.random.default_rng(12345)
    checked = 0
    while checked < 300:
        a, b = random_box(rng), random_box(rng)
        expected, marginal = obb_oracle(a, b)
        if marginal:
            continue
        assert obb_intersects(a, b) == expected
        checked += 1


def test_obb_intersects_symmetric():
    rng = np.random.default_rng(99)
    for _ in range(300):
        a, b = random_box(rng), random_box(rng)
        assert obb_intersects(a, b) == obb_intersects(b, a)


def test_obb_intersects_rigid_invariance():
    rng = np.random.default_rng(7)
    for _ in range(200):
        a, b = random_box(rng), random_box(rng)
        tx, ty = rng.uniform(-100, 100, size=2)
        theta = rng.uniform(-math.pi, math.pi)

        def moved(bx: OrientedBox) -> OrientedBox:
            c, s = math.cos(theta), math.sin(theta)
            x, y = bx.pose.centroid
            return OrientedBox(
                pose=Pose2((c * x - s * y + tx, s * x + c * y + ty),
                           bx.pose.yaw + theta),
                extent=bx.extent,
            )

        assert obb_intersects(a, b) == obb_intersects(moved(a), moved(b))


# --- collision classification ----------------------------------------------------


def test_classify_dead_ahead_is_front():
    ego = box(0, 0, 0, 4, 2)
    agent = box(3, 0, 0, 4, 2)
    assert classify_collision(ego, agent) is CollisionType.FRONT


def test_classify_directly_behind_is_rear():
    ego = box(0, 0, 0, 4, 2)
    agent = box(-3, 0, 0, 4, 2)
    assert classify_collision(ego, agent) is CollisionType.REAR


def test_classify_abeam_is_side():
    ego = box(0, 0, 0, 4, 4)
    agent = box(0, 2.5, 0, 4, 4)  # bearing exactly pi/2
    assert obb_intersects(ego, agent)
    assert classify_collision(ego, agent) is CollisionType.SIDE


def test_classify_none_iff_disjoint():
    rng = np.random.default_rng(31)
    for _ in range(300):
        ego, agent = random_box(rng), random_box(rng)
        kind = classify_collision(ego, agent)
        assert (kind is CollisionType.NONE) == (not obb_intersects(ego, agent))


def test_sectors_exhaustive_and_exclusive():
    rng = np.random.default_rng(404)
    ego = box(0, 0, 0, 2, 2)
    for _ in range(1000):
        bearing = rng.uniform(-math.pi, math.pi)
        # Plant an overlapping agent centered at the sampled bearing.
        agent = box(0.5 * math.cos(bearing), 0.5 * math.sin(bearing),
                    rng.uniform(-math.pi, math.pi), 2, 2)
        kind = classify_collision(ego, agent)
        expected = (CollisionType.FRONT if abs(bearing) <= math.pi / 4
                    else CollisionType.REAR if abs(bearing) >= 3 * math.pi / 4
                    else CollisionType.SIDE)
        assert kind is expected


def test_sector_boundaries_resolve_to_front_and_rear():
    ego = box(0, 0, 0, 10, 10)
    on_front_edge = box(1.0, 1.0, 0, 1, 1)  # bearing exactly pi/4
    assert classify_collision(ego, on_front_edge) is CollisionType.FRONT
    on_rear_edge = box(-1.0, 1.0, 0, 1, 1)  # bearing exactly 3*pi/4
    assert classify_collision(ego, on_rear_edge) is CollisionType.REAR


def test_extent_must_be_positive():
    with pytest.raises(ValueError):
        OrientedBox(pose=Pose2((0, 0), 0), extent=(0.0, 1.0))
