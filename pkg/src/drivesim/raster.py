"""Ego-centered birds-eye-view rasterization.

Channel layout (C = 3 + 2 * (history_frames + 1)):

    0                      lane interiors
    1                      crosswalks
    2                      traffic-light tint on the lane nearest each light
    3 .. 3+h               ego box at frames t-h .. t, oldest first
    3+h+1 .. 3+2h+1        all other agents at the same frames, oldest first

The raster is ego-centered and ego-aligned: the ego heading points along
+column and the ego centroid sits at the configured anchor pixel. A pixel is
set when its center lies inside the (half-open) box, which keeps a per-pixel
point-in-box oracle exact.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .geometry import Pose2, world_to_frame
from .scene import AgentRecord, Dataset, Scene, SemanticMap

LIGHT_TINT = {"red": 1.0, "yellow": 0.75, "green": 0.5}

CHANNEL_LANES = 0
CHANNEL_CROSSWALKS = 1
CHANNEL_LIGHT_TINT = 2
CHANNEL_BOXES_START = 3


@dataclass(frozen=True)
class RasterConfig:
    width_px: int = 112
    height_px: int = 112
    meters_per_pixel: float = 0.5
    ego_anchor: tuple[float, float] = (0.25, 0.5)  # fraction of (width, height)
    history_frames: int = 3

    def __post_init__(self) -> None:
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValueError("raster dimensions must be > 0")
        if not self.meters_per_pixel > 0.0:
            raise ValueError("meters_per_pixel must be > 0")
        if not all(0.0 <= a <= 1.0 for a in self.ego_anchor):
            raise ValueError("ego_anchor components must be in [0, 1]")
        if self.history_frames < 0:
            raise ValueError("history_frames must be >= 0")

    @property
    def channels(self) -> int:
        return 3 + 2 * (self.history_frames + 1)


@dataclass(frozen=True, eq=False)
class Raster:
    data: np.ndarray  # (channels, height, width) float32 in [0, 1]

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


def world_to_raster(config: RasterConfig, ego_pose: Pose2,
                    point: tuple[float, float]) -> tuple[float, float]:
    """Map a world point to fractional (col, row) pixel coordinates."""
    ex, ey = world_to_frame(ego_pose, point)
    col = config.ego_anchor[0] * config.width_px + ex / config.meters_per_pixel
    row = config.ego_anchor[1] * config.height_px + ey / config.meters_per_pixel
    return col, row


def raster_to_world(config: RasterConfig, ego_pose: Pose2,
                    colrow: tuple[float, float]) -> tuple[float, float]:
    """Inverse of :func:`world_to_raster`."""
    ex = (colrow[0] - config.ego_anchor[0] * config.width_px) * config.meters_per_pixel
    ey = (colrow[1] - config.ego_anchor[1] * config.height_px) * config.meters_per_pixel
    c, s = math.cos(ego_pose.yaw), math.sin(ego_pose.yaw)
    return (ego_pose.centroid[0] + c * ex - s * ey,
            ego_pose.centroid[1] + s * ex + c * ey)


def _points_to_raster(config: RasterConfig, ego_pose: Pose2,
                      points: np.ndarray) -> np.ndarray:
    d = points - np.asarray(ego_pose.centroid)
    c, s = math.cos(ego_pose.yaw), math.sin(ego_pose.yaw)
    ex = c * d[:, 0] + s * d[:, 1]
    ey = -s * d[:, 0] + c * d[:, 1]
    out = np.empty_like(points, dtype=np.float64)
    out[:, 0] = config.ego_anchor[0] * config.width_px + ex / config.meters_per_pixel
    out[:, 1] = config.ego_anchor[1] * config.height_px + ey / config.meters_per_pixel
    return out


def _fill_box(channel: np.ndarray, config: RasterConfig, ego_pose: Pose2,
              record: AgentRecord) -> None:
    """Set pixels whose centers fall inside the record's oriented box."""
    height, width = channel.shape
    cx, cy = world_to_raster(config, ego_pose, record.pose.centroid)
    mpp = config.meters_per_pixel
    hl = record.extent[0] / (2.0 * mpp)
    hw = record.extent[1] / (2.0 * mpp)
    radius = math.hypot(hl, hw)
    col_lo = max(int(math.floor(cx - radius)), 0)
    col_hi = min(int(math.ceil(cx + radius)) + 1, width)
    row_lo = max(int(math.floor(cy - radius)), 0)
    row_hi = min(int(math.ceil(cy + radius)) + 1, height)
    if col_lo >= col_hi or row_lo >= row_hi:
        return
    dx = (np.arange(col_lo, col_hi, dtype=np.float64) + 0.5 - cx)[None, :]
    dy = (np.arange(row_lo, row_hi, dtype=np.float64) + 0.5 - cy)[:, None]
    psi = record.pose.yaw - ego_pose.yaw  # box heading within the raster plane
    c, s = math.cos(psi), math.sin(psi)
    u = c * dx + s * dy
    v = -s * dx + c * dy
    inside = (u >= -hl) & (u < hl) & (v >= -hw) & (v < hw)
    channel[row_lo:row_hi, col_lo:col_hi][inside] = 1.0


def _fill_polygon(channel: np.ndarray, polygon_px: np.ndarray, value: float) -> None:
    """Even-odd fill of a polygon given in (col, row) pixel coordinates.

    Scanline parity: for every (edge, pixel row) pair where the edge straddles
    the row, pixels left of the edge's crossing point flip. Each flip is a
    column prefix, so parity falls out of a running difference along columns.
    """
    height, width = channel.shape
    poly = np.asarray(polygon_px, dtype=np.float64)
    if len(poly) < 3:
        return
    if (poly[:, 0].max() <= 0.0 or poly[:, 0].min() >= width
            or poly[:, 1].max() <= 0.0 or poly[:, 1].min() >= height):
        return
    x1, y1 = poly[:, 0], poly[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    sloped = y1 != y2  # horizontal edges never straddle a row
    x1, y1, x2, y2 = x1[sloped], y1[sloped], x2[sloped], y2[sloped]
    if len(x1) == 0:
        return
    row_lo = max(int(math.floor(poly[:, 1].min() - 0.5)), 0)
    row_hi = min(int(math.ceil(poly[:, 1].max() + 0.5)) + 1, height)
    if row_lo >= row_hi:
        return
    centers_y = np.arange(row_lo, row_hi, dtype=np.float64) + 0.5
    straddle = (y1[:, None] <= centers_y[None, :]) != (y2[:, None] <= centers_y[None, :])
    edge_idx, row_idx = np.nonzero(straddle)
    if len(edge_idx) == 0:
        return
    x_at = x1[edge_idx] + ((centers_y[row_idx] - y1[edge_idx])
                           * (x2[edge_idx] - x1[edge_idx])
                           / (y2[edge_idx] - y1[edge_idx]))
    # Pixel column c flips iff its center c + 0.5 < x_at: a prefix of length k.
    prefix = np.clip(np.ceil(x_at - 0.5), 0.0, float(width)).astype(np.intp)
    flips = np.zeros((row_hi - row_lo, width + 1), dtype=np.int32)
    np.add.at(flips, (row_idx, np.zeros_like(prefix)), 1)
    np.add.at(flips, (row_idx, prefix), -1)
    parity = (np.cumsum(flips[:, :width], axis=1) & 1).astype(bool)
    target = channel[row_lo:row_hi, :]
    np.maximum(target, np.where(parity, np.float32(value), np.float32(0.0)),
               out=target)


class _MapIndex:
    """Pose-independent geometry derived from a SemanticMap.

    Lane/crosswalk polygons as arrays with world bounding boxes (for culling
    against the raster footprint) and each light's nearest lane.
    """

    def __init__(self, semantic_map: SemanticMap):
        self.lane_polygons = [np.asarray(lane.polygon(), dtype=np.float64)
                              for lane in semantic_map.lanes]
        self.crosswalk_polygons = [np.asarray(cw.polygon, dtype=np.float64)
                                   for cw in semantic_map.crosswalks]
        self.lane_bboxes = _bboxes(self.lane_polygons)
        self.crosswalk_bboxes = _bboxes(self.crosswalk_polygons)
        self.light_lane: dict[int, int] = {}
        for i, light in enumerate(semantic_map.traffic_lights):
            nearest = self._nearest_lane(light.position)
            if nearest is not None:
                self.light_lane[i] = nearest

    def _nearest_lane(self, position: tuple[float, float]) -> int | None:
        best, best_d2 = None, math.inf
        point = np.asarray(position)
        for i, polygon in enumerate(self.lane_polygons):
            d2 = float(((polygon - point) ** 2).sum(axis=1).min())
            if d2 < best_d2:
                best, best_d2 = i, d2
        return best


def _bboxes(polygons: list[np.ndarray]) -> np.ndarray:
    if not polygons:
        return np.empty((0, 4))
    return np.asarray([[p[:, 0].min(), p[:, 1].min(), p[:, 0].max(), p[:, 1].max()]
                       for p in polygons])


_MAP_INDEX_CACHE: dict[int, tuple[weakref.ref, _MapIndex]] = {}


def _map_index(semantic_map: SemanticMap) -> _MapIndex:
    entry = _MAP_INDEX_CACHE.get(id(semantic_map))
    if entry is not None and entry[0]() is semantic_map:
        return entry[1]
    index = _MapIndex(semantic_map)
    if len(_MAP_INDEX_CACHE) >= 64:
        _MAP_INDEX_CACHE.clear()
    _MAP_INDEX_CACHE[id(semantic_map)] = (weakref.ref(semantic_map), index)
    return index


def _within_reach(bboxes: np.ndarray, center: tuple[float, float],
                  reach: float) -> np.ndarray:
    """Boolean mask of bboxes whose distance to `center` is at most `reach`."""
    if len(bboxes) == 0:
        return np.zeros(0, dtype=bool)
    dx = np.maximum(np.maximum(bboxes[:, 0] - center[0], center[0] - bboxes[:, 2]), 0.0)
    dy = np.maximum(np.maximum(bboxes[:, 1] - center[1], center[1] - bboxes[:, 3]), 0.0)
    return dx * dx + dy * dy <= reach * reach


def rasterize(dataset: Dataset, scene: Scene, frame_index: int,
              config: RasterConfig | None = None,
              ego_override: AgentRecord | None = None,
              ego_history: Mapping[int, AgentRecord] | None = None,
              agents_override: Mapping[int, Sequence[AgentRecord]] | None = None,
              ) -> Raster:
    """Render the observation tensor for one frame.

    `ego_override` replaces the logged ego at the current frame;
    `ego_history` / `agents_override` supply simulated states for earlier
    frames (with the log as fallback). Frames before the scene start render
    as empty channels.
    """
    if config is None:
        config = RasterConfig()
    if not 0 <= frame_index < len(scene.frames):
        raise IndexError(
            f"frame_index {frame_index} out of range for scene {scene.scene_id!r} "
            f"with {len(scene.frames)} frames"
        )

    def ego_at(f: int) -> AgentRecord:
        if f == frame_index and ego_override is not None:
            return ego_override
        if ego_history is not None and f in ego_history:
            return ego_history[f]
        return scene.frames[f].ego

    def agents_at(f: int) -> Sequence[AgentRecord]:
        if agents_override is not None and f in agents_override:
            return agents_override[f]
        return scene.frames[f].agents

    ego_pose = ego_at(frame_index).pose
    data = np.zeros((config.channels, config.height_px, config.width_px),
                    dtype=np.float32)

    semantic_map = dataset.map
    index = _map_index(semantic_map)
    reach = config.meters_per_pixel * math.hypot(config.width_px, config.height_px)
    lanes_near = _within_reach(index.lane_bboxes, ego_pose.centroid, reach)
    for i in np.nonzero(lanes_near)[0]:
        _fill_polygon(data[CHANNEL_LANES],
                      _points_to_raster(config, ego_pose, index.lane_polygons[i]), 1.0)
    crosswalks_near = _within_reach(index.crosswalk_bboxes, ego_pose.centroid, reach)
    for i in np.nonzero(crosswalks_near)[0]:
        _fill_polygon(data[CHANNEL_CROSSWALKS],
                      _points_to_raster(config, ego_pose, index.crosswalk_polygons[i]),
                      1.0)
    for i, light in enumerate(semantic_map.traffic_lights):
        color = light.color_at(frame_index)
        if color is None or i not in index.light_lane:
            continue
        lane_index = index.light_lane[i]
        if not lanes_near[lane_index]:
            continue
        _fill_polygon(data[CHANNEL_LIGHT_TINT],
                      _points_to_raster(config, ego_pose,
                                        index.lane_polygons[lane_index]),
                      LIGHT_TINT[color])

    history = config.history_frames
    for j in range(history + 1):
        f = frame_index - history + j
        if f < 0:
            continue
        _fill_box(data[CHANNEL_BOXES_START + j], config, ego_pose, ego_at(f))
        agents_channel = CHANNEL_BOXES_START + history + 1 + j
        for agent in agents_at(f):
            _fill_box(data[agents_channel], config, ego_pose, agent)

    return Raster(data=data)


def write_pgm(path: str | Path, grid: np.ndarray) -> None:
    """Write one channel as an ASCII PGM image (values scaled to 0..255)."""
    values = np.clip(np.rint(np.asarray(grid, dtype=np.float64) * 255.0), 0, 255)
    values = values.astype(np.int32)
    lines = ["P2", f"{grid.shape[1]} {grid.shape[0]}", "255"]
    lines.extend(" ".join(str(v) for v in row) for row in values)
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")
