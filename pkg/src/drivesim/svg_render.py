"""Static SVG rendering of one scene rollout.

World meters map 1:1 onto SVG user units with the y axis negated (SVG y grows
downward). Recorded and simulated ego trajectories are written as polylines
with stable element ids so the output can be parsed back programmatically.
"""

from __future__ import annotations

from pathlib import Path

from .geometry import OrientedBox
from .outputs import SimulationOutput
from .scene import SemanticMap

DEFAULT_PREDICTION_SCALE = 10.0
DEFAULT_MARKER_INTERVAL = 2.0  # seconds


def _points_attr(points) -> str:
    return " ".join(f"{x!r},{-y!r}" for x, y in points)


def marker_frames(n_states: int, dt: float, marker_interval: float) -> list[int]:
    """Rollout-relative frame offsets at the marker spacing, starting at 0."""
    step = max(1, int(round(marker_interval / dt)))
    return list(range(0, n_states, step))


def render_scene_svg(output: SimulationOutput, semantic_map: SemanticMap,
                     path: str | Path,
                     prediction_scale: float = DEFAULT_PREDICTION_SCALE,
                     marker_interval: float = DEFAULT_MARKER_INTERVAL) -> None:
    sim = [p.centroid for p in output.simulated_ego_states]
    rec = [p.centroid for p in output.recorded_ego_states]

    xs = [p[0] for p in sim + rec]
    ys = [p[1] for p in sim + rec]
    margin = 25.0
    min_x, max_x = min(xs) - margin, max(xs) + margin
    min_y, max_y = min(ys) - margin, max(ys) + margin

    parts: list[str] = []
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="{min_x!r} {-max_y!r} {max_x - min_x!r} {max_y - min_y!r}">'
    )
    parts.append(f'<rect x="{min_x!r}" y="{-max_y!r}" width="{max_x - min_x!r}" '
                 f'height="{max_y - min_y!r}" fill="white"/>')

    for lane in semantic_map.lanes:
        for boundary in (lane.left_boundary, lane.right_boundary):
            parts.append(f'<polyline class="lane" points="{_points_attr(boundary)}" '
                         'fill="none" stroke="#b0b0b0" stroke-width="0.2"/>')
    for crosswalk in semantic_map.crosswalks:
        parts.append(f'<polygon class="crosswalk" points="{_points_attr(crosswalk.polygon)}" '
                     'fill="#e6e6e6" stroke="none"/>')

    markers = marker_frames(len(sim), output.dt, marker_interval)
    for k in markers:
        for agent in output.simulated_agent_states[k]:
            corners = OrientedBox(pose=agent.pose, extent=agent.extent).corners()
            parts.append(f'<polygon class="agent-box" points="{_points_attr(corners)}" '
                         'fill="#5588cc" fill-opacity="0.5" stroke="none"/>')
        ego_box = OrientedBox(pose=output.simulated_ego_states[k],
                              extent=output.ego_extent)
        parts.append(f'<polygon class="ego-box" points="{_points_attr(ego_box.corners())}" '
                     'fill="#cc3333" fill-opacity="0.5" stroke="none"/>')

    parts.append(f'<polyline id="recorded-ego" points="{_points_attr(rec)}" '
                 'fill="none" stroke="#222222" stroke-width="0.3"/>')
    parts.append(f'<polyline id="simulated-ego" points="{_points_attr(sim)}" '
                 'fill="none" stroke="#cc3333" stroke-width="0.3"/>')

    for k in markers:
        if k + 1 >= len(sim):
            continue
        x0, y0 = sim[k]
        x1 = x0 + prediction_scale * (sim[k + 1][0] - x0)
        y1 = y0 + prediction_scale * (sim[k + 1][1] - y0)
        parts.append(f'<line class="prediction" x1="{x0!r}" y1="{-y0!r}" '
                     f'x2="{x1!r}" y2="{-y1!r}" stroke="#33aa33" stroke-width="0.25"/>')

    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
