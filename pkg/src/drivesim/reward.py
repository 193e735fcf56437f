"""Per-frame reward composition from registered metric values."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .geometry import Pose2

DEFAULT_CLIP = 15.0


@dataclass(frozen=True)
class RewardComponent:
    metric: str
    weight: float
    clip: float | None = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.weight):
            raise ValueError(f"reward weight must be finite: {self!r}")
        if self.clip is not None and not self.clip > 0.0:
            raise ValueError(f"clip threshold must be > 0: {self!r}")


@dataclass(frozen=True)
class RewardSpec:
    components: tuple[RewardComponent, ...]


def default_reward_spec() -> RewardSpec:
    """Clipped imitation reward: -min(L2 distance to the recorded ego, 15 m)."""
    return RewardSpec(components=(
        RewardComponent(metric="l2_displacement", weight=1.0, clip=DEFAULT_CLIP),
    ))


def imitation_reward(sim_pose: Pose2, recorded_pose: Pose2, clip: float) -> float:
    """Negative clipped L2 distance between simulated and recorded centroids."""
    if not clip > 0.0:
        raise ValueError(f"clip must be > 0, got {clip}")
    distance = math.hypot(sim_pose.centroid[0] - recorded_pose.centroid[0],
                          sim_pose.centroid[1] - recorded_pose.centroid[1])
    return -min(distance, clip)


def compose_reward(spec: RewardSpec, frame_metrics: Mapping[str, float],
                   polarities: Mapping[str, str] | None = None) -> float:
    """Weighted sum of per-frame metric contributions.

    Clipped components contribute `weight * -min(value, clip)`. Unclipped
    components follow the metric's registered polarity: costs are negated,
    bonuses added.
    """
    if polarities is None:
        from .cle import default_registry

        polarities = default_registry().polarities()
    total = 0.0
    for component in spec.components:
        if component.metric not in frame_metrics:
            raise KeyError(f"reward component metric {component.metric!r} "
                           "missing from frame metrics")
        value = float(frame_metrics[component.metric])
        if component.clip is not None:
            total += component.weight * -min(value, component.clip)
        else:
            polarity = polarities.get(component.metric)
            if polarity is None:
                raise KeyError(f"metric {component.metric!r} has no registered polarity")
            total += component.weight * (value if polarity == "bonus" else -value)
    return total
