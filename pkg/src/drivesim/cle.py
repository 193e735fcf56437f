"""Closed-loop evaluation: per-frame metrics, per-scene validators, composite
metrics, declarative plans, and aggregate reporting.

Validator comparisons express the FAILURE condition: `op="ge", threshold=30`
fails a scene whose scoped value is >= 30. Scene aggregation is the frame
mean (plus the final-frame value), and cross-scene spread is the population
standard deviation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Protocol, Sequence, runtime_checkable

import numpy as np

from .geometry import CollisionType, OrientedBox, classify_collision
from .outputs import SimulationOutput

METERS_PER_MILE = 1609.344

VALIDATOR_SCOPES = ("any_frame", "final_frame", "scene_aggregate")
VALIDATOR_OPS = ("ge", "le")


class EvaluationError(Exception):
    """Raised for plan dependency violations and metric failures."""


@runtime_checkable
class Metric(Protocol):
    metric_name: str
    polarity: str  # "cost" or "bonus"

    def compute(self, output: SimulationOutput) -> np.ndarray: ...


@runtime_checkable
class CompositeMetric(Protocol):
    name: str
    requires_metrics: tuple[str, ...]

    def compute(self, output: SimulationOutput,
                metric_series: dict[str, np.ndarray],
                validator_passed: dict[str, bool]) -> float: ...


# --- built-in metrics ---------------------------------------------------------


def _sim_centroids(output: SimulationOutput) -> np.ndarray:
    return np.asarray([p.centroid for p in output.simulated_ego_states], dtype=np.float64)


def _rec_centroids(output: SimulationOutput) -> np.ndarray:
    return np.asarray([p.centroid for p in output.recorded_ego_states], dtype=np.float64)


def ade_series(output: SimulationOutput) -> np.ndarray:
    """Per-frame L2 distance between simulated and recorded ego centroids."""
    sim = _sim_centroids(output)
    rec = _rec_centroids(output)
    if sim.shape != rec.shape:
        raise EvaluationError(
            f"scene {output.scene_id!r}: simulated/recorded length mismatch"
        )
    return np.linalg.norm(sim - rec, axis=1)


def ade(output: SimulationOutput) -> float:
    """Average displacement error: frame mean of the L2 series."""
    return float(ade_series(output).mean())


def fde(output: SimulationOutput) -> float:
    """Final displacement error: the L2 distance at the last rolled-out frame."""
    series = ade_series(output)
    if len(series) == 0:
        raise EvaluationError(f"scene {output.scene_id!r}: empty rollout")
    return float(series[-1])


def distance_to_reference_series(output: SimulationOutput) -> np.ndarray:
    """Per-frame distance to the closest recorded waypoint (any time index)."""
    sim = _sim_centroids(output)
    rec = _rec_centroids(output)
    deltas = sim[:, None, :] - rec[None, :, :]
    return np.linalg.norm(deltas, axis=2).min(axis=1)


def collision_indicator_series(output: SimulationOutput,
                               kind: CollisionType) -> np.ndarray:
    """Per-frame 0/1 series: a collision of `kind` with any agent at that frame."""
    if kind is CollisionType.NONE:
        raise ValueError("collision metric kind must be front, side, or rear")
    values = np.zeros(len(output), dtype=np.float64)
    for t in range(len(output)):
        ego_box = OrientedBox(pose=output.simulated_ego_states[t],
                              extent=output.ego_extent)
        for agent in output.simulated_agent_states[t]:
            box = OrientedBox(pose=agent.pose, extent=agent.extent)
            if classify_collision(ego_box, box) is kind:
                values[t] = 1.0
                break
    return values


@dataclass(frozen=True)
class _FunctionMetric:
    metric_name: str
    polarity: str
    _fn: Callable[[SimulationOutput], np.ndarray]

    def compute(self, output: SimulationOutput) -> np.ndarray:
        return self._fn(output)


def _builtin_metrics() -> list[Metric]:
    return [
        _FunctionMetric("l2_displacement", "cost", ade_series),
        _FunctionMetric("distance_to_reference", "cost", distance_to_reference_series),
        _FunctionMetric("collision_front", "cost",
                        lambda o: collision_indicator_series(o, CollisionType.FRONT)),
        _FunctionMetric("collision_side", "cost",
                        lambda o: collision_indicator_series(o, CollisionType.SIDE)),
        _FunctionMetric("collision_rear", "cost",
                        lambda o: collision_indicator_series(o, CollisionType.REAR)),
    ]


@dataclass(frozen=True)
class PassedDrivenMiles:
    """Simulated distance driven, in miles, zeroed when any validator failed."""

    name: str = "passed_driven_miles"
    requires_metrics: tuple[str, ...] = ()

    def compute(self, output: SimulationOutput,
                metric_series: dict[str, np.ndarray],
                validator_passed: dict[str, bool]) -> float:
        if not all(validator_passed.values()):
            return 0.0
        sim = _sim_centroids(output)
        if len(sim) < 2:
            return 0.0
        segment_lengths = np.linalg.norm(np.diff(sim, axis=0), axis=1)
        return float(segment_lengths.sum() / METERS_PER_MILE)


# --- registry -----------------------------------------------------------------


class MetricRegistry:
    """Name-addressable metrics and composites for plans and reward specs."""

    def __init__(self) -> None:
        self._metrics: dict[str, Metric] = {}
        self._composites: dict[str, CompositeMetric] = {}

    def register_metric(self, metric: Metric) -> None:
        if metric.metric_name in self._metrics:
            raise EvaluationError(f"metric {metric.metric_name!r} already registered")
        if metric.polarity not in ("cost", "bonus"):
            raise EvaluationError(
                f"metric {metric.metric_name!r}: polarity must be cost or bonus"
            )
        self._metrics[metric.metric_name] = metric

    def register_composite(self, composite: CompositeMetric) -> None:
        if composite.name in self._composites:
            raise EvaluationError(f"composite {composite.name!r} already registered")
        self._composites[composite.name] = composite

    def metric(self, name: str) -> Metric:
        try:
            return self._metrics[name]
        except KeyError:
            raise EvaluationError(f"metric {name!r} is not registered") from None

    def composite(self, name: str) -> CompositeMetric:
        try:
            return self._composites[name]
        except KeyError:
            raise EvaluationError(f"composite {name!r} is not registered") from None

    def polarities(self) -> dict[str, str]:
        return {name: metric.polarity for name, metric in self._metrics.items()}


def default_registry() -> MetricRegistry:
    """A fresh registry holding the built-in metrics and composites."""
    registry = MetricRegistry()
    for metric in _builtin_metrics():
        registry.register_metric(metric)
    registry.register_composite(PassedDrivenMiles())
    return registry


# --- validators and plans -------------------------------------------------


@dataclass(frozen=True)
class Validator:
    name: str
    metric: str
    op: str  # failure comparison: "ge" or "le"
    threshold: float
    scope: str  # "any_frame" | "final_frame" | "scene_aggregate"

    def __post_init__(self) -> None:
        if self.op not in VALIDATOR_OPS:
            raise ValueError(f"validator {self.name!r}: op must be one of {VALIDATOR_OPS}")
        if self.scope not in VALIDATOR_SCOPES:
            raise ValueError(
                f"validator {self.name!r}: scope must be one of {VALIDATOR_SCOPES}"
            )


def apply_validator(validator: Validator, series: np.ndarray) -> bool:
    """Return True when the scene passes (the failure comparison does not hold)."""
    series = np.asarray(series, dtype=np.float64)
    if validator.scope == "any_frame":
        scoped = series
    elif validator.scope == "final_frame":
        scoped = series[-1:]
    else:
        scoped = np.asarray([series.mean()])
    if validator.op == "ge":
        failed = bool(np.any(scoped >= validator.threshold))
    else:
        failed = bool(np.any(scoped <= validator.threshold))
    return not failed


@dataclass(frozen=True)
class EvaluationPlan:
    metrics: tuple[str, ...]
    validators: tuple[Validator, ...] = ()
    composites: tuple[str, ...] = ()


def default_plan() -> EvaluationPlan:
    """Distance metrics, the standard failure validators, and driven miles."""
    return EvaluationPlan(
        metrics=("l2_displacement", "distance_to_reference", "collision_front",
                 "collision_side", "collision_rear"),
        validators=(
            Validator("final_displacement_ge_30", "l2_displacement", "ge", 30.0,
                      "final_frame"),
            Validator("distance_to_reference_ge_4", "distance_to_reference", "ge", 4.0,
                      "any_frame"),
            Validator("front_collision", "collision_front", "ge", 1.0, "any_frame"),
            Validator("side_collision", "collision_side", "ge", 1.0, "any_frame"),
            Validator("rear_collision", "collision_rear", "ge", 1.0, "any_frame"),
        ),
        composites=("passed_driven_miles",),
    )


def check_plan(plan: EvaluationPlan, registry: MetricRegistry) -> None:
    """Verify the dependency closure: every referenced metric is in the plan."""
    for name in plan.metrics:
        registry.metric(name)
    metric_set = set(plan.metrics)
    for validator in plan.validators:
        if validator.metric not in metric_set:
            raise EvaluationError(
                f"validator {validator.name!r} depends on metric "
                f"{validator.metric!r} which is not in the plan"
            )
    for name in plan.composites:
        composite = registry.composite(name)
        for dependency in composite.requires_metrics:
            if dependency not in metric_set:
                raise EvaluationError(
                    f"composite {name!r} depends on metric {dependency!r} "
                    "which is not in the plan"
                )


def plan_to_dict(plan: EvaluationPlan) -> dict[str, Any]:
    return {
        "metrics": list(plan.metrics),
        "validators": [
            {"name": v.name, "metric": v.metric, "op": v.op,
             "threshold": v.threshold, "scope": v.scope}
            for v in plan.validators
        ],
        "composites": list(plan.composites),
    }


def plan_from_dict(value: dict[str, Any]) -> EvaluationPlan:
    try:
        validators = tuple(
            Validator(name=v["name"], metric=v["metric"], op=v["op"],
                      threshold=float(v["threshold"]), scope=v["scope"])
            for v in value.get("validators", ())
        )
        return EvaluationPlan(
            metrics=tuple(value["metrics"]),
            validators=validators,
            composites=tuple(value.get("composites", ())),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise EvaluationError(f"malformed evaluation plan: {exc}") from exc


def load_plan(path: str | Path) -> EvaluationPlan:
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise EvaluationError(f"{path}: invalid JSON: {exc}") from exc
    return plan_from_dict(document)


def save_plan(plan: EvaluationPlan, path: str | Path) -> None:
    Path(path).write_text(json.dumps(plan_to_dict(plan), indent=1) + "\n",
                          encoding="utf-8")


# --- evaluation ----------------------------------------------------------------


@dataclass(frozen=True)
class SceneEvaluation:
    scene_id: str
    metric_means: dict[str, float]
    metric_finals: dict[str, float]
    validator_passed: dict[str, bool]
    composites: dict[str, float]


@dataclass(frozen=True)
class MetricAggregate:
    mean_avg: float
    mean_std: float
    final_avg: float
    final_std: float


@dataclass(frozen=True)
class EvaluationReport:
    scenes: tuple[SceneEvaluation, ...]
    metric_stats: dict[str, MetricAggregate] = field(default_factory=dict)
    validator_failures: dict[str, int] = field(default_factory=dict)
    composite_stats: dict[str, tuple[float, float]] = field(default_factory=dict)


def _evaluate_scene(plan: EvaluationPlan, output: SimulationOutput,
                    registry: MetricRegistry) -> SceneEvaluation:
    series: dict[str, np.ndarray] = {}
    for name in plan.metrics:
        try:
            values = np.asarray(registry.metric(name).compute(output), dtype=np.float64)
        except EvaluationError:
            raise
        except Exception as exc:
            raise EvaluationError(
                f"metric {name!r} failed on scene {output.scene_id!r}: {exc}"
            ) from exc
        if values.ndim != 1 or len(values) != len(output):
            raise EvaluationError(
                f"metric {name!r} on scene {output.scene_id!r}: expected a series "
                f"of length {len(output)}, got shape {values.shape}"
            )
        series[name] = values
    validator_passed = {
        v.name: apply_validator(v, series[v.metric]) for v in plan.validators
    }
    composites = {
        name: float(registry.composite(name).compute(output, series, validator_passed))
        for name in plan.composites
    }
    return SceneEvaluation(
        scene_id=output.scene_id,
        metric_means={name: float(values.mean()) for name, values in series.items()},
        metric_finals={name: float(values[-1]) for name, values in series.items()},
        validator_passed=validator_passed,
        composites=composites,
    )


def evaluate(plan: EvaluationPlan, outputs: Sequence[SimulationOutput],
             registry: MetricRegistry | None = None,
             scene_runner: Callable | None = None) -> EvaluationReport:
    """Run the plan over every scene rollout and aggregate.

    `scene_runner`, when given, maps the per-scene evaluation function over
    the outputs (order-preserving); used to parallelize across scenes.
    """
    if registry is None:
        registry = default_registry()
    check_plan(plan, registry)

    run = scene_runner if scene_runner is not None else map
    scenes = tuple(run(lambda o: _evaluate_scene(plan, o, registry), outputs))

    metric_stats: dict[str, MetricAggregate] = {}
    for name in plan.metrics:
        means = np.asarray([s.metric_means[name] for s in scenes])
        finals = np.asarray([s.metric_finals[name] for s in scenes])
        if len(scenes) > 0:
            metric_stats[name] = MetricAggregate(
                mean_avg=float(means.mean()), mean_std=float(means.std()),
                final_avg=float(finals.mean()), final_std=float(finals.std()),
            )
    validator_failures = {
        v.name: sum(1 for s in scenes if not s.validator_passed[v.name])
        for v in plan.validators
    }
    composite_stats: dict[str, tuple[float, float]] = {}
    for name in plan.composites:
        values = np.asarray([s.composites[name] for s in scenes])
        if len(scenes) > 0:
            composite_stats[name] = (float(values.mean()), float(values.std()))
    return EvaluationReport(
        scenes=scenes,
        metric_stats=metric_stats,
        validator_failures=validator_failures,
        composite_stats=composite_stats,
    )


def register_metric(registry: MetricRegistry, metric: Metric) -> None:
    """Module-level convenience mirroring `registry.register_metric`."""
    registry.register_metric(metric)


# --- report output --------------------------------------------------------------


def _sig4(value: float) -> str:
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return f"{value:.4g}"


def format_report(report: EvaluationReport) -> str:
    """Plain-text table: `average (std. deviation)` per metric, counts per validator."""
    lines = [f"scenes evaluated: {len(report.scenes)}", ""]
    lines.append(f"{'metric':<34}{'frame mean':<22}{'final frame':<22}")
    for name, stats in report.metric_stats.items():
        mean_text = f"{_sig4(stats.mean_avg)} ({_sig4(stats.mean_std)})"
        final_text = f"{_sig4(stats.final_avg)} ({_sig4(stats.final_std)})"
        lines.append(f"{name:<34}{mean_text:<22}{final_text}")
    if report.validator_failures:
        lines.append("")
        lines.append(f"{'validator':<34}{'failed scenes':<22}")
        for name, count in report.validator_failures.items():
            lines.append(f"{name:<34}{count}")
    if report.composite_stats:
        lines.append("")
        lines.append(f"{'composite':<34}{'average (std. deviation)':<22}")
        for name, (avg, std) in report.composite_stats.items():
            lines.append(f"{name:<34}{_sig4(avg)} ({_sig4(std)})")
    return "\n".join(lines)


def report_to_dict(report: EvaluationReport) -> dict[str, Any]:
    return {
        "n_scenes": len(report.scenes),
        "metrics": {
            name: {"mean_avg": s.mean_avg, "mean_std": s.mean_std,
                   "final_avg": s.final_avg, "final_std": s.final_std}
            for name, s in report.metric_stats.items()
        },
        "validators": dict(report.validator_failures),
        "composites": {name: {"avg": avg, "std": std}
                       for name, (avg, std) in report.composite_stats.items()},
        "per_scene": [
            {"scene_id": s.scene_id,
             "metric_means": s.metric_means,
             "metric_finals": s.metric_finals,
             "validator_passed": s.validator_passed,
             "composites": s.composites}
            for s in report.scenes
        ],
    }


def save_report(report: EvaluationReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report_to_dict(report), indent=1) + "\n",
                          encoding="utf-8")
