"""Episodic driving environment: reset/step lifecycle, agent control, and
rollout capture.

Within one step the ego advances first, then the agents, and the observation,
reward, and collision label are all computed on the post-step frame. Reactive
controllers see the simulated world (including the just-moved ego); log replay
ignores it by definition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol, Sequence, runtime_checkable

import numpy as np

from .cle import default_registry
from .geometry import CollisionType, OrientedBox, Pose2, classify_collision, world_to_frame
from .kinematics import (
    Action,
    EgoKinematicState,
    KinematicAction,
    PoseDelta,
    apply_pose_delta,
    unicycle_step,
)
from .outputs import SimulationOutput
from .raster import Raster, RasterConfig, rasterize
from .reward import RewardComponent, RewardSpec, compose_reward, default_reward_spec
from .scene import AgentRecord, Dataset, EGO_TRACK_ID, Scene

DEFAULT_MAX_EPISODE_STEPS = 32
DEFAULT_EXIT_RADIUS = 100.0

ACTION_MODES = ("pose_delta", "kinematic")
AGENT_MODES = ("log_replay", "reactive")


@dataclass(frozen=True)
class FixedStart:
    index: int


@dataclass(frozen=True)
class RandomStart:
    seed: int


StartPolicy = FixedStart | RandomStart


@dataclass(frozen=True)
class EnvConfig:
    raster: RasterConfig = field(default_factory=RasterConfig)
    action_mode: str = "pose_delta"
    max_episode_steps: int = DEFAULT_MAX_EPISODE_STEPS
    agent_mode: str = "log_replay"
    start: StartPolicy = FixedStart(0)
    reward: RewardSpec = field(default_factory=default_reward_spec)
    terminate_on_collision: bool = False
    allow_reverse: bool = False
    reactive_exit_radius: float = DEFAULT_EXIT_RADIUS

    def __post_init__(self) -> None:
        if self.action_mode not in ACTION_MODES:
            raise ValueError(f"action_mode must be one of {ACTION_MODES}")
        if self.agent_mode not in AGENT_MODES:
            raise ValueError(f"agent_mode must be one of {AGENT_MODES}")
        if self.max_episode_steps < 1:
            raise ValueError("max_episode_steps must be >= 1")


@dataclass(frozen=True)
class StepResult:
    observation: Raster
    reward: float
    done: bool
    info: dict[str, Any]


@runtime_checkable
class AgentController(Protocol):
    """Produces the next frame's agent records from the simulated world state."""

    def begin_episode(self, scene: Scene, start_frame: int) -> None: ...

    def next_agents(self, scene: Scene, frame_index: int,
                    agents: Sequence[AgentRecord],
                    ego: AgentRecord) -> tuple[AgentRecord, ...]: ...


class LogReplayController:
    """Replays logged agents verbatim, ignoring the simulated world."""

    def begin_episode(self, scene: Scene, start_frame: int) -> None:
        pass

    def next_agents(self, scene: Scene, frame_index: int,
                    agents: Sequence[AgentRecord],
                    ego: AgentRecord) -> tuple[AgentRecord, ...]:
        return tuple(scene.frames[frame_index + 1].agents)


class ConstantVelocityController:
    """Continues each agent at its current velocity and yaw.

    Agents still enter per the log; an agent farther than `exit_radius` from
    the ego leaves the simulation and does not return.
    """

    def __init__(self, exit_radius: float = DEFAULT_EXIT_RADIUS):
        self.exit_radius = exit_radius
        self._exited: set[int] = set()

    def begin_episode(self, scene: Scene, start_frame: int) -> None:
        self._exited = set()

    def next_agents(self, scene: Scene, frame_index: int,
                    agents: Sequence[AgentRecord],
                    ego: AgentRecord) -> tuple[AgentRecord, ...]:
        dt = scene.dt
        ego_x, ego_y = ego.pose.centroid
        advanced: list[AgentRecord] = []
        active_ids = set()
        for agent in agents:
            centroid = (agent.pose.centroid[0] + agent.velocity[0] * dt,
                        agent.pose.centroid[1] + agent.velocity[1] * dt)
            if math.hypot(centroid[0] - ego_x, centroid[1] - ego_y) > self.exit_radius:
                self._exited.add(agent.track_id)
                continue
            active_ids.add(agent.track_id)
            advanced.append(AgentRecord(track_id=agent.track_id,
                                        pose=Pose2(centroid, agent.pose.yaw),
                                        extent=agent.extent,
                                        velocity=agent.velocity))
        for logged in scene.frames[frame_index + 1].agents:
            if logged.track_id not in active_ids and logged.track_id not in self._exited:
                advanced.append(logged)
        return tuple(advanced)


def log_replay_controller() -> LogReplayController:
    return LogReplayController()


def constant_velocity_controller(exit_radius: float = DEFAULT_EXIT_RADIUS,
                                 ) -> ConstantVelocityController:
    return ConstantVelocityController(exit_radius=exit_radius)


class EpisodeDoneError(RuntimeError):
    """Raised when step is called on a finished or unstarted episode."""


class DrivingEnv:
    """One mutable episode over an immutable dataset.

    Instances are single-threaded; run several environments over a shared
    dataset for parallel rollouts.
    """

    def __init__(self, dataset: Dataset, config: EnvConfig | None = None,
                 agent_controller: AgentController | None = None):
        self.dataset = dataset
        self.config = config if config is not None else EnvConfig()
        if agent_controller is not None:
            self._controller = agent_controller
        elif self.config.agent_mode == "log_replay":
            self._controller = LogReplayController()
        else:
            self._controller = ConstantVelocityController(self.config.reactive_exit_radius)
        if isinstance(self.config.start, RandomStart):
            self._start_rng = np.random.default_rng(self.config.start.seed)
        else:
            self._start_rng = None
        self._polarities = default_registry().polarities()
        self._scene: Scene | None = None
        self._done = True
        self._steps = 0

    @property
    def scene(self) -> Scene:
        if self._scene is None:
            raise EpisodeDoneError("reset has not been called")
        return self._scene

    @property
    def start_frame(self) -> int:
        return self._start_frame

    @property
    def frame_index(self) -> int:
        return self._frame_index

    @property
    def done(self) -> bool:
        return self._done

    def reset(self, scene_index: int) -> Raster:
        if not 0 <= scene_index < len(self.dataset.scenes):
            raise IndexError(f"scene_index {scene_index} out of range "
                             f"({len(self.dataset.scenes)} scenes)")
        scene = self.dataset.scenes[scene_index]
        n_frames = len(scene.frames)
        if isinstance(self.config.start, FixedStart):
            start = self.config.start.index
        else:
            start = int(self._start_rng.integers(0, n_frames - 1))
        if not 0 <= start <= n_frames - 2:
            raise ValueError(
                f"start frame {start} too close to scene end "
                f"({n_frames} frames; at least 2 must remain)"
            )
        self._scene = scene
        self._start_frame = start
        self._frame_index = start
        self._steps = 0
        self._done = False
        ego = scene.frames[start].ego
        self._ego_extent = ego.extent
        self._ego_state = EgoKinematicState(
            pose=ego.pose, speed=math.hypot(ego.velocity[0], ego.velocity[1]))
        self._sim_ego: dict[int, AgentRecord] = {start: ego}
        self._sim_agents: dict[int, tuple[AgentRecord, ...]] = {
            start: tuple(scene.frames[start].agents)}
        self._recorded_centroids = np.asarray(
            [f.ego.pose.centroid for f in scene.frames], dtype=np.float64)
        self._controller.begin_episode(scene, start)
        return self._observe(start)

    def _observe(self, frame_index: int) -> Raster:
        return rasterize(self.dataset, self._scene, frame_index,
                         config=self.config.raster,
                         ego_history=self._sim_ego,
                         agents_override=self._sim_agents)

    def step(self, action: Action) -> StepResult:
        if self._scene is None:
            raise EpisodeDoneError("reset has not been called")
        if self._done:
            raise EpisodeDoneError("episode is done; call reset")
        scene = self._scene
        t = self._frame_index
        t_next = t + 1
        dt = scene.dt

        if self.config.action_mode == "pose_delta":
            if not isinstance(action, PoseDelta):
                raise TypeError(f"expected PoseDelta in pose_delta mode, got {action!r}")
            new_pose = apply_pose_delta(self._ego_state.pose, action)
            self._ego_state = EgoKinematicState(
                pose=new_pose, speed=math.hypot(action.dx, action.dy) / dt)
        else:
            if not isinstance(action, KinematicAction):
                raise TypeError(f"expected KinematicAction in kinematic mode, got {action!r}")
            self._ego_state = unicycle_step(self._ego_state, action, dt,
                                            allow_reverse=self.config.allow_reverse)
            new_pose = self._ego_state.pose

        previous = self._sim_ego[t]
        velocity = ((new_pose.centroid[0] - previous.pose.centroid[0]) / dt,
                    (new_pose.centroid[1] - previous.pose.centroid[1]) / dt)
        ego_record = AgentRecord(track_id=EGO_TRACK_ID, pose=new_pose,
                                 extent=self._ego_extent, velocity=velocity)
        agents = self._controller.next_agents(scene, t, self._sim_agents[t], ego_record)

        self._sim_ego[t_next] = ego_record
        self._sim_agents[t_next] = agents
        self._frame_index = t_next
        self._steps += 1

        collision = CollisionType.NONE
        kinds = set()
        ego_box = OrientedBox(pose=new_pose, extent=self._ego_extent)
        for agent in agents:
            kind = classify_collision(ego_box, OrientedBox(pose=agent.pose,
                                                           extent=agent.extent))
            if kind is not CollisionType.NONE:
                kinds.add(kind)
                if collision is CollisionType.NONE:
                    collision = kind

        recorded_pose = scene.frames[t_next].ego.pose
        deltas = self._recorded_centroids - np.asarray(new_pose.centroid)
        frame_metrics = {
            "l2_displacement": math.hypot(
                new_pose.centroid[0] - recorded_pose.centroid[0],
                new_pose.centroid[1] - recorded_pose.centroid[1]),
            "distance_to_reference": float(np.linalg.norm(deltas, axis=1).min()),
            "collision_front": 1.0 if CollisionType.FRONT in kinds else 0.0,
            "collision_side": 1.0 if CollisionType.SIDE in kinds else 0.0,
            "collision_rear": 1.0 if CollisionType.REAR in kinds else 0.0,
        }
        reward = compose_reward(self.config.reward, frame_metrics, self._polarities)

        self._done = (t_next == len(scene.frames) - 1
                      or self._steps >= self.config.max_episode_steps)
        if self.config.terminate_on_collision and collision is not CollisionType.NONE:
            self._done = True

        observation = self._observe(t_next)
        info = {
            "frame_index": t_next,
            "ego_pose": new_pose,
            "recorded_ego_pose": recorded_pose,
            "collision": collision,
        }
        return StepResult(observation=observation, reward=reward,
                          done=self._done, info=info)

    def output(self) -> SimulationOutput:
        """Snapshot of the episode so far as a SimulationOutput."""
        if self._scene is None:
            raise EpisodeDoneError("reset has not been called")
        frames = range(self._start_frame, self._frame_index + 1)
        return SimulationOutput(
            scene_id=self._scene.scene_id,
            start_frame=self._start_frame,
            dt=self._scene.dt,
            ego_extent=self._ego_extent,
            simulated_ego_states=tuple(self._sim_ego[f].pose for f in frames),
            recorded_ego_states=tuple(self._scene.frames[f].ego.pose for f in frames),
            simulated_agent_states=tuple(self._sim_agents[f] for f in frames),
        )


Policy = Callable[[Raster], Action]


def rollout(env: DrivingEnv, policy: Policy, scene_index: int) -> SimulationOutput:
    """Reset, then step until done; returns the captured SimulationOutput."""
    observation = env.reset(scene_index)
    begin = getattr(policy, "begin_episode", None)
    if begin is not None:
        begin(env.scene, env.start_frame)
    while not env.done:
        result = env.step(policy(observation))
        observation = result.observation
    return env.output()


class ReplayPolicy:
    """Emits the logged frame-to-frame pose delta; the replay oracle."""

    def __init__(self) -> None:
        self._scene: Scene | None = None
        self._frame = 0

    def begin_episode(self, scene: Scene, start_frame: int) -> None:
        self._scene = scene
        self._frame = start_frame

    def __call__(self, observation: Raster) -> PoseDelta:
        frames = self._scene.frames
        current = frames[self._frame].ego.pose
        target = frames[min(self._frame + 1, len(frames) - 1)].ego.pose
        self._frame += 1
        dx, dy = world_to_frame(current, target.centroid)
        return PoseDelta(dx=dx, dy=dy, dyaw=target.yaw - current.yaw)


class ZeroPolicy:
    """Holds still (pose_delta mode) or coasts with zero controls (kinematic)."""

    def __init__(self, action_mode: str = "pose_delta"):
        self._action: Action = (PoseDelta(0.0, 0.0, 0.0)
                                if action_mode == "pose_delta"
                                else KinematicAction(0.0, 0.0))

    def __call__(self, observation: Raster) -> Action:
        return self._action


class ConstantVelocityEgoPolicy:
    """Keeps the ego moving straight at its speed from the episode start."""

    def __init__(self) -> None:
        self._step_length = 0.0

    def begin_episode(self, scene: Scene, start_frame: int) -> None:
        ego = scene.frames[start_frame].ego
        self._step_length = math.hypot(ego.velocity[0], ego.velocity[1]) * scene.dt

    def __call__(self, observation: Raster) -> PoseDelta:
        return PoseDelta(dx=self._step_length, dy=0.0, dyaw=0.0)


POLICIES: dict[str, Callable[[str], Policy]] = {
    "replay": lambda mode: ReplayPolicy(),
    "zero": lambda mode: ZeroPolicy(mode),
    "constant_velocity_ego": lambda mode: ConstantVelocityEgoPolicy(),
}


# --- config serialization ----------------------------------------------------


def env_config_to_dict(config: EnvConfig) -> dict[str, Any]:
    start: dict[str, int]
    if isinstance(config.start, FixedStart):
        start = {"fixed": config.start.index}
    else:
        start = {"random": config.start.seed}
    return {
        "raster": {
            "width_px": config.raster.width_px,
            "height_px": config.raster.height_px,
            "meters_per_pixel": config.raster.meters_per_pixel,
            "ego_anchor": list(config.raster.ego_anchor),
            "history_frames": config.raster.history_frames,
        },
        "action_mode": config.action_mode,
        "max_episode_steps": config.max_episode_steps,
        "agent_mode": config.agent_mode,
        "start": start,
        "reward": {"components": [
            {"metric": c.metric, "weight": c.weight, "clip": c.clip}
            for c in config.reward.components
        ]},
        "terminate_on_collision": config.terminate_on_collision,
        "allow_reverse": config.allow_reverse,
        "reactive_exit_radius": config.reactive_exit_radius,
    }


def env_config_from_dict(value: dict[str, Any]) -> EnvConfig:
    defaults = EnvConfig()
    raster_value = value.get("raster", {})
    raster = RasterConfig(
        width_px=raster_value.get("width_px", 112),
        height_px=raster_value.get("height_px", 112),
        meters_per_pixel=raster_value.get("meters_per_pixel", 0.5),
        ego_anchor=tuple(raster_value.get("ego_anchor", (0.25, 0.5))),
        history_frames=raster_value.get("history_frames", 3),
    )
    start_value = value.get("start", {"fixed": 0})
    start: StartPolicy
    if "fixed" in start_value:
        start = FixedStart(int(start_value["fixed"]))
    elif "random" in start_value:
        start = RandomStart(int(start_value["random"]))
    else:
        raise ValueError(f"start policy must be {{'fixed': i}} or {{'random': seed}}, "
                         f"got {start_value!r}")
    reward_value = value.get("reward")
    if reward_value is None:
        reward = default_reward_spec()
    else:
        reward = RewardSpec(components=tuple(
            RewardComponent(metric=c["metric"], weight=float(c["weight"]),
                            clip=None if c.get("clip") is None else float(c["clip"]))
            for c in reward_value.get("components", ())
        ))
    return EnvConfig(
        raster=raster,
        action_mode=value.get("action_mode", defaults.action_mode),
        max_episode_steps=value.get("max_episode_steps", defaults.max_episode_steps),
        agent_mode=value.get("agent_mode", defaults.agent_mode),
        start=start,
        reward=reward,
        terminate_on_collision=value.get("terminate_on_collision", False),
        allow_reverse=value.get("allow_reverse", False),
        reactive_exit_radius=value.get("reactive_exit_radius", DEFAULT_EXIT_RADIUS),
    )
