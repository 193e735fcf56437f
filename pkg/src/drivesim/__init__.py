"""Driving simulation with BEV raster observations and closed-loop evaluation."""

from .geometry import (
    CollisionType,
    OrientedBox,
    Pose2,
    classify_collision,
    frame_to_world,
    normalize_angle,
    obb_intersects,
    world_to_frame,
)
from .scene import (
    AgentRecord,
    Crosswalk,
    Dataset,
    DatasetError,
    DatasetFormatError,
    DatasetInvariantError,
    Frame,
    Lane,
    Scene,
    SemanticMap,
    TrafficLight,
    load_dataset,
    save_dataset,
    validate_dataset,
)
from .synthetic import generate_synthetic
from .kinematics import (
    Action,
    EgoKinematicState,
    KinematicAction,
    PoseDelta,
    apply_pose_delta,
    unicycle_step,
)
from .raster import Raster, RasterConfig, rasterize, raster_to_world, world_to_raster
from .outputs import SimulationOutput, load_outputs, save_outputs
from .reward import RewardComponent, RewardSpec, compose_reward, imitation_reward
from .cle import (
    EvaluationError,
    EvaluationPlan,
    EvaluationReport,
    MetricRegistry,
    Validator,
    ade,
    ade_series,
    apply_validator,
    collision_indicator_series,
    default_plan,
    default_registry,
    distance_to_reference_series,
    evaluate,
    fde,
    load_plan,
    register_metric,
    save_plan,
)
from .simulation import (
    AgentController,
    ConstantVelocityController,
    ConstantVelocityEgoPolicy,
    DrivingEnv,
    EnvConfig,
    EpisodeDoneError,
    FixedStart,
    LogReplayController,
    RandomStart,
    ReplayPolicy,
    StepResult,
    ZeroPolicy,
    constant_velocity_controller,
    env_config_from_dict,
    env_config_to_dict,
    log_replay_controller,
    rollout,
)

__version__ = "0.1.0"
