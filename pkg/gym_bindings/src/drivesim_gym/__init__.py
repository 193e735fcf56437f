"""Gym-style bindings for the drivesim core.

    import drivesim_gym

    env = drivesim_gym.make("drivergym-v0", config_path="env.json")
    obs = env.reset()
    obs, reward, done, info = env.step(env.action_space.sample())
"""

from __future__ import annotations

from pathlib import Path
from typing import Callable

from .adapter import (
    BackendError,
    GymEnvAdapter,
    InProcessBackend,
    StreamBackend,
    adapter_from_config,
)
from .spaces import Box

ENV_ID = "drivergym-v0"

_REGISTRY: dict[str, Callable[..., GymEnvAdapter]] = {}


def register(env_id: str, factory: Callable[..., GymEnvAdapter]) -> None:
    if env_id in _REGISTRY:
        raise ValueError(f"environment id {env_id!r} already registered")
    _REGISTRY[env_id] = factory


def make(env_id: str, config_path: str | Path) -> GymEnvAdapter:
    """Instantiate a registered environment from its config file."""
    try:
        factory = _REGISTRY[env_id]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY))
        raise ValueError(f"unknown environment id {env_id!r} (known: {known})") from None
    return factory(config_path=config_path)


register(ENV_ID, lambda config_path: adapter_from_config(config_path))

__all__ = [
    "Box",
    "BackendError",
    "ENV_ID",
    "GymEnvAdapter",
    "InProcessBackend",
    "StreamBackend",
    "adapter_from_config",
    "make",
    "register",
]
