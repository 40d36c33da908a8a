from .base import Env, Transition
from .path_tracking import Path, PathTrackingEnv, straight_then_arc, weaving_path
from .pendulum import PendulumEnv
from .quadrotor import QuadrotorEnv

ENV_REGISTRY = {
    "pendulum": PendulumEnv,
    "path_tracking": PathTrackingEnv,
    "quadrotor": QuadrotorEnv,
}


def make_env(name, **kwargs):
    if name not in ENV_REGISTRY:
        raise ValueError(f"unknown environment {name!r}; choices: {sorted(ENV_REGISTRY)}")
    return ENV_REGISTRY[name](**kwargs)


__all__ = ["Env", "Transition", "Path", "PendulumEnv", "PathTrackingEnv",
           "QuadrotorEnv", "ENV_REGISTRY", "make_env",
           "straight_then_arc", "weaving_path"]
