"""Latency-aware streaming 3D perception: simulator, propagation, prediction and benchmark."""

__version__ = "0.1.0"

from ._kernels import backend
from .compensation import CompensationStrategy, compensate, ego_reframe
from .core import BoxSet, DetectionBox, ObjectState, Pose2, Rng
from .stream import RunSchedule, parse_latency, schedule_run
from .worldgen import NoiseSpec, Scene, SceneConfig, generate_scene, ground_truth_at, observe

__all__ = [
    "BoxSet",
    "CompensationStrategy",
    "DetectionBox",
    "NoiseSpec",
    "ObjectState",
    "Pose2",
    "Rng",
    "RunSchedule",
    "Scene",
    "SceneConfig",
    "backend",
    "compensate",
    "ego_reframe",
    "generate_scene",
    "ground_truth_at",
    "observe",
    "parse_latency",
    "schedule_run",
]
