"""Run configuration: defaults, YAML/JSON files, environment and flag overrides.

Precedence, highest first: command-line flags, ``STREAMLAT_SEED``, the
config file, built-in defaults.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from pathlib import Path

import yaml

from .compensation import VARIANTS as COMPENSATION_VARIANTS
from .nn import TrainConfig
from .pipeline import ALIGN_VARIANTS
from .stream import parse_latency
from .worldgen import NoiseSpec, SceneConfig

SEED_ENV = "STREAMLAT_SEED"

DEFAULTS = {
    "seed": 0,
    "scene": {
        "duration": 20.0,
        "n_agents": 20,
        "motion_mix": {"cv": 0.4, "turn": 0.4, "stopgo": 0.2},
        "speed_range": [2.0, 10.0],
        "turn_rate_range": [0.15, 0.6],
        "area": 50.0,
        "ego_motion": "constant-velocity",
        "ego_speed": 5.0,
        "ego_turn_rate": 0.1,
        "n_classes": 3,
    },
    "noise": {"sigma_pos": 0.3, "sigma_yaw": 0.1, "sigma_vel": 0.2, "p_miss": 0.1, "fp_rate": 1.0},
    "latency": "constant:0.5",
    "frame_rate": 12.0,
    "eval_rate": 12.0,
    "compensation": {"variant": "trajectory", "fixed_horizon": None},
    "propagation": {"variant": "ode"},
    "models": {"propagator": None, "predictor": None},
    "train": {
        "jitter": 0.3,
        "propagator": {"steps": 800, "lr": 0.1, "batch_size": 128, "optimizer": "sgd", "clip_norm": 10.0},
        "predictor": {"steps": 1000, "lr": 0.004, "batch_size": 128, "optimizer": "adam", "clip_norm": 10.0,
                      "cosine": True},
    },
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_file(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {p} not found")
    data = yaml.safe_load(p.read_text()) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"config file {p} must hold a mapping")
    return data


def set_dotted(cfg: dict, key: str, value) -> None:
    node = cfg
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


def resolve(path=None, overrides: dict | None = None, env=None) -> dict:
    """Merge defaults, file, ``STREAMLAT_SEED`` and flag overrides (dotted keys)."""
    env = os.environ if env is None else env
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        cfg = _merge(cfg, load_file(path))
    if env.get(SEED_ENV, "").strip():
        try:
            cfg["seed"] = int(env[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env[SEED_ENV]!r}") from None
    for k, v in (overrides or {}).items():
        if v is not None:
            set_dotted(cfg, k, v)
    validate(cfg)
    return cfg


def validate(cfg: dict) -> None:
    scene_config(cfg, 0).validate()
    noise_spec(cfg)
    parse_latency(cfg["latency"])
    if cfg["compensation"]["variant"] not in COMPENSATION_VARIANTS:
        raise ConfigError(f"compensation.variant must be one of {COMPENSATION_VARIANTS}")
    if cfg["propagation"]["variant"] not in ALIGN_VARIANTS:
        raise ConfigError(f"propagation.variant must be one of {ALIGN_VARIANTS}")
    if not (cfg["frame_rate"] > 0 and cfg["eval_rate"] > 0):
        raise ConfigError("frame_rate and eval_rate must be positive")


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def scene_config(cfg: dict, seed: int) -> SceneConfig:
    s = cfg["scene"]
    return SceneConfig(
        duration=float(s["duration"]),
        n_agents=int(s["n_agents"]),
        motion_mix=dict(s["motion_mix"]),
        speed_range=tuple(float(v) for v in s["speed_range"]),
        turn_rate_range=tuple(float(v) for v in s["turn_rate_range"]),
        area=float(s["area"]),
        ego_motion=s["ego_motion"],
        ego_speed=float(s["ego_speed"]),
        ego_turn_rate=float(s["ego_turn_rate"]),
        n_classes=int(s["n_classes"]),
        seed=int(seed),
    )


def noise_spec(cfg: dict) -> NoiseSpec:
    n = cfg["noise"]
    if n in ("none", None):
        return NoiseSpec.none()
    try:
        spec = NoiseSpec(**{k: float(v) for k, v in n.items()})
    except TypeError as exc:
        raise ConfigError(f"bad noise block: {exc}") from None
    if min(spec.sigma_pos, spec.sigma_yaw, spec.sigma_vel, spec.fp_rate) < 0 or not 0 <= spec.p_miss <= 1:
        raise ConfigError("noise parameters must be non-negative and p_miss in [0, 1]")
    return spec


def train_config(block: dict, seed: int) -> TrainConfig:
    return TrainConfig(**{**block, "seed": seed})
