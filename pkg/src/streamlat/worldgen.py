"""Synthetic dynamic scenes with closed-form ground truth and a detector noise model."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import BoxSet, ObjectState, Pose2, Rng, apply_pose, rotate_vectors, wrap_angle

SCENE_SCHEMA_VERSION = 1

MOTION_MODELS = ("cv", "turn", "stopgo")
EGO_MOTIONS = ("static", "constant-velocity", "constant-turn")

# nominal (length, width, height) per class
CLASS_SIZES = (
    (4.5, 1.9, 1.6),  # car
    (8.0, 2.5, 3.0),  # truck
    (1.8, 0.6, 1.5),  # cyclist
)

# stop-go profile: 2 s moving (0.5 s linear ramps at both ends) then 2 s stopped
STOPGO_PERIOD = 4.0
STOPGO_RAMP = 0.5
_STOPGO_CYCLE_DIST = 1.5  # distance per period in units of cruise speed


class SceneError(ValueError):
    pass


@dataclass
class SceneConfig:
    duration: float = 20.0
    n_agents: int = 20
    motion_mix: dict = field(default_factory=lambda: {"cv": 0.4, "turn": 0.4, "stopgo": 0.2})
    speed_range: tuple = (2.0, 10.0)
    turn_rate_range: tuple = (0.15, 0.6)
    area: float = 50.0
    ego_motion: str = "constant-velocity"
    ego_speed: float = 5.0
    ego_turn_rate: float = 0.1
    n_classes: int = 3
    seed: int = 0

    def validate(self) -> None:
        if self.n_agents < 1:
            raise SceneError("n_agents must be >= 1")
        if self.duration <= 0:
            raise SceneError("duration must be positive")
        if not self.motion_mix:
            raise SceneError("motion_mix must not be empty")
        unknown = set(self.motion_mix) - set(MOTION_MODELS)
        if unknown:
            raise SceneError(f"unknown motion models: {sorted(unknown)}")
        if any(v < 0 for v in self.motion_mix.values()):
            raise SceneError("motion_mix fractions must be non-negative")
        if abs(sum(self.motion_mix.values()) - 1.0) > 1e-9:
            raise SceneError("motion_mix must sum to 1")
        if self.ego_motion not in EGO_MOTIONS:
            raise SceneError(f"ego_motion must be one of {EGO_MOTIONS}")
        if not 1 <= self.n_classes <= len(CLASS_SIZES):
            raise SceneError(f"n_classes must be in [1, {len(CLASS_SIZES)}]")
        lo, hi = self.speed_range
        if not 0 <= lo <= hi:
            raise SceneError("speed_range must satisfy 0 <= lo <= hi")


@dataclass(frozen=True)
class Agent:
    """One parametric trajectory.

    ``turn_rate`` is only used by ``turn``; ``phase`` only by ``stopgo``
    (seconds into the 4 s stop-go cycle at birth).
    """

    id: int
    class_id: int
    model: str
    x0: float
    y0: float
    heading0: float
    speed: float
    turn_rate: float
    phase: float
    size: tuple
    birth: float
    death: float


@dataclass(frozen=True)
class EgoTrajectory:
    motion: str
    speed: float = 0.0
    turn_rate: float = 0.0

    def pose(self, t: float) -> Pose2:
        if self.motion == "static" or self.speed == 0.0:
            return Pose2(0.0, 0.0, self.turn_rate * t if self.motion == "constant-turn" else 0.0)
        if self.motion == "constant-velocity" or self.turn_rate == 0.0:
            return Pose2(self.speed * t, 0.0, 0.0)
        w = self.turn_rate
        r = self.speed / w
        return Pose2(r * math.sin(w * t), r * (1.0 - math.cos(w * t)), w * t)


def _stopgo_cycle_distance(u):
    """Distance (per unit cruise speed) covered after ``u`` seconds into a cycle."""
    u = np.asarray(u, dtype=np.float64)
    w = u - 1.5
    return np.select(
        [u < STOPGO_RAMP, u < 1.5, u < 2.0],
        [u * u, 0.25 + (u - 0.5), 1.25 + (w - w * w)],
        default=_STOPGO_CYCLE_DIST,
    )


def _stopgo_cycle_speed(u):
    u = np.asarray(u, dtype=np.float64)
    return np.select(
        [u < STOPGO_RAMP, u < 1.5, u < 2.0],
        [u / STOPGO_RAMP, np.ones_like(u), (2.0 - u) / STOPGO_RAMP],
        default=0.0,
    )


def _stopgo_distance(a):
    a = np.asarray(a, dtype=np.float64)
    n = np.floor(a / STOPGO_PERIOD)
    return n * _STOPGO_CYCLE_DIST + _stopgo_cycle_distance(a - n * STOPGO_PERIOD)


class Scene:
    """Immutable collection of parametric agent trajectories plus an ego trajectory."""

    def __init__(self, agents, ego: EgoTrajectory, duration: float, config: SceneConfig | None = None):
        self.agents = tuple(agents)
        self.ego = ego
        self.duration = float(duration)
        self.config = config
        self._pack()

    def _pack(self):
        ag = self.agents
        self._ids = np.array([a.id for a in ag], dtype=np.int64)
        self._cls = np.array([a.class_id for a in ag], dtype=np.int64)
        self._model = np.array([MOTION_MODELS.index(a.model) for a in ag], dtype=np.int64)
        self._p0 = np.array([[a.x0, a.y0] for a in ag], dtype=np.float64).reshape(-1, 2)
        self._h0 = np.array([a.heading0 for a in ag], dtype=np.float64)
        self._speed = np.array([a.speed for a in ag], dtype=np.float64)
        self._omega = np.array([a.turn_rate for a in ag], dtype=np.float64)
        self._phase = np.array([a.phase for a in ag], dtype=np.float64)
        self._size = np.array([a.size for a in ag], dtype=np.float64).reshape(-1, 3)
        self._birth = np.array([a.birth for a in ag], dtype=np.float64)
        self._death = np.array([a.death for a in ag], dtype=np.float64)

    def __eq__(self, other):
        return (
            isinstance(other, Scene)
            and self.agents == other.agents
            and self.ego == other.ego
            and self.duration == other.duration
        )

    def _check_time(self, t: float) -> None:
        if not (0.0 <= t <= self.duration) or not math.isfinite(t):
            raise SceneError(f"t={t} outside [0, {self.duration}]")

    def world_arrays(self, t: float) -> dict:
        """World-frame state of every alive agent at ``t`` as column arrays."""
        self._check_time(t)
        alive = (self._birth <= t) & (t <= self._death)
        idx = np.nonzero(alive)[0]
        tau = t - self._birth[idx]
        model = self._model[idx]
        p0, h0, s, w = self._p0[idx], self._h0[idx], self._speed[idx], self._omega[idx]

        dist = s * tau
        spd = s.copy()
        heading = h0.copy()
        omega = np.zeros_like(s)

        sg = model == 2
        if sg.any():
            a = tau[sg] + self._phase[idx][sg]
            ph = self._phase[idx][sg]
            dist[sg] = s[sg] * (_stopgo_distance(a) - _stopgo_distance(ph))
            u = a - np.floor(a / STOPGO_PERIOD) * STOPGO_PERIOD
            spd[sg] = s[sg] * _stopgo_cycle_speed(u)

        pos = p0 + dist[:, None] * np.stack([np.cos(h0), np.sin(h0)], axis=1)

        tr = model == 1
        if tr.any():
            wt = w[tr]
            r = s[tr] / wt
            hh = h0[tr] + wt * tau[tr]
            pos[tr, 0] = p0[tr, 0] + r * (np.sin(hh) - np.sin(h0[tr]))
            pos[tr, 1] = p0[tr, 1] - r * (np.cos(hh) - np.cos(h0[tr]))
            heading[tr] = hh
            omega[tr] = wt

        vel = spd[:, None] * np.stack([np.cos(heading), np.sin(heading)], axis=1)
        return {
            "id": self._ids[idx],
            "class_id": self._cls[idx],
            "center": pos,
            "yaw": wrap_angle(heading),
            "velocity": vel,
            "turn_rate": omega,
            "size": self._size[idx],
        }

    def ego_pose(self, t: float) -> Pose2:
        self._check_time(t)
        return self.ego.pose(t)

    def ego_arrays(self, t: float) -> dict:
        """Agent states expressed in the ego frame at ``t``."""
        w = self.world_arrays(t)
        ego = self.ego.pose(t)
        inv = ego.inverse()
        out = dict(w)
        out["center"] = apply_pose(inv, w["center"]) if len(w["id"]) else w["center"]
        out["yaw"] = wrap_angle(w["yaw"] - ego.yaw)
        out["velocity"] = rotate_vectors(-ego.yaw, w["velocity"]) if len(w["id"]) else w["velocity"]
        return out

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema": "streamlat.scene",
            "version": SCENE_SCHEMA_VERSION,
            "duration": self.duration,
            "ego": {"motion": self.ego.motion, "params": [self.ego.speed, self.ego.turn_rate]},
            "agents": [
                {
                    "id": a.id,
                    "class_id": a.class_id,
                    "model": a.model,
                    # x0, y0, heading0, speed, turn_rate, phase
                    "params": [a.x0, a.y0, a.heading0, a.speed, a.turn_rate, a.phase],
                    "size": list(a.size),
                    "lifespan": [a.birth, a.death],
                }
                for a in self.agents
            ],
            "config": asdict(self.config) if self.config is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        if d.get("schema") != "streamlat.scene":
            raise SceneError("not a streamlat scene document")
        if d.get("version") != SCENE_SCHEMA_VERSION:
            raise SceneError(f"unsupported scene version {d.get('version')}")
        agents = []
        for a in d["agents"]:
            x0, y0, h0, s, w, ph = a["params"]
            agents.append(Agent(
                id=int(a["id"]), class_id=int(a["class_id"]), model=a["model"],
                x0=x0, y0=y0, heading0=h0, speed=s, turn_rate=w, phase=ph,
                size=tuple(a["size"]), birth=a["lifespan"][0], death=a["lifespan"][1],
            ))
        speed, rate = d["ego"]["params"]
        cfg = None
        if d.get("config"):
            c = dict(d["config"])
            c["speed_range"] = tuple(c["speed_range"])
            c["turn_rate_range"] = tuple(c["turn_rate_range"])
            cfg = SceneConfig(**c)
        return cls(agents, EgoTrajectory(d["ego"]["motion"], speed, rate), d["duration"], cfg)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps() + "\n")

    @classmethod
    def load(cls, path) -> "Scene":
        return cls.from_dict(json.loads(Path(path).read_text()))


def generate_scene(cfg: SceneConfig) -> Scene:
    cfg.validate()
    rng = Rng(cfg.seed, 0x5CE)
    names = [m for m in MOTION_MODELS if cfg.motion_mix.get(m, 0.0) > 0.0]
    probs = np.array([cfg.motion_mix[m] for m in names], dtype=np.float64)
    probs /= probs.sum()

    agents = []
    for i in range(cfg.n_agents):
        r = rng.child(i)
        model = names[int(r.choice(len(names), p=probs))]
        cls_id = int(r.integers(0, cfg.n_classes))
        base = np.array(CLASS_SIZES[cls_id])
        size = tuple(float(v) for v in base * r.uniform(0.9, 1.1, size=3))
        x0, y0 = (float(v) for v in r.uniform(-cfg.area, cfg.area, size=2))
        heading = float(r.uniform(-math.pi, math.pi))
        speed = float(r.uniform(*cfg.speed_range))
        turn = 0.0
        if model == "turn":
            turn = float(r.uniform(*cfg.turn_rate_range)) * (1.0 if r.random() < 0.5 else -1.0)
        phase = float(r.uniform(0.0, STOPGO_PERIOD)) if model == "stopgo" else 0.0
        agents.append(Agent(i, cls_id, model, x0, y0, heading, speed, turn, phase, size, 0.0, cfg.duration))

    if cfg.ego_motion == "static":
        ego = EgoTrajectory("static")
    elif cfg.ego_motion == "constant-velocity":
        ego = EgoTrajectory("constant-velocity", cfg.ego_speed, 0.0)
    else:
        ego = EgoTrajectory("constant-turn", cfg.ego_speed, cfg.ego_turn_rate)
    return Scene(agents, ego, cfg.duration, cfg)


def frame_times(duration: float, rate: float) -> np.ndarray:
    """Capture grid ``i / rate`` for ``i / rate < duration`` (12 Hz x 20 s -> 240)."""
    n = int(math.ceil(duration * rate - 1e-9))
    return np.arange(n, dtype=np.float64) / rate


def ground_truth_at(scene: Scene, t: float) -> tuple[list[ObjectState], Pose2]:
    w = scene.world_arrays(t)
    states = [
        ObjectState(
            id=int(w["id"][i]),
            class_id=int(w["class_id"][i]),
            pose=Pose2(w["center"][i, 0], w["center"][i, 1], w["yaw"][i]),
            velocity=(float(w["velocity"][i, 0]), float(w["velocity"][i, 1])),
            turn_rate=float(w["turn_rate"][i]),
            size=tuple(float(v) for v in w["size"][i]),
        )
        for i in range(len(w["id"]))
    ]
    return states, scene.ego.pose(t)


@dataclass(frozen=True)
class NoiseSpec:
    sigma_pos: float = 0.3
    sigma_yaw: float = 0.1
    sigma_vel: float = 0.2
    p_miss: float = 0.1
    fp_rate: float = 1.0

    @classmethod
    def none(cls) -> "NoiseSpec":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0)


def observe(scene: Scene, t: float, noise: NoiseSpec, rng: Rng) -> BoxSet:
    """Detector stand-in: noisy ego-frame boxes of the agents alive at ``t``.

    Velocity noise is isotropic with per-component standard deviation
    ``sigma_vel``. False positives are uniform over the scene area (world
    frame) with sizes and classes drawn like real agents.
    """
    gt = scene.ego_arrays(t)
    n = len(gt["id"])
    keep = rng.random(n) >= noise.p_miss
    center = gt["center"] + rng.normal(0.0, 1.0, size=(n, 2)) * noise.sigma_pos
    yaw = gt["yaw"] + rng.normal(0.0, 1.0, size=n) * noise.sigma_yaw
    vel = gt["velocity"] + rng.normal(0.0, 1.0, size=(n, 2)) * noise.sigma_vel
    score = rng.beta(8.0, 2.0, size=n)
    true = BoxSet(
        center=center[keep], yaw=wrap_angle(yaw[keep]), size=gt["size"][keep].copy(),
        velocity=vel[keep], class_id=gt["class_id"][keep].copy(), score=score[keep],
        track=gt["id"][keep].copy(),
    )

    n_fp = int(rng.poisson(noise.fp_rate)) if noise.fp_rate > 0 else 0
    if n_fp == 0:
        return true
    area = scene.config.area if scene.config is not None else 50.0
    n_classes = scene.config.n_classes if scene.config is not None else len(CLASS_SIZES)
    speed_hi = scene.config.speed_range[1] if scene.config is not None else 10.0
    world = rng.uniform(-area, area, size=(n_fp, 2))
    ego = scene.ego.pose(t)
    fp_cls = rng.integers(0, n_classes, size=n_fp)
    sizes = np.array(CLASS_SIZES)[fp_cls] * rng.uniform(0.9, 1.1, size=(n_fp, 3))
    heading = rng.uniform(-math.pi, math.pi, size=n_fp)
    speed = rng.uniform(0.0, speed_hi, size=n_fp)
    fp = BoxSet(
        center=apply_pose(ego.inverse(), world),
        yaw=wrap_angle(heading),
        size=sizes,
        velocity=speed[:, None] * np.stack([np.cos(heading), np.sin(heading)], axis=1),
        class_id=fp_cls.astype(np.int64),
        score=rng.beta(2.0, 8.0, size=n_fp),
    )
    return BoxSet.concat([true, fp])


def frame_rng(scene_seed: int, frame_index: int) -> Rng:
    """Per-frame observation stream: independent of which frames get processed."""
    return Rng(scene_seed, 0x0B5).child(frame_index)
