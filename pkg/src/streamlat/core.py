"""Shared geometry, kinematic value types and deterministic randomness."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(a):
    """Wrap an angle (scalar or array) into (-pi, pi]."""
    if np.ndim(a) == 0:
        a = float(a)
        w = math.fmod(a + math.pi, TWO_PI)
        if w <= 0.0:
            w += TWO_PI
        return w - math.pi
    a = np.asarray(a, dtype=np.float64)
    w = np.fmod(a + np.pi, TWO_PI)
    w = np.where(w <= 0.0, w + TWO_PI, w)
    return w - np.pi


def rot2(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class Pose2:
    """Planar rigid transform: rotate by ``yaw``, then translate by ``(x, y)``."""

    x: float = 0.0
    y: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))

    @classmethod
    def identity(cls) -> "Pose2":
        return cls(0.0, 0.0, 0.0)

    @property
    def translation(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def matrix(self) -> np.ndarray:
        """3x3 homogeneous matrix."""
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([[c, -s, self.x], [s, c, self.y], [0.0, 0.0, 1.0]])

    def inverse(self) -> "Pose2":
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return Pose2(-(c * self.x + s * self.y), s * self.x - c * self.y, -self.yaw)

    def as_features(self) -> np.ndarray:
        """``[cos yaw, sin yaw, dx, dy]`` encoding, continuous across the yaw wrap."""
        return np.array([math.cos(self.yaw), math.sin(self.yaw), self.x, self.y])

    def __matmul__(self, other: "Pose2") -> "Pose2":
        return compose_pose(self, other)


def compose_pose(a: Pose2, b: Pose2) -> Pose2:
    """Return ``a ∘ b``: applying the result equals applying ``b`` then ``a``."""
    c, s = math.cos(a.yaw), math.sin(a.yaw)
    return Pose2(a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y, a.yaw + b.yaw)


def apply_pose(t: Pose2, point) -> np.ndarray:
    """Rotate then translate ``point``; accepts a 2-vector or an (N, 2) array."""
    p = np.asarray(point, dtype=np.float64)
    c, s = math.cos(t.yaw), math.sin(t.yaw)
    x, y = p[..., 0], p[..., 1]
    return np.stack([c * x - s * y + t.x, s * x + c * y + t.y], axis=-1)


def rotate_vectors(yaw: float, v) -> np.ndarray:
    """Rotate 2-vectors (no translation)."""
    v = np.asarray(v, dtype=np.float64)
    c, s = math.cos(yaw), math.sin(yaw)
    return np.stack([c * v[..., 0] - s * v[..., 1], s * v[..., 0] + c * v[..., 1]], axis=-1)


def relative_pose(src: Pose2, dst: Pose2) -> Pose2:
    """Transform taking coordinates in frame ``src`` into frame ``dst`` (both world poses)."""
    return compose_pose(dst.inverse(), src)


@dataclass(frozen=True)
class ObjectState:
    id: int
    class_id: int
    pose: Pose2
    velocity: tuple[float, float]
    turn_rate: float
    size: tuple[float, float, float]

    def __post_init__(self):
        if any(s <= 0 for s in self.size):
            raise ValueError(f"size components must be positive, got {self.size}")
        if not all(math.isfinite(v) for v in self.velocity):
            raise ValueError("velocity must be finite")

    @property
    def center(self) -> tuple[float, float]:
        return (self.pose.x, self.pose.y)

    @property
    def yaw(self) -> float:
        return self.pose.yaw


@dataclass(frozen=True)
class DetectionBox:
    center: tuple[float, float]
    yaw: float
    size: tuple[float, float, float]
    velocity: tuple[float, float]
    class_id: int
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score}")
        if any(s <= 0 for s in self.size):
            raise ValueError(f"size components must be positive, got {self.size}")


@dataclass
class BoxSet:
    """Column-oriented batch of detection boxes (one frame).

    ``track`` carries the ground-truth agent id behind each box (-1 for false
    positives). It is simulator bookkeeping used to build training labels and
    is never read by matching or compensation.
    """

    center: np.ndarray  # (N, 2)
    yaw: np.ndarray  # (N,)
    size: np.ndarray  # (N, 3)
    velocity: np.ndarray  # (N, 2)
    class_id: np.ndarray  # (N,) int
    score: np.ndarray  # (N,)
    track: np.ndarray = field(default=None)  # (N,) int

    def __post_init__(self):
        n = len(self.yaw)
        if self.track is None:
            self.track = np.full(n, -1, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.yaw)

    @classmethod
    def empty(cls) -> "BoxSet":
        return cls(
            np.zeros((0, 2)), np.zeros(0), np.zeros((0, 3)), np.zeros((0, 2)),
            np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros(0, dtype=np.int64),
        )

    @classmethod
    def from_boxes(cls, boxes: Sequence[DetectionBox]) -> "BoxSet":
        if not boxes:
            return cls.empty()
        return cls(
            center=np.array([b.center for b in boxes], dtype=np.float64),
            yaw=np.array([b.yaw for b in boxes], dtype=np.float64),
            size=np.array([b.size for b in boxes], dtype=np.float64),
            velocity=np.array([b.velocity for b in boxes], dtype=np.float64),
            class_id=np.array([b.class_id for b in boxes], dtype=np.int64),
            score=np.array([b.score for b in boxes], dtype=np.float64),
        )

    def to_boxes(self) -> list[DetectionBox]:
        return [
            DetectionBox(
                center=(float(c[0]), float(c[1])),
                yaw=float(y),
                size=tuple(float(v) for v in s),
                velocity=(float(v[0]), float(v[1])),
                class_id=int(k),
                score=float(sc),
            )
            for c, y, s, v, k, sc in zip(
                self.center, self.yaw, self.size, self.velocity, self.class_id, self.score
            )
        ]

    def copy(self) -> "BoxSet":
        return BoxSet(
            self.center.copy(), self.yaw.copy(), self.size.copy(), self.velocity.copy(),
            self.class_id.copy(), self.score.copy(), self.track.copy(),
        )

    def select(self, idx) -> "BoxSet":
        return BoxSet(
            self.center[idx], self.yaw[idx], self.size[idx], self.velocity[idx],
            self.class_id[idx], self.score[idx], self.track[idx],
        )

    def with_(self, **changes) -> "BoxSet":
        return replace(self, **changes)

    @staticmethod
    def concat(parts: Iterable["BoxSet"]) -> "BoxSet":
        parts = [p for p in parts if len(p)]
        if not parts:
            return BoxSet.empty()
        return BoxSet(*(np.concatenate([getattr(p, f) for p in parts]) for f in
                        ("center", "yaw", "size", "velocity", "class_id", "score", "track")))


_MASK64 = (1 << 64) - 1


class Rng:
    """Counter-based generator (Philox4x64) keyed by ``(seed, stream)``.

    Equal keys give identical draw sequences on every platform. Child
    generators for parallel or per-item work come from :meth:`child`, which
    folds the stream id into the second key word so children never share
    state with their parent.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream = int(stream) & _MASK64
        bitgen = np.random.Philox(key=np.array([self.seed, self.stream], dtype=np.uint64))
        self.gen = np.random.Generator(bitgen)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, stream={self.stream})"

    def child(self, stream_id: int) -> "Rng":
        # splitmix-style scramble keeps (stream, id) pairs from colliding
        z = (self.stream * 0x9E3779B97F4A7C15 + int(stream_id) + 1) & _MASK64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return Rng(self.seed, z ^ (z >> 31))

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.gen.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size)

    def poisson(self, lam, size=None):
        return self.gen.poisson(lam, size)

    def beta(self, a, b, size=None):
        return self.gen.beta(a, b, size)

    def lognormal(self, mean, sigma, size=None):
        return self.gen.lognormal(mean, sigma, size)

    def choice(self, a, size=None, replace=True, p=None):
        return self.gen.choice(a, size=size, replace=replace, p=p)

    def permutation(self, x):
        return self.gen.permutation(x)

    def random(self, size=None):
        return self.gen.random(size)
