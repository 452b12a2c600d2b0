"""Move stale detections to a query time.

All strategies work in the ego frame at the detection's capture time;
:func:`ego_reframe` then re-expresses the result in the ego frame at the
query time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BoxSet, Pose2, relative_pose, wrap_angle
from .prediction import TrajectoryBatch, sample_offsets, segment_at

VARIANTS = ("zero_hold", "forecasting", "velocity_based", "trajectory")

# segments shorter than this carry no usable heading
MIN_SEGMENT = 0.1


class CompensationError(ValueError):
    pass


@dataclass(frozen=True)
class CompensationStrategy:
    variant: str = "trajectory"
    fixed_horizon: float | None = None  # forecasting only; defaults to the mean latency

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise CompensationError(f"unknown compensation variant {self.variant!r}; expected one of {VARIANTS}")
        if self.fixed_horizon is not None and self.fixed_horizon < 0:
            raise CompensationError("fixed_horizon must be non-negative")


def _shift(dets: BoxSet, offsets) -> BoxSet:
    return dets.with_(center=dets.center + offsets)


def compensate(dets: BoxSet, aux: TrajectoryBatch | None, t0: float, t_j: float,
               strategy: CompensationStrategy) -> BoxSet:
    """Compensate detections captured at ``t0`` to time ``t_j`` (same ego frame)."""
    dt = t_j - t0
    if dt < 0:
        raise CompensationError(f"query time {t_j} precedes capture time {t0}")
    v = strategy.variant
    if v == "zero_hold" or len(dets) == 0:
        return dets.copy()
    if v == "velocity_based":
        return _shift(dets, dets.velocity * dt)
    if v == "forecasting":
        h = strategy.fixed_horizon
        if h is None:
            raise CompensationError("forecasting needs fixed_horizon")
        return _shift(dets, dets.velocity * h)
    # trajectory
    if aux is None or len(aux) != len(dets):
        raise CompensationError("trajectory compensation needs one prediction per detection")
    wp = aux.best()
    out = _shift(dets, sample_offsets(wp, dt, aux.horizon))
    if dt > 0:
        first = segment_at(wp, 0.0, aux.horizon)
        cur = segment_at(wp, dt, aux.horizon)
        ok = (np.linalg.norm(first, axis=1) > MIN_SEGMENT) & (np.linalg.norm(cur, axis=1) > MIN_SEGMENT)
        turn = np.arctan2(cur[:, 1], cur[:, 0]) - np.arctan2(first[:, 1], first[:, 0])
        yaw = np.where(ok, wrap_angle(out.yaw + turn), out.yaw)
        out = out.with_(yaw=yaw)
    return out


def ego_reframe(dets: BoxSet, ego_t0: Pose2, ego_tj: Pose2) -> BoxSet:
    """Express boxes given in the ego frame ``ego_t0`` in the ego frame ``ego_tj``."""
    if ego_t0 == ego_tj:
        return dets.copy()
    rel = relative_pose(ego_t0, ego_tj)
    c, s = math.cos(rel.yaw), math.sin(rel.yaw)
    R = np.array([[c, -s], [s, c]])
    center = dets.center @ R.T + np.array([rel.x, rel.y])
    return dets.with_(center=center, yaw=wrap_angle(dets.yaw + rel.yaw), velocity=dets.velocity @ R.T)
