"""Per-frame perception pipeline shared by evaluation and training.

For every processed frame the detector stand-in runs on the ingested
capture, the carried history (boxes plus a small context embedding) from the
previous processed frame is aligned across the irregular gap, detections are
associated to history, and per-detection features drive the trajectory
predictor.

Context embedding (``CONTEXT_DIM`` entries)::

    [speed/10, turn-rate estimate, accel estimate/5, has_history, history speed/10, gap]
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BoxSet, Pose2, relative_pose, rotate_vectors, wrap_angle
from .prediction import (
    IntentionPointSet,
    PredictionDataset,
    PredictorParams,
    TrajectoryBatch,
    predict_batch,
)
from .propagation import (
    MlnParams,
    PropagatorParams,
    TransitionDataset,
    center_transform_batch,
    propagate_variant,
)
from .stream import RunSchedule
from .worldgen import NoiseSpec, Scene, frame_rng, observe

CONTEXT_DIM = 6
ALIGN_VARIANTS = ("none", "mln", "ode")
MIN_HEADING_SPEED = 1.0  # below this the box yaw is a better heading than the velocity
MAX_TURN = 1.5
MAX_ACCEL = 10.0


def feature_dim(n_classes: int) -> int:
    return 2 * CONTEXT_DIM + n_classes


@dataclass
class PipelineModels:
    align: str = "ode"
    propagator: PropagatorParams | MlnParams | None = None
    predictor: PredictorParams | None = None
    intentions: IntentionPointSet | None = None

    def __post_init__(self):
        if self.align not in ALIGN_VARIANTS:
            raise ValueError(f"unknown propagation variant {self.align!r}; expected one of {ALIGN_VARIANTS}")
        if self.align != "none" and self.propagator is None:
            raise ValueError(f"propagation variant {self.align!r} needs trained parameters")
        if self.propagator is not None and self.align != "none" and self.propagator.dim != CONTEXT_DIM:
            raise ValueError(f"propagator dim {self.propagator.dim} does not match context dim {CONTEXT_DIM}")
        if (self.predictor is None) != (self.intentions is None):
            raise ValueError("predictor and intention points come together")


@dataclass
class FrameOutput:
    frame_index: int
    capture_time: float
    ego: Pose2
    dets: BoxSet  # ego frame at capture
    trajectories: TrajectoryBatch | None
    features: np.ndarray
    headings: np.ndarray
    transitions: tuple | None = None  # (src ctx, motion, dst ctx) for associated pairs


@dataclass
class _History:
    time: float
    ego: Pose2
    dets: BoxSet
    context: np.ndarray


def headings_of(velocity, yaw) -> np.ndarray:
    speed = np.linalg.norm(velocity, axis=1)
    return np.where(speed >= MIN_HEADING_SPEED, np.arctan2(velocity[:, 1], velocity[:, 0]), yaw)


def associate(cur: BoxSet, prev_center, prev_class, gate: float) -> np.ndarray:
    """Greedy nearest-pair association within ``gate`` (same class). Returns history index or -1."""
    out = np.full(len(cur), -1, dtype=np.int64)
    if not len(cur) or not len(prev_center):
        return out
    d = np.linalg.norm(cur.center[:, None, :] - prev_center[None, :, :], axis=-1)
    d[cur.class_id[:, None] != prev_class[None, :]] = np.inf
    pairs = np.argwhere(d <= gate)
    if not len(pairs):
        return out
    order = np.lexsort((pairs[:, 1], pairs[:, 0], d[pairs[:, 0], pairs[:, 1]]))
    used = np.zeros(len(prev_center), dtype=bool)
    for i, j in pairs[order]:
        if out[i] < 0 and not used[j]:
            out[i] = j
            used[j] = True
    return out


def _align(hist: _History, t: float, ego: Pose2, models: PipelineModels):
    """History boxes and context expressed at ``t``; also returns the motion vectors."""
    gap = t - hist.time
    h = hist.dets
    if models.align == "none":
        motion = np.zeros((len(h), 7))
        motion[:, 0] = 1.0
        motion[:, 4:6] = h.velocity
        motion[:, 6] = gap
        return h.center, h.velocity, h.yaw, hist.context.copy(), motion
    rel = relative_pose(hist.ego, ego)
    vel = rotate_vectors(rel.yaw, h.velocity) if len(h) else h.velocity
    motion = np.empty((len(h), 7))
    motion[:, 0:4] = rel.as_features()
    motion[:, 4:6] = vel
    motion[:, 6] = gap
    center = center_transform_batch(h.center, motion) if len(h) else h.center
    ctx = propagate_variant(models.align, hist.context, motion, models.propagator) if len(h) else hist.context
    return center, vel, wrap_angle(h.yaw + rel.yaw), ctx, motion


def frame_features(dets: BoxSet, hist: _History | None, t: float, ego: Pose2, models: PipelineModels,
                   n_classes: int, gate: float):
    """Context rows, predictor features, headings and associated transitions for one frame."""
    n = len(dets)
    speed = np.linalg.norm(dets.velocity, axis=1)
    psi = headings_of(dets.velocity, dets.yaw)
    ctx = np.zeros((n, CONTEXT_DIM))
    ctx[:, 0] = speed / 10.0
    z_hat = np.zeros((n, CONTEXT_DIM))
    transitions = None
    if hist is not None and len(hist.dets) and n:
        gap = t - hist.time
        hc, hv, hyaw, hctx, motion = _align(hist, t, ego, models)
        match = associate(dets, hc, hist.dets.class_id, gate)
        m = match >= 0
        if m.any() and gap > 0:
            j = match[m]
            hs = np.linalg.norm(hv[j], axis=1)
            hpsi = headings_of(hv[j], hyaw[j])
            ctx[m, 1] = np.clip(wrap_angle(psi[m] - hpsi) / gap, -MAX_TURN, MAX_TURN)
            ctx[m, 2] = np.clip((speed[m] - hs) / gap, -MAX_ACCEL, MAX_ACCEL) / 5.0
            ctx[m, 3] = 1.0
            ctx[m, 4] = hs / 10.0
            ctx[m, 5] = min(gap, 2.0)
            z_hat[m] = hctx[j]
            transitions = (hist.context[j].copy(), motion[j].copy(), np.nonzero(m)[0])
    onehot = np.zeros((n, n_classes))
    cls = np.clip(dets.class_id, 0, n_classes - 1)
    onehot[np.arange(n), cls] = 1.0
    feats = np.concatenate([ctx, onehot, z_hat], axis=1)
    if transitions is not None:
        src, mot, rows = transitions
        transitions = (src, mot, ctx[rows].copy())
    return ctx, feats, psi, transitions


def run_pipeline(scene: Scene, sched: RunSchedule, models: PipelineModels, noise: NoiseSpec,
                 gate: float = 2.0, scene_seed: int | None = None, predict: bool = True) -> list[FrameOutput]:
    """Process every scheduled frame in order, carrying history between processed frames."""
    seed = scene.config.seed if scene_seed is None else scene_seed
    n_classes = scene.config.n_classes if scene.config is not None else 3
    hist = None
    out = []
    for f in sched.frames:
        t = f.capture_time
        if t > scene.duration + 1e-9:
            raise ValueError(f"schedule frame at {t} s is beyond the scene duration {scene.duration} s")
        dets = observe(scene, t, noise, frame_rng(seed, f.frame_index))
        ego = scene.ego_pose(t)
        ctx, feats, psi, trans = frame_features(dets, hist, t, ego, models, n_classes, gate)
        traj = None
        if predict and models.predictor is not None:
            traj = predict_batch(models.predictor, feats, dets.class_id, psi, models.intentions)
        out.append(FrameOutput(f.frame_index, t, ego, dets, traj, feats, psi, trans))
        hist = _History(t, ego, dets, ctx)
    return out


# --------------------------------------------------------------------------
# training data


def transitions_from(outputs: list[FrameOutput]) -> TransitionDataset:
    src, mot, dst = [], [], []
    for o in outputs:
        if o.transitions is not None:
            src.append(o.transitions[0])
            mot.append(o.transitions[1])
            dst.append(o.transitions[2])
    if not src:
        z = np.zeros((0, CONTEXT_DIM))
        return TransitionDataset(z, np.zeros((0, 7)), z.copy(), None, None)
    return TransitionDataset(np.concatenate(src), np.concatenate(mot), np.concatenate(dst), None, None)


def future_offsets(scene: Scene, t: float, ids, times) -> np.ndarray:
    """Ground-truth displacement of agents ``ids`` from ``t`` to each of ``times``, ego frame at ``t``.

    Rows for agents not alive over the whole span are NaN.
    """
    ego = scene.ego_pose(t)
    now = scene.world_arrays(t)
    pos = {int(i): p for i, p in zip(now["id"], now["center"])}
    out = np.full((len(ids), len(times), 2), np.nan)
    for h, th in enumerate(times):
        w = scene.world_arrays(th)
        later = {int(i): p for i, p in zip(w["id"], w["center"])}
        for r, a in enumerate(ids):
            a = int(a)
            if a in pos and a in later:
                out[r, h] = rotate_vectors(-ego.yaw, later[a] - pos[a])
    return out


def prediction_samples(scene: Scene, outputs: list[FrameOutput], horizon: float, n_waypoints: int):
    """Local-frame supervision for every true detection whose horizon fits in the scene."""
    feats, cls, tgt, head = [], [], [], []
    for o in outputs:
        if o.capture_time + horizon > scene.duration + 1e-9:
            continue
        true = np.nonzero(o.dets.track >= 0)[0]
        if not len(true):
            continue
        times = [o.capture_time + (h + 1) * horizon / n_waypoints for h in range(n_waypoints)]
        off = future_offsets(scene, o.capture_time, o.dets.track[true], times)
        ok = ~np.isnan(off).any(axis=(1, 2))
        true, off = true[ok], off[ok]
        psi = o.headings[true]
        c, s = np.cos(-psi)[:, None], np.sin(-psi)[:, None]
        local = np.stack([c * off[..., 0] - s * off[..., 1], s * off[..., 0] + c * off[..., 1]], axis=-1)
        feats.append(o.features[true])
        cls.append(o.dets.class_id[true])
        tgt.append(local)
        head.append(psi)
    if not feats:
        raise ValueError("no supervised detections in the training scenes")
    return PredictionDataset(np.concatenate(feats), np.concatenate(cls), np.concatenate(tgt), np.concatenate(head))


def endpoint_samples(scene: Scene, horizon: float, rate: float = 2.0) -> dict:
    """Ground-truth endpoints at ``horizon`` in the agent-local frame, grouped by class."""
    out: dict = {}
    t = 0.0
    while t + horizon <= scene.duration + 1e-9:
        now, later = scene.world_arrays(t), scene.world_arrays(t + horizon)
        pos = {int(i): (p, y, c) for i, p, y, c in zip(now["id"], now["center"], now["yaw"], now["class_id"])}
        for i, p in zip(later["id"], later["center"]):
            if int(i) in pos:
                p0, yaw, c = pos[int(i)]
                out.setdefault(int(c), []).append(rotate_vectors(-yaw, p - p0))
        t += 1.0 / rate
    return {c: np.array(v) for c, v in out.items()}
