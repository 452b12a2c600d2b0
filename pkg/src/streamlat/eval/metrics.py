"""nuScenes-style center-distance detection metrics.

Matching is greedy per class and frame. AP integrates the monotone precision
envelope, clipped at 0.1 precision and 0.1 recall, and is averaged over the
distance thresholds and classes. TP errors use the 2 m threshold only.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from ..core import BoxSet, wrap_angle

MIN_RECALL = 0.1
MIN_PRECISION = 0.1

COMPOSITE_FORMULA = "(5 * mAP + (1 - min(1, mATE)) + (1 - min(1, mASE)) + (1 - min(1, mAOE))) / 8"
COMPOSITE_NOTE = ("attribute and velocity errors are not computed; the composite keeps the usual 5:1 "
                  "weighting of mAP against each TP error and is normalized to [0, 1] over the terms present")
CSV_FIELDS = ["run_id", "latency_model", "strategy", "mAP", "mATE", "mASE", "mAOE", "composite"]


@dataclass(frozen=True)
class MatchConfig:
    thresholds: tuple = (0.5, 1.0, 2.0, 4.0)
    score_floor: float = 0.05
    max_boxes: int = 500
    tp_threshold: float = 2.0

    def __post_init__(self):
        th = tuple(float(t) for t in self.thresholds)
        if not th or any(t <= 0 for t in th) or any(b <= a for a, b in zip(th, th[1:])):
            raise ValueError("thresholds must be positive and strictly ascending")
        if self.tp_threshold not in th:
            raise ValueError("tp_threshold must be one of the thresholds")
        object.__setattr__(self, "thresholds", th)


def gt_from_states(states) -> dict:
    """Column arrays from a list of :class:`ObjectState` (ego frame)."""
    if not states:
        return {"center": np.zeros((0, 2)), "yaw": np.zeros(0), "size": np.zeros((0, 3)),
                "class_id": np.zeros(0, dtype=np.int64)}
    return {
        "center": np.array([s.center for s in states], dtype=np.float64),
        "yaw": np.array([s.yaw for s in states], dtype=np.float64),
        "size": np.array([s.size for s in states], dtype=np.float64),
        "class_id": np.array([s.class_id for s in states], dtype=np.int64),
    }


def scale_error(pred_size, gt_size) -> np.ndarray:
    """``1 - IoU`` of boxes aligned at center and yaw."""
    p = np.asarray(pred_size, dtype=np.float64)
    g = np.asarray(gt_size, dtype=np.float64)
    inter = np.prod(np.minimum(p, g), axis=-1)
    union = np.prod(p, axis=-1) + np.prod(g, axis=-1) - inter
    return 1.0 - inter / union


def orientation_error(pred_yaw, gt_yaw) -> np.ndarray:
    return np.abs(wrap_angle(np.asarray(pred_yaw) - np.asarray(gt_yaw)))


@dataclass
class FrameMatch:
    """Matching outcome of one scored frame (all classes)."""

    score: np.ndarray  # (P,)
    class_id: np.ndarray  # (P,)
    matched: np.ndarray  # (T, P) ground-truth row or -1
    n_gt: dict  # class -> count
    trans_err: np.ndarray  # per TP at the tp threshold
    scale_err: np.ndarray
    orient_err: np.ndarray
    tp_class: np.ndarray


def _filter(preds: BoxSet, cfg: MatchConfig) -> BoxSet:
    keep = np.nonzero(preds.score >= cfg.score_floor)[0]
    if len(keep) > cfg.max_boxes:
        order = np.argsort(-preds.score[keep], kind="stable")
        keep = np.sort(keep[order[: cfg.max_boxes]])
    return preds.select(keep)


def match_frame(preds: BoxSet, gts, cfg: MatchConfig | None = None) -> FrameMatch:
    """Greedy per-class matching at every threshold of ``cfg``.

    ``gts`` is a column dict (``center``, ``yaw``, ``size``, ``class_id``) or a
    list of :class:`ObjectState`.
    """
    cfg = cfg or MatchConfig()
    if not isinstance(gts, dict):
        gts = gt_from_states(list(gts))
    preds = _filter(preds, cfg)
    thr = np.array(cfg.thresholds)
    ti = cfg.thresholds.index(cfg.tp_threshold)
    P = len(preds)
    matched = np.full((len(thr), P), -1, dtype=np.int64)
    n_gt = {}
    te, se, oe, tc = [], [], [], []
    classes = np.union1d(np.unique(preds.class_id), np.unique(gts["class_id"]))
    for c in classes:
        pi = np.nonzero(preds.class_id == c)[0]
        gi = np.nonzero(gts["class_id"] == c)[0]
        n_gt[int(c)] = len(gi)
        if not len(pi) or not len(gi):
            continue
        d = np.linalg.norm(preds.center[pi][:, None, :] - gts["center"][gi][None, :, :], axis=-1)
        order = np.argsort(-preds.score[pi], kind="stable").astype(np.int64)
        m = _kernels.greedy_match(np.ascontiguousarray(d), order, thr)
        for t in range(len(thr)):
            hit = m[t] >= 0
            matched[t, pi[hit]] = gi[m[t][hit]]
        hit = np.nonzero(m[ti] >= 0)[0]
        g = gi[m[ti][hit]]
        p = pi[hit]
        te.append(d[hit, m[ti][hit]])
        se.append(scale_error(preds.size[p], gts["size"][g]))
        oe.append(orientation_error(preds.yaw[p], gts["yaw"][g]))
        tc.append(np.full(len(p), c, dtype=np.int64))
    cat = (lambda xs, dt=np.float64: np.concatenate(xs) if xs else np.zeros(0, dtype=dt))
    return FrameMatch(preds.score.copy(), preds.class_id.copy(), matched, n_gt,
                      cat(te), cat(se), cat(oe), cat(tc, np.int64))


def average_precision(tp_flags, scores, n_gt: int) -> float:
    """Clipped AP of one class at one threshold from pooled per-prediction flags."""
    flags = np.asarray(tp_flags, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    # descending score; equal scores list false positives first so the result
    # does not depend on the order frames were pooled in
    order = np.lexsort((flags, -scores))
    return float(_kernels.clipped_pr_area(np.ascontiguousarray(flags[order]), int(n_gt), MIN_RECALL, MIN_PRECISION))


def _fmean(values) -> float:
    values = list(values)
    return math.fsum(values) / len(values)


def tp_errors(frames, classes=None) -> tuple[float, float, float]:
    """Class-averaged (mATE, mASE, mAOE); a class without TPs counts 1.0 for each."""
    te = np.concatenate([f.trans_err for f in frames]) if frames else np.zeros(0)
    se = np.concatenate([f.scale_err for f in frames]) if frames else np.zeros(0)
    oe = np.concatenate([f.orient_err for f in frames]) if frames else np.zeros(0)
    tc = np.concatenate([f.tp_class for f in frames]) if frames else np.zeros(0, dtype=np.int64)
    if classes is None:
        classes = sorted({c for f in frames for c, n in f.n_gt.items() if n > 0})
    if not classes:
        return 1.0, 1.0, 1.0
    out = []
    for arr in (te, se, oe):
        per = []
        for c in classes:
            v = arr[tc == c]
            per.append(_fmean(v) if len(v) else 1.0)
        out.append(_fmean(per))
    return tuple(out)


def composite_score(mAP: float, mATE: float, mASE: float, mAOE: float) -> float:
    return (5.0 * mAP + sum(1.0 - min(1.0, e) for e in (mATE, mASE, mAOE))) / 8.0


@dataclass
class MetricsReport:
    ap: dict  # class -> {threshold: AP}
    mAP: float
    mATE: float
    mASE: float
    mAOE: float
    composite: float
    tp: int
    fp: int
    fn: int
    n_frames: int
    provenance: dict = field(default_factory=dict)

    def metrics(self) -> dict:
        """Everything except provenance (used to compare runs)."""
        return {
            "ap": {str(c): {repr(t): v for t, v in d.items()} for c, d in self.ap.items()},
            "mAP": self.mAP, "mATE": self.mATE, "mASE": self.mASE, "mAOE": self.mAOE,
            "composite": self.composite, "tp": self.tp, "fp": self.fp, "fn": self.fn,
            "n_frames": self.n_frames,
        }

    def to_dict(self) -> dict:
        d = self.metrics()
        d["composite_formula"] = COMPOSITE_FORMULA
        d["notes"] = [COMPOSITE_NOTE, "AP averaged over center-distance thresholds "
                      + ", ".join(f"{t:g}" for t in MatchConfig().thresholds) + " m; TP errors at 2 m"]
        d["provenance"] = dict(self.provenance)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def csv_row(self, run_id: str) -> list:
        p = self.provenance
        return [run_id, p.get("latency_model", ""), p.get("strategy", ""),
                *(f"{v:.6f}" for v in (self.mAP, self.mATE, self.mASE, self.mAOE, self.composite))]


def summary_csv(rows, header_lines=()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def build_report(frames, cfg: MatchConfig | None = None, classes=None, provenance=None) -> MetricsReport:
    """Aggregate per-frame matches into a report (order of ``frames`` is irrelevant)."""
    cfg = cfg or MatchConfig()
    n_gt: dict = {}
    for f in frames:
        for c, n in f.n_gt.items():
            n_gt[c] = n_gt.get(c, 0) + n
    if classes is None:
        classes = sorted(c for c, n in n_gt.items() if n > 0)
    score = np.concatenate([f.score for f in frames]) if frames else np.zeros(0)
    cls = np.concatenate([f.class_id for f in frames]) if frames else np.zeros(0, dtype=np.int64)
    ap = {}
    for c in classes:
        sel = cls == c
        ap[int(c)] = {}
        for ti, t in enumerate(cfg.thresholds):
            flags = np.concatenate([f.matched[ti] >= 0 for f in frames])[sel] if frames else np.zeros(0)
            ap[int(c)][t] = average_precision(flags, score[sel], n_gt.get(c, 0))
    vals = [v for d in ap.values() for v in d.values()]
    mAP = _fmean(vals) if vals else 0.0
    mATE, mASE, mAOE = tp_errors(frames, classes)
    ti = cfg.thresholds.index(cfg.tp_threshold)
    tp = sum(int((f.matched[ti] >= 0).sum()) for f in frames)
    n_pred = sum(len(f.score) for f in frames)
    total_gt = sum(n_gt.get(c, 0) for c in n_gt)
    return MetricsReport(ap, mAP, mATE, mASE, mAOE, composite_score(mAP, mATE, mASE, mAOE),
                         tp, n_pred - tp, total_gt - tp, len(frames), dict(provenance or {}))
