"""Intention-guided multimodal trajectory prediction.

Intention points are k-means centroids of ground-truth trajectory endpoints
(per class, in the agent-local frame). Each mode starts from the positional
embedding of its intention point; every decoding layer predicts waypoints
plus a score logit and re-encodes its own endpoint as the next layer's
intention embedding. Decoding happens in the agent-local frame (x along the
detected heading); outputs are rotated into the ego frame at the end.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import Rng
from .nn import (
    Mlp,
    Optimizer,
    TrainConfig,
    load_bundle,
    mlp_from_arrays,
    mlp_hyper,
    mlp_to_arrays,
    save_bundle,
    softmax,
)
from .propagation import run_training

PE_SCALE = 100.0  # meters; keeps encoding arguments O(1)
PE_BASE = 10000.0


class PredictionError(ValueError):
    pass


# --------------------------------------------------------------------------
# k-means


@dataclass
class KMeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    sse_history: list
    n_iter: int


def kmeans(points, k: int, rng: Rng, max_iter: int = 100, tol: float = 1e-6) -> KMeansResult:
    """k-means++ seeding then Lloyd iterations until centroid shift < ``tol``.

    ``sse_history[i]`` is the within-cluster sum of squares after the i-th
    assignment step. Empty clusters keep their previous centroid.
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    n = len(pts)
    if k < 1:
        raise PredictionError("k must be >= 1")
    if n < k:
        raise PredictionError(f"need at least {k} points, got {n}")

    cents = np.empty((k, pts.shape[1]))
    cents[0] = pts[int(rng.integers(0, n))]
    d2 = ((pts - cents[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(0, n))
        cents[j] = pts[idx]
        d2 = np.minimum(d2, ((pts - cents[j]) ** 2).sum(axis=1))

    history = []
    labels = None
    it = 0
    for it in range(1, max_iter + 1):
        labels, sse = _kernels.kmeans_assign(pts, cents)
        history.append(float(sse))
        new = cents.copy()
        for j in range(k):
            members = labels == j
            if members.any():
                new[j] = pts[members].mean(axis=0)
        shift = float(np.sqrt(((new - cents) ** 2).sum(axis=1)).max())
        cents = new
        if shift < tol:
            break
    labels, sse = _kernels.kmeans_assign(pts, cents)
    history.append(float(sse))
    return KMeansResult(cents, np.asarray(labels), history, it)


def cluster_endpoints(endpoints, k: int, rng: Rng) -> np.ndarray:
    return kmeans(endpoints, k, rng).centroids


@dataclass
class IntentionPointSet:
    """Per-class intention points, shape (K, 2), agent-local frame at horizon ``horizon``."""

    points: dict
    horizon: float = 1.0

    @property
    def n_modes(self) -> int:
        return next(iter(self.points.values())).shape[0]

    def for_class(self, class_id: int) -> np.ndarray:
        try:
            return self.points[int(class_id)]
        except KeyError:
            raise PredictionError(f"no intention points for class {class_id}") from None

    def stacked(self, class_ids) -> np.ndarray:
        return np.stack([self.for_class(c) for c in class_ids]) if len(class_ids) else np.zeros((0, self.n_modes, 2))


def build_intentions(endpoints_by_class: dict, k: int, rng: Rng, horizon: float = 1.0) -> IntentionPointSet:
    return IntentionPointSet(
        {int(c): cluster_endpoints(np.asarray(e), k, rng.child(int(c))) for c, e in sorted(endpoints_by_class.items())},
        horizon,
    )


# --------------------------------------------------------------------------
# positional encoding


def _pe_freqs(dims_per_axis: int) -> np.ndarray:
    half = dims_per_axis // 2
    return 1.0 / PE_BASE ** (2.0 * np.arange(half) / dims_per_axis)


def sinusoidal_pe(p, dims_per_axis: int = 16) -> np.ndarray:
    """Interleaved ``[sin, cos]`` per frequency, per axis, axes concatenated.

    Accepts a 2-vector or an array whose last axis has length 2.
    """
    if dims_per_axis % 2:
        raise PredictionError("dims_per_axis must be even")
    p = np.asarray(p, dtype=np.float64)
    freqs = _pe_freqs(dims_per_axis)
    arg = (p[..., :, None] / PE_SCALE) * freqs  # (..., 2, half)
    enc = np.stack([np.sin(arg), np.cos(arg)], axis=-1)  # (..., 2, half, 2)
    return enc.reshape(*p.shape[:-1], 2 * dims_per_axis)


def sinusoidal_pe_backward(p, g, dims_per_axis: int = 16) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    freqs = _pe_freqs(dims_per_axis)
    arg = (p[..., :, None] / PE_SCALE) * freqs
    g = g.reshape(*p.shape[:-1], 2, dims_per_axis // 2, 2)
    d = (g[..., 0] * np.cos(arg) - g[..., 1] * np.sin(arg)) * freqs / PE_SCALE
    return d.sum(axis=-1)


# --------------------------------------------------------------------------
# model


@dataclass
class PredictorParams:
    query_encoder: Mlp  # features -> M
    intention_embed: Mlp  # PE dim -> M
    decoder: Mlp  # M -> 2W + 1
    n_layers: int = 2
    horizon: float = 1.0
    n_waypoints: int = 6
    pe_dims: int = 16
    out_scale: float = 5.0  # meters per decoder output unit

    @property
    def dim(self) -> int:
        return self.decoder.in_dim

    @property
    def feature_dim(self) -> int:
        return self.query_encoder.in_dim

    def arrays(self):
        return [*self.query_encoder.params(), *self.intention_embed.params(), *self.decoder.params()]

    def groups(self):
        return [("query_encoder", len(self.query_encoder.params())),
                ("intention_embed", len(self.intention_embed.params())),
                ("decoder", len(self.decoder.params()))]

    def copy(self) -> "PredictorParams":
        return PredictorParams(self.query_encoder.copy(), self.intention_embed.copy(), self.decoder.copy(),
                               self.n_layers, self.horizon, self.n_waypoints, self.pe_dims, self.out_scale)

    @classmethod
    def create(cls, feature_dim: int, dim: int = 64, hidden: int = 64, n_layers: int = 2,
               horizon: float = 1.0, n_waypoints: int = 6, pe_dims: int = 16,
               rng: Rng | None = None, zero_decoder: bool = False) -> "PredictorParams":
        rng = rng or Rng(0)
        dec = Mlp.create([dim, hidden, 2 * n_waypoints + 1], ["tanh", "identity"], rng.child(3), scale=1.0)
        if zero_decoder:
            dec = Mlp([np.zeros_like(w) for w in dec.weights], [np.zeros_like(b) for b in dec.biases],
                      list(dec.activations))
        else:
            dec.weights[-1] *= 0.1
        return cls(
            query_encoder=Mlp.create([feature_dim, hidden, dim], ["tanh", "identity"], rng.child(1)),
            intention_embed=Mlp.create([2 * pe_dims, hidden, dim], ["tanh", "identity"], rng.child(2)),
            decoder=dec,
            n_layers=n_layers, horizon=horizon, n_waypoints=n_waypoints, pe_dims=pe_dims,
        )

    def save(self, path, intentions: IntentionPointSet | None = None) -> None:
        arrays = {}
        for name in ("query_encoder", "intention_embed", "decoder"):
            arrays.update(mlp_to_arrays(getattr(self, name), name))
        hyper = {
            "kind": "predictor", "n_layers": self.n_layers, "horizon": self.horizon,
            "n_waypoints": self.n_waypoints, "pe_dims": self.pe_dims, "out_scale": self.out_scale,
            "nets": {n: mlp_hyper(getattr(self, n)) for n in ("query_encoder", "intention_embed", "decoder")},
        }
        if intentions is not None:
            for c, pts in intentions.points.items():
                arrays[f"intentions.{c}"] = pts
            hyper["intentions"] = {"classes": sorted(intentions.points), "horizon": intentions.horizon}
        save_bundle(path, arrays, hyper)

    @classmethod
    def load(cls, path):
        """Returns ``(params, intentions or None)``."""
        arrays, hyper = load_bundle(path)
        if hyper.get("kind") != "predictor":
            raise ValueError(f"{path}: not a predictor bundle")
        nets = {n: mlp_from_arrays(arrays, n, hyper["nets"][n]) for n in hyper["nets"]}
        params = cls(nets["query_encoder"], nets["intention_embed"], nets["decoder"], int(hyper["n_layers"]),
                     float(hyper["horizon"]), int(hyper["n_waypoints"]), int(hyper["pe_dims"]),
                     float(hyper["out_scale"]))
        intents = None
        if "intentions" in hyper:
            intents = IntentionPointSet({int(c): arrays[f"intentions.{c}"].copy() for c in hyper["intentions"]["classes"]},
                                        float(hyper["intentions"]["horizon"]))
        return params, intents


@dataclass
class TrajectoryPrediction:
    """Waypoint offsets (K, W, 2) from the current center; waypoint h sits at ``(h+1) H / W``."""

    waypoints: np.ndarray
    scores: np.ndarray
    horizon: float = 1.0

    def __post_init__(self):
        if self.waypoints.shape[1] < 1:
            raise PredictionError("need at least one waypoint")

    @property
    def best_mode(self) -> int:
        return int(np.argmax(self.scores))


@dataclass
class TrajectoryBatch:
    """Trajectories for every box of a frame: waypoints (N, K, W, 2), scores (N, K)."""

    waypoints: np.ndarray
    scores: np.ndarray
    horizon: float = 1.0

    def __len__(self) -> int:
        return len(self.scores)

    def item(self, i: int) -> TrajectoryPrediction:
        return TrajectoryPrediction(self.waypoints[i], self.scores[i], self.horizon)

    def best(self) -> np.ndarray:
        """Best-scoring mode's waypoints, (N, W, 2)."""
        if not len(self):
            return np.zeros((0,) + self.waypoints.shape[2:])
        k = np.argmax(self.scores, axis=1)
        return self.waypoints[np.arange(len(k)), k]


def _decode(params: PredictorParams, features, intents_local, cache: bool = False):
    """Iterative decoding in the local frame.

    Returns per-layer waypoints (B, K, W, 2) and logits (B, K) lists.
    """
    B, K = intents_local.shape[:2]
    W = params.n_waypoints
    M = params.dim
    qc, q_trace = params.query_encoder.forward(features, cache=True)
    pe0 = sinusoidal_pe(intents_local, params.pe_dims).reshape(B * K, -1)
    emb, e_trace = params.intention_embed.forward(pe0, cache=True)
    layers = []
    wps, logits = [], []
    for l in range(params.n_layers):
        h = (qc[:, None, :] + emb.reshape(B, K, M)).reshape(B * K, M)
        out, d_trace = params.decoder.forward(h, cache=True)
        out = out.reshape(B, K, 2 * W + 1)
        wp = out[..., : 2 * W].reshape(B, K, W, 2) * params.out_scale
        lg = out[..., 2 * W]
        wps.append(wp)
        logits.append(lg)
        rec = {"d_trace": d_trace, "e_trace": e_trace}
        if l + 1 < params.n_layers:
            end = wp[:, :, -1, :]
            rec["end"] = end
            pe = sinusoidal_pe(end, params.pe_dims).reshape(B * K, -1)
            emb, e_trace = params.intention_embed.forward(pe, cache=True)
        layers.append(rec)
    if cache:
        return wps, logits, (q_trace, layers)
    return wps, logits


def predict_batch(params: PredictorParams, features, class_ids, headings, intentions: IntentionPointSet) -> TrajectoryBatch:
    """Predict trajectories for a batch of detections; waypoints in the ego frame."""
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    n = len(features)
    K = intentions.n_modes
    if n == 0:
        return TrajectoryBatch(np.zeros((0, K, params.n_waypoints, 2)), np.zeros((0, K)), params.horizon)
    intents = intentions.stacked(class_ids)
    wps, logits = _decode(params, features, intents)
    wp = wps[-1]
    c, s = np.cos(headings)[:, None, None], np.sin(headings)[:, None, None]
    ego = np.stack([c * wp[..., 0] - s * wp[..., 1], s * wp[..., 0] + c * wp[..., 1]], axis=-1)
    return TrajectoryBatch(ego, softmax(logits[-1], axis=1), params.horizon)


def predict_trajectories(query, class_id: int, intentions: IntentionPointSet, params: PredictorParams,
                         heading: float = 0.0) -> TrajectoryPrediction:
    """Single-query convenience wrapper; ``query.embedding`` holds the feature vector."""
    intentions.for_class(class_id)
    tb = predict_batch(params, np.asarray(query.embedding)[None, :], [class_id], np.array([heading]), intentions)
    return tb.item(0)


def sample_trajectory(traj: TrajectoryPrediction, k: int, dt: float, horizon: float | None = None) -> np.ndarray:
    """Offset of mode ``k`` after ``dt`` seconds (piecewise linear, linear extrapolation past H)."""
    if dt < 0:
        raise PredictionError("dt must be non-negative")
    H = traj.horizon if horizon is None else horizon
    return sample_offsets(traj.waypoints[k][None], np.array([dt]), H)[0]


def _with_origin(wp):
    return np.concatenate([np.zeros(wp.shape[:-2] + (1, 2)), wp], axis=-2)


def sample_offsets(waypoints, dt, horizon: float) -> np.ndarray:
    """Vectorized sampling: ``waypoints`` (N, W, 2), ``dt`` scalar or (N,)."""
    wp = _with_origin(np.asarray(waypoints, dtype=np.float64))
    n, W = wp.shape[0], wp.shape[1] - 1
    step = horizon / W
    dt = np.broadcast_to(np.asarray(dt, dtype=np.float64), (n,))
    j = np.minimum(np.floor(dt / step).astype(np.int64), W - 1)
    frac = (dt - j * step) / step
    rows = np.arange(n)
    a, b = wp[rows, j], wp[rows, j + 1]
    return a + (b - a) * frac[:, None]


def segment_at(waypoints, dt, horizon: float) -> np.ndarray:
    """Displacement vector of the waypoint segment containing ``dt`` (N, 2)."""
    wp = _with_origin(np.asarray(waypoints, dtype=np.float64))
    n, W = wp.shape[0], wp.shape[1] - 1
    step = horizon / W
    dt = np.broadcast_to(np.asarray(dt, dtype=np.float64), (n,))
    j = np.minimum(np.floor(dt / step).astype(np.int64), W - 1)
    rows = np.arange(n)
    return wp[rows, j + 1] - wp[rows, j]


# --------------------------------------------------------------------------
# training


@dataclass
class PredictionDataset:
    """Local-frame supervision: features (N, F), class ids, target waypoints (N, W, 2)."""

    features: np.ndarray
    class_ids: np.ndarray
    targets: np.ndarray
    headings: np.ndarray = field(default=None)

    def __len__(self) -> int:
        return len(self.features)

    def subset(self, idx) -> "PredictionDataset":
        h = None if self.headings is None else self.headings[idx]
        return PredictionDataset(self.features[idx], self.class_ids[idx], self.targets[idx], h)


def predictor_loss_and_grads(params: PredictorParams, features, intents_local, targets,
                             layer_weights=None, score_weight: float = 0.1, with_grads: bool = True):
    """Winner-takes-all loss summed over decoding layers.

    Per layer and sample the winning mode is the one whose endpoint is
    closest to the target endpoint; it alone receives the squared waypoint
    error (mean over waypoints), and the logits receive cross-entropy
    towards it.
    """
    B, K = intents_local.shape[:2]
    W, M, L = params.n_waypoints, params.dim, params.n_layers
    lw = np.ones(L) if layer_weights is None else np.asarray(layer_weights, dtype=np.float64)
    wps, logits, (q_trace, layers) = _decode(params, features, intents_local, cache=True)
    rows = np.arange(B)
    loss = 0.0
    g_wps, g_logits = [], []
    for l in range(L):
        wp, lg = wps[l], logits[l]
        d_end = ((wp[:, :, -1, :] - targets[:, None, -1, :]) ** 2).sum(axis=-1)
        win = np.argmin(d_end, axis=1)
        diff = wp[rows, win] - targets  # (B, W, 2)
        reg = (diff * diff).sum(axis=(1, 2)) / W
        p = softmax(lg, axis=1)
        ce = -np.log(np.maximum(p[rows, win], 1e-300))
        loss += lw[l] * float(np.mean(reg + score_weight * ce))
        gw = np.zeros_like(wp)
        gw[rows, win] = lw[l] * 2.0 * diff / (W * B)
        gl = p.copy()
        gl[rows, win] -= 1.0
        g_wps.append(gw)
        g_logits.append(lw[l] * score_weight * gl / B)
    if not with_grads:
        return loss, None

    g_dec = [np.zeros_like(a) for a in params.decoder.params()]
    g_emb = [np.zeros_like(a) for a in params.intention_embed.params()]
    g_qc = np.zeros((B, M))
    g_next_emb = None  # gradient w.r.t. the embedding produced by layer l's endpoint
    for l in range(L - 1, -1, -1):
        gw = g_wps[l]
        if g_next_emb is not None:
            rec = layers[l]
            ge, g_pe = params.intention_embed.backward(layers[l + 1]["e_trace"], g_next_emb)
            for acc, g in zip(g_emb, ge):
                acc += g
            g_end = sinusoidal_pe_backward(rec["end"], g_pe.reshape(B, K, -1), params.pe_dims)
            gw = gw.copy()
            gw[:, :, -1, :] += g_end
        g_out = np.concatenate([gw.reshape(B, K, 2 * W) * params.out_scale, g_logits[l][..., None]], axis=-1)
        gd, g_h = params.decoder.backward(layers[l]["d_trace"], g_out.reshape(B * K, -1))
        for acc, g in zip(g_dec, gd):
            acc += g
        g_h = g_h.reshape(B, K, M)
        g_qc += g_h.sum(axis=1)
        g_next_emb = g_h.reshape(B * K, M)
    ge, _ = params.intention_embed.backward(layers[0]["e_trace"], g_next_emb)
    for acc, g in zip(g_emb, ge):
        acc += g
    g_q, _ = params.query_encoder.backward(q_trace, g_qc)
    return loss, [*g_q, *g_emb, *g_dec]


def train_predictor(dataset: PredictionDataset, params: PredictorParams, intentions: IntentionPointSet,
                    opt: TrainConfig, layer_weights=None, start_step: int = 0,
                    optimizer: Optimizer | None = None, on_step=None):
    """Fit the predictor with the winner-takes-all objective; returns ``(params, loss curve)``."""
    if not len(dataset):
        raise PredictionError("no training samples")
    intents = intentions.stacked(dataset.class_ids)

    def loss_fn(idx):
        return predictor_loss_and_grads(params, dataset.features[idx], intents[idx], dataset.targets[idx],
                                        layer_weights)

    losses, optimizer = run_training(params.arrays, loss_fn, len(dataset), opt, "predictor", start_step,
                                     optimizer, on_step)
    params.last_optimizer = optimizer
    return params, losses


def endpoint_errors(params: PredictorParams, dataset: PredictionDataset, intentions: IntentionPointSet,
                    best: str = "oracle") -> np.ndarray:
    """Final-layer endpoint error per sample; ``best`` = ``oracle`` (min over modes) or ``score``."""
    intents = intentions.stacked(dataset.class_ids)
    wps, logits = _decode(params, dataset.features, intents)
    d = np.linalg.norm(wps[-1][:, :, -1, :] - dataset.targets[:, None, -1, :], axis=-1)
    if best == "oracle":
        return d.min(axis=1)
    return d[np.arange(len(d)), np.argmax(logits[-1], axis=1)]
