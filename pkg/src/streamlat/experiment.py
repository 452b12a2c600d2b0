"""End-to-end training of pipeline models from generated scenes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Rng
from .nn import TrainConfig
from .pipeline import (
    CONTEXT_DIM,
    PipelineModels,
    endpoint_samples,
    feature_dim,
    prediction_samples,
    run_pipeline,
    transitions_from,
)
from .prediction import PredictionDataset, PredictorParams, build_intentions, train_predictor
from .propagation import MlnParams, PropagatorParams, TransitionDataset, train_mln, train_propagator
from .stream import LatencyModel, UniformLatency, frames_from_times, schedule_run
from .worldgen import NoiseSpec, Scene, frame_times


@dataclass
class TrainSettings:
    propagator: TrainConfig = field(default_factory=lambda: TrainConfig(steps=800, lr=0.1, batch_size=128))
    predictor: TrainConfig = field(default_factory=lambda: TrainConfig(steps=1000, lr=0.004, batch_size=128,
                                                                        optimizer="adam", cosine=True))
    jitter: float = 0.3  # relative interval perturbation around the mean latency
    n_modes: int = 6
    n_waypoints: int = 6
    horizon: float = 1.0
    n_layers: int = 2
    dim: int = 64
    hidden: int = 64
    n_basis: int = 10
    frame_rate: float = 12.0
    gate: float = 2.0
    noise: NoiseSpec = field(default_factory=NoiseSpec)


def training_schedule(scene: Scene, latency: LatencyModel, jitter: float, rng: Rng, frame_rate: float = 12.0):
    """Schedule under a latency perturbed uniformly by ``±jitter`` around the model's mean."""
    mu = latency.mean()
    model = UniformLatency(mu * (1.0 - jitter), mu * (1.0 + jitter)) if jitter > 0 else latency
    frames = frames_from_times(frame_times(scene.duration, frame_rate))
    return schedule_run(frames, model, frame_rate, rng)


def _passes(scenes, latency, models, settings, seed, predict=False):
    out = []
    for i, sc in enumerate(scenes):
        sched = training_schedule(sc, latency, settings.jitter, Rng(seed, 0x7C).child(i), settings.frame_rate)
        out.append((sc, run_pipeline(sc, sched, models, settings.noise, settings.gate, predict=predict)))
    return out


def collect_transitions(scenes, latency, settings: TrainSettings, seed: int) -> TransitionDataset:
    probe = PipelineModels("ode", PropagatorParams.create(CONTEXT_DIM, settings.n_basis, 16, Rng(seed, 0x9)))
    parts = [transitions_from(o) for _, o in _passes(scenes, latency, probe, settings, seed)]
    return TransitionDataset(np.concatenate([p.src for p in parts]), np.concatenate([p.motion for p in parts]),
                             np.concatenate([p.dst for p in parts]))


def new_alignment_params(align: str, settings: TrainSettings, seed: int):
    rng = Rng(seed, 0xA1)
    if align == "ode":
        return PropagatorParams.create(CONTEXT_DIM, settings.n_basis, 32, rng)
    if align == "mln":
        return MlnParams.create(CONTEXT_DIM, 32, rng)
    raise ValueError(f"unknown propagation variant {align!r}")


def train_alignment(align: str, data: TransitionDataset, settings: TrainSettings, seed: int,
                    params=None, **resume):
    """Fit the ``ode`` or ``mln`` alignment model; ``resume`` passes through to the training loop."""
    if align == "none":
        return None, []
    params = params or new_alignment_params(align, settings, seed)
    cfg = TrainConfig(**{**settings.propagator.__dict__, "seed": seed})
    fit = train_propagator if align == "ode" else train_mln
    return fit(data, params, cfg, **resume)


def collect_predictions(scenes, latency, models: PipelineModels, settings: TrainSettings, seed: int) -> PredictionDataset:
    parts = [prediction_samples(sc, outs, settings.horizon, settings.n_waypoints)
             for sc, outs in _passes(scenes, latency, models, settings, seed)]
    return PredictionDataset(*(np.concatenate([getattr(p, f) for p in parts])
                               for f in ("features", "class_ids", "targets", "headings")))


def fit_intentions(scenes, settings: TrainSettings, seed: int):
    pooled: dict = {}
    for sc in scenes:
        for c, e in endpoint_samples(sc, settings.horizon).items():
            pooled.setdefault(c, []).append(e)
    pooled = {c: np.concatenate(v) for c, v in pooled.items()}
    return build_intentions(pooled, settings.n_modes, Rng(seed, 0x1C), settings.horizon)


def new_predictor_params(n_classes: int, settings: TrainSettings, seed: int) -> PredictorParams:
    return PredictorParams.create(feature_dim(n_classes), settings.dim, settings.hidden, settings.n_layers,
                                  settings.horizon, settings.n_waypoints, rng=Rng(seed, 0xD3))


def train_prediction(ds: PredictionDataset, intents, settings: TrainSettings, seed: int, n_classes: int,
                     params=None, **resume):
    params = params or new_predictor_params(n_classes, settings, seed)
    cfg = TrainConfig(**{**settings.predictor.__dict__, "seed": seed})
    return train_predictor(ds, params, intents, cfg, **resume)


def train_models(scenes, latency: LatencyModel, align: str, settings: TrainSettings | None = None,
                 seed: int = 0, with_predictor: bool = True) -> tuple[PipelineModels, dict]:
    """Train the alignment model (if any) and the trajectory predictor for one variant."""
    settings = settings or TrainSettings()
    curves = {}
    prop = None
    if align != "none":
        data = collect_transitions(scenes, latency, settings, seed)
        prop, curves["propagator"] = train_alignment(align, data, settings, seed)
    models = PipelineModels(align, prop)
    if not with_predictor:
        return models, curves
    intents = fit_intentions(scenes, settings, seed)
    ds = collect_predictions(scenes, latency, models, settings, seed)
    pred, curves["predictor"] = train_prediction(ds, intents, settings, seed, n_classes_of(scenes))
    return PipelineModels(align, prop, pred, intents), curves


def n_classes_of(scenes) -> int:
    cfg = scenes[0].config
    return cfg.n_classes if cfg is not None else 3
