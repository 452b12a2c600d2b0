"""Continuous-time propagation of object queries across irregular gaps.

The hidden state evolves under a motion-conditioned linear ODE whose
transition matrix is a weighted sum of basis matrices sharing one
orthogonal eigenbasis ``E``. Because the basis is shared, the matrix
exponential collapses to an element-wise exponential of the summed
eigenvalues. ``E`` is a product of Householder reflectors, so it stays
orthogonal under gradient descent without any projection.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import Pose2, Rng, apply_pose
from .nn import (
    Mlp,
    Optimizer,
    TrainConfig,
    check_finite,
    clip_by_global_norm,
    load_bundle,
    lr_at,
    mlp_from_arrays,
    mlp_hyper,
    mlp_to_arrays,
    save_bundle,
    softmax,
    softmax_backward,
)

MOTION_DIM = 7
EIG_BOUND = 5.0


@dataclass(frozen=True)
class MotionAttributes:
    """Ego transform from the history time to the target time, object velocity and gap."""

    ego_delta: Pose2
    velocity: tuple
    dt: float

    def __post_init__(self):
        if self.dt < 0:
            raise ValueError("dt must be non-negative")

    def vector(self) -> np.ndarray:
        c, s, dx, dy = self.ego_delta.as_features()
        return np.array([c, s, dx, dy, self.velocity[0], self.velocity[1], self.dt])


def motion_vector(ego_delta: Pose2, velocity, dt: float) -> np.ndarray:
    return MotionAttributes(ego_delta, tuple(velocity), dt).vector()


@dataclass
class QueryState:
    center: np.ndarray
    embedding: np.ndarray


# --------------------------------------------------------------------------
# physical part


def select_history(times: Sequence[float], t: float):
    """Latest observation time strictly before ``t`` (or ``None``)."""
    i = bisect.bisect_left(times, t)
    return times[i - 1] if i > 0 else None


def center_transform(center, m: MotionAttributes) -> np.ndarray:
    """Rigid ego transform of the center, then displacement by ``velocity * dt``."""
    p = apply_pose(m.ego_delta, center)
    return p + np.asarray(m.velocity, dtype=np.float64) * m.dt


def center_transform_batch(centers, motion) -> np.ndarray:
    """Vectorized form; ``motion`` rows are 7-d motion vectors."""
    c, s, dx, dy, vx, vy, dt = (motion[:, i] for i in range(MOTION_DIM))
    x, y = centers[:, 0], centers[:, 1]
    return np.stack([c * x - s * y + dx + vx * dt, s * x + c * y + dy + vy * dt], axis=1)


# --------------------------------------------------------------------------
# Householder eigenbasis


def householder_basis(U: np.ndarray) -> np.ndarray:
    """``E = H_0 H_1 ... H_{n-1}`` with ``H_i = I - 2 u_i u_i^T / |u_i|^2`` (rows of ``U``)."""
    M = U.shape[1]
    E = np.eye(M)
    for u in U:
        E -= (2.0 / (u @ u)) * np.outer(E @ u, u)
    return E


def householder_backward(U: np.ndarray, gE: np.ndarray) -> np.ndarray:
    """Gradient of a scalar loss w.r.t. the reflector vectors, given ``dL/dE``."""
    n, M = U.shape
    prefixes = [np.eye(M)]
    for u in U[:-1]:
        P = prefixes[-1]
        prefixes.append(P - (2.0 / (u @ u)) * np.outer(P @ u, u))
    gU = np.empty_like(U)
    S = np.eye(M)  # suffix H_{i+1} ... H_{n-1}
    for i in range(n - 1, -1, -1):
        u = U[i]
        nn = u @ u
        P = prefixes[i]
        # gH = P^T gE S^T ; only gH u, gH^T u are needed
        gHu = P.T @ (gE @ (S.T @ u))
        gHtu = S @ (gE.T @ (P @ u))
        gU[i] = -2.0 * (gHu + gHtu) / nn + 4.0 * (u @ gHu) * u / (nn * nn)
        S = S - (2.0 / nn) * np.outer(u, u @ S)
    return gU


# --------------------------------------------------------------------------
# matrix exponential oracle


def matrix_exp_oracle(A: np.ndarray, t: float = 1.0) -> np.ndarray:
    """``exp(tA)`` by scaling and squaring with a degree-13 Taylor polynomial."""
    B = np.asarray(A, dtype=np.float64) * t
    n = B.shape[0]
    norm = np.abs(B).sum(axis=1).max() if n else 0.0
    s = 0
    while norm / (2.0**s) >= 0.5:
        s += 1
    X = B / (2.0**s)
    # Horner: I + X(I + X/2(I + X/3(...)))
    R = np.eye(n)
    for k in range(13, 0, -1):
        R = np.eye(n) + (X @ R) / k
    for _ in range(s):
        R = R @ R
    return R


# --------------------------------------------------------------------------
# learned part


@dataclass
class PropagatorParams:
    reflectors: np.ndarray  # (M, M): row i is Householder vector i
    omega_alpha: Mlp  # 7 -> K
    omega_d: Mlp  # 7 -> K * M
    phi_enc: Mlp  # M -> M
    phi_dec: Mlp  # M -> M
    n_basis: int = 10
    eig_bound: float = EIG_BOUND
    motion_eigenvalues: bool = True
    _E: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.reflectors.shape[1]

    @property
    def E(self) -> np.ndarray:
        if self._E is None:
            self._E = householder_basis(self.reflectors)
        return self._E

    def invalidate(self) -> None:
        self._E = None

    def arrays(self) -> list[np.ndarray]:
        return [self.reflectors, *self.omega_alpha.params(), *self.omega_d.params(),
                *self.phi_enc.params(), *self.phi_dec.params()]

    def groups(self) -> list[tuple[str, int]]:
        """``(path name, array count)`` per trainable path, in :meth:`arrays` order."""
        return [("eigenbasis", 1), ("omega_alpha", len(self.omega_alpha.params())),
                ("omega_d", len(self.omega_d.params())), ("phi_enc", len(self.phi_enc.params())),
                ("phi_dec", len(self.phi_dec.params()))]

    def copy(self) -> "PropagatorParams":
        return PropagatorParams(self.reflectors.copy(), self.omega_alpha.copy(), self.omega_d.copy(),
                                self.phi_enc.copy(), self.phi_dec.copy(), self.n_basis,
                                self.eig_bound, self.motion_eigenvalues)

    @classmethod
    def create(cls, dim: int = 32, n_basis: int = 10, hidden: int = 32, rng: Rng | None = None,
               motion_eigenvalues: bool = True, phi_hidden: int | None = None) -> "PropagatorParams":
        rng = rng or Rng(0)
        phi_hidden = phi_hidden or dim
        return cls(
            reflectors=rng.normal(size=(dim, dim)),
            omega_alpha=Mlp.create([MOTION_DIM, hidden, n_basis], ["tanh", "identity"], rng.child(1)),
            omega_d=Mlp.create([MOTION_DIM, hidden, n_basis * dim], ["tanh", "identity"], rng.child(2), scale=0.5),
            phi_enc=Mlp.create([dim, phi_hidden, dim], ["tanh", "identity"], rng.child(3), zero_last=True, residual=True),
            phi_dec=Mlp.create([dim, phi_hidden, dim], ["tanh", "identity"], rng.child(4), zero_last=True, residual=True),
            n_basis=n_basis,
            motion_eigenvalues=motion_eigenvalues,
        )

    def save(self, path) -> None:
        arrays = {"reflectors": self.reflectors}
        for name, net in (("omega_alpha", self.omega_alpha), ("omega_d", self.omega_d),
                          ("phi_enc", self.phi_enc), ("phi_dec", self.phi_dec)):
            arrays.update(mlp_to_arrays(net, name))
        hyper = {
            "kind": "propagator", "variant": "ode", "dim": self.dim, "n_basis": self.n_basis,
            "eig_bound": self.eig_bound, "motion_eigenvalues": self.motion_eigenvalues,
            "nets": {n: mlp_hyper(getattr(self, n)) for n in ("omega_alpha", "omega_d", "phi_enc", "phi_dec")},
        }
        save_bundle(path, arrays, hyper)

    @classmethod
    def load(cls, path) -> "PropagatorParams":
        arrays, hyper = load_bundle(path)
        if hyper.get("kind") != "propagator" or hyper.get("variant") != "ode":
            raise ValueError(f"{path}: not an ODE propagator bundle")
        nets = {n: mlp_from_arrays(arrays, n, hyper["nets"][n]) for n in hyper["nets"]}
        return cls(arrays["reflectors"].copy(), nets["omega_alpha"], nets["omega_d"], nets["phi_enc"],
                   nets["phi_dec"], int(hyper["n_basis"]), float(hyper["eig_bound"]),
                   bool(hyper["motion_eigenvalues"]))


def _exponent_forward(params: PropagatorParams, motion: np.ndarray):
    """Batched ``lambda = dt * sum_k alpha_k d^(k)``; returns lambda and a cache."""
    K, M = params.n_basis, params.dim
    a_logits, a_trace = params.omega_alpha.forward(motion, cache=True)
    alpha = softmax(a_logits)
    d_in = motion if params.motion_eigenvalues else np.zeros_like(motion)
    d_raw, d_trace = params.omega_d.forward(d_in, cache=True)
    th = np.tanh(d_raw)
    D = params.eig_bound * th.reshape(-1, K, M)
    rate = np.einsum("bk,bkm->bm", alpha, D)
    dt = motion[:, 6:7]
    lam = dt * rate
    return lam, (a_trace, alpha, d_trace, th, D, rate, dt)


def transition_exponent(m: MotionAttributes, params: PropagatorParams) -> np.ndarray:
    lam, _ = _exponent_forward(params, m.vector()[None, :])
    return lam[0]


def transition_rate(m: MotionAttributes, params: PropagatorParams) -> np.ndarray:
    """Diagonal of ``sum_k alpha_k D^(k)`` (eigenvalues of the transition matrix)."""
    _, cache = _exponent_forward(params, m.vector()[None, :])
    return cache[5][0]


def transition_matrix(m: MotionAttributes, params: PropagatorParams) -> np.ndarray:
    """Dense ``A = E diag(rate) E^T`` (for oracle comparisons only)."""
    E = params.E
    return (E * transition_rate(m, params)) @ E.T


def propagate_hidden_batch(Z: np.ndarray, motion: np.ndarray, params: PropagatorParams) -> np.ndarray:
    lam, _ = _exponent_forward(params, motion)
    E = params.E
    return (np.exp(lam) * (Z @ E)) @ E.T


def propagate_hidden(z, m: MotionAttributes, params: PropagatorParams) -> np.ndarray:
    """``E (exp(lambda) * (E^T z))`` with the element-wise exponential."""
    if m.dt == 0.0:
        return np.array(z, dtype=np.float64, copy=True)
    return propagate_hidden_batch(np.asarray(z, dtype=np.float64)[None, :], m.vector()[None, :], params)[0]


def hidden_step(z, rate, dt: float, E: np.ndarray) -> np.ndarray:
    """Propagation with a frozen eigenvalue vector (used for semigroup checks)."""
    return E @ (np.exp(dt * np.asarray(rate)) * (E.T @ z))


def propagate_query(q: QueryState, m: MotionAttributes, params: PropagatorParams) -> QueryState:
    z = params.phi_enc.forward(q.embedding)
    z = propagate_hidden(z, m, params)
    return QueryState(center_transform(q.center, m), params.phi_dec.forward(z))


def propagate_embeddings(X: np.ndarray, motion: np.ndarray, params: PropagatorParams) -> np.ndarray:
    """Batched embedding path of :func:`propagate_query`."""
    out, _ = _propagator_forward(params, X, motion)
    return out


def _propagator_forward(params: PropagatorParams, X, motion):
    E = params.E
    Z, enc_trace = params.phi_enc.forward(X, cache=True)
    lam, exp_cache = _exponent_forward(params, motion)
    Y = Z @ E
    ex = np.exp(lam)
    W = ex * Y
    Zt = W @ E.T
    out, dec_trace = params.phi_dec.forward(Zt, cache=True)
    return out, (enc_trace, exp_cache, Z, Y, ex, W, dec_trace)


def _propagator_backward(params: PropagatorParams, motion, cache, g_out):
    enc_trace, (a_trace, alpha, d_trace, th, D, rate, dt), Z, Y, ex, W, dec_trace = cache
    E = params.E
    K, M = params.n_basis, params.dim
    g_dec, gZt = params.phi_dec.backward(dec_trace, g_out)
    gW = gZt @ E
    gE = gZt.T @ W
    gY = gW * ex
    g_lam = gW * W
    gZ = gY @ E.T
    gE += Z.T @ gY
    g_rate = g_lam * dt
    g_alpha = np.einsum("bm,bkm->bk", g_rate, D)
    gD = alpha[:, :, None] * g_rate[:, None, :]
    g_draw = (gD * params.eig_bound).reshape(-1, K * M) * (1.0 - th * th)
    g_d, _ = params.omega_d.backward(d_trace, g_draw)
    g_a, _ = params.omega_alpha.backward(a_trace, softmax_backward(alpha, g_alpha))
    g_enc, _ = params.phi_enc.backward(enc_trace, gZ)
    gU = householder_backward(params.reflectors, gE)
    return [gU, *g_a, *g_d, *g_enc, *g_dec]


def propagator_loss_and_grads(params: PropagatorParams, X, motion, target):
    """Mean squared embedding error and gradients aligned with ``params.arrays()``."""
    out, cache = _propagator_forward(params, X, motion)
    diff = out - target
    loss = float(np.mean(diff * diff))
    g = 2.0 * diff / diff.size
    return loss, _propagator_backward(params, motion, cache, g)


# --------------------------------------------------------------------------
# motion-aware layer normalization baseline


@dataclass
class MlnParams:
    gamma: Mlp  # 7 -> M
    beta: Mlp  # 7 -> M
    eps: float = 1e-5

    @property
    def dim(self) -> int:
        return self.gamma.out_dim

    def arrays(self):
        return [*self.gamma.params(), *self.beta.params()]

    def copy(self) -> "MlnParams":
        return MlnParams(self.gamma.copy(), self.beta.copy(), self.eps)

    @classmethod
    def create(cls, dim: int = 32, hidden: int = 32, rng: Rng | None = None) -> "MlnParams":
        rng = rng or Rng(0)
        gamma = Mlp.create([MOTION_DIM, hidden, dim], ["tanh", "identity"], rng.child(1), zero_last=True)
        gamma.biases[-1][:] = 1.0
        beta = Mlp.create([MOTION_DIM, hidden, dim], ["tanh", "identity"], rng.child(2), zero_last=True)
        return cls(gamma, beta)

    def save(self, path) -> None:
        arrays = {**mlp_to_arrays(self.gamma, "gamma"), **mlp_to_arrays(self.beta, "beta")}
        hyper = {"kind": "propagator", "variant": "mln", "dim": self.dim, "eps": self.eps,
                 "nets": {"gamma": mlp_hyper(self.gamma), "beta": mlp_hyper(self.beta)}}
        save_bundle(path, arrays, hyper)

    @classmethod
    def load(cls, path) -> "MlnParams":
        arrays, hyper = load_bundle(path)
        if hyper.get("kind") != "propagator" or hyper.get("variant") != "mln":
            raise ValueError(f"{path}: not an MLN bundle")
        return cls(mlp_from_arrays(arrays, "gamma", hyper["nets"]["gamma"]),
                   mlp_from_arrays(arrays, "beta", hyper["nets"]["beta"]), float(hyper["eps"]))


def _layer_norm(X, eps):
    mu = X.mean(axis=-1, keepdims=True)
    xc = X - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    return xc * inv, inv


def mln_embeddings(X, motion, params: MlnParams):
    Xn, _ = _layer_norm(np.atleast_2d(X), params.eps)
    return params.gamma.forward(motion) * Xn + params.beta.forward(motion)


def mln_transform(q: QueryState, m: MotionAttributes, params: MlnParams) -> QueryState:
    """``gamma(m) * normalize(embedding) + beta(m)``; center as in :func:`center_transform`."""
    emb = mln_embeddings(q.embedding[None, :], m.vector()[None, :], params)[0]
    return QueryState(center_transform(q.center, m), emb)


def mln_loss_and_grads(params: MlnParams, X, motion, target):
    Xn, _ = _layer_norm(X, params.eps)
    gam, g_trace = params.gamma.forward(motion, cache=True)
    bet, b_trace = params.beta.forward(motion, cache=True)
    out = gam * Xn + bet
    diff = out - target
    loss = float(np.mean(diff * diff))
    g = 2.0 * diff / diff.size
    gg, _ = params.gamma.backward(g_trace, g * Xn)
    gb, _ = params.beta.backward(b_trace, g)
    return loss, [*gg, *gb]


# --------------------------------------------------------------------------
# datasets and training


@dataclass
class TransitionDataset:
    """Pairs ``(source embedding, motion, target embedding)`` with optional centers."""

    src: np.ndarray
    motion: np.ndarray
    dst: np.ndarray
    src_center: np.ndarray | None = None
    dst_center: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.src)

    def subset(self, idx) -> "TransitionDataset":
        sc = None if self.src_center is None else self.src_center[idx]
        dc = None if self.dst_center is None else self.dst_center[idx]
        return TransitionDataset(self.src[idx], self.motion[idx], self.dst[idx], sc, dc)


@dataclass(frozen=True)
class LinearTeacher:
    """Linear hidden dynamics ``dz = U diag(rate(m)) U^T z dt``.

    ``rate_i(m) = -(base_i + speed_gain_i * |v| / 10 + turn_gain_i * |ego yaw delta|)``.
    """

    basis: np.ndarray
    base: np.ndarray
    speed_gain: np.ndarray
    turn_gain: np.ndarray

    @classmethod
    def random(cls, dim: int, rng: Rng) -> "LinearTeacher":
        q, r = np.linalg.qr(rng.normal(size=(dim, dim)))
        q = q * np.sign(np.diag(r))
        return cls(q, rng.uniform(0.1, 2.0, dim), rng.uniform(0.0, 1.0, dim), rng.uniform(0.0, 1.0, dim))

    def rate(self, motion: np.ndarray) -> np.ndarray:
        speed = np.hypot(motion[:, 4], motion[:, 5])[:, None]
        turn = np.abs(np.arctan2(motion[:, 1], motion[:, 0]))[:, None]
        return -(self.base + self.speed_gain * speed / 10.0 + self.turn_gain * turn)

    def step(self, Z, motion):
        lam = motion[:, 6:7] * self.rate(motion)
        return (np.exp(lam) * (Z @ self.basis)) @ self.basis.T


def teacher_step(kind: str, Z, motion, teacher: LinearTeacher | None = None):
    if kind == "identity":
        return Z.copy()
    if kind == "decay":
        return np.exp(-motion[:, 6:7]) * Z
    if kind == "linear":
        return teacher.step(Z, motion)
    raise ValueError(f"unknown teacher {kind!r}")


def random_motion(n: int, dts, rng: Rng, speed_max: float = 10.0, ego_speed_max: float = 8.0,
                  ego_rate_max: float = 0.3) -> np.ndarray:
    """Plausible motion attributes for a batch of gaps ``dts``."""
    dts = np.asarray(dts, dtype=np.float64)
    yaw = rng.uniform(-ego_rate_max, ego_rate_max, n) * dts
    ego_v = rng.uniform(0.0, ego_speed_max, n)
    dx = -ego_v * dts * np.cos(yaw)
    dy = -ego_v * dts * np.sin(yaw)
    heading = rng.uniform(-math.pi, math.pi, n)
    speed = rng.uniform(0.0, speed_max, n)
    return np.stack([np.cos(yaw), np.sin(yaw), dx, dy, speed * np.cos(heading), speed * np.sin(heading), dts], axis=1)


def make_teacher_dataset(kind: str, n_seq: int, seq_len: int, dim: int, latency, rng: Rng,
                         noise: float = 0.0, teacher: LinearTeacher | None = None,
                         jitter: float = 0.2) -> TransitionDataset:
    """Irregular-interval query sequences split into consecutive transitions.

    Gaps are drawn from ``latency`` and multiplied by ``U(1 - jitter, 1 + jitter)``
    (frame-interval perturbation around the latency). Targets are the
    noiseless teacher state plus Gaussian noise of std ``noise``.
    """
    srcs, motions, dsts, c0, c1 = [], [], [], [], []
    model = latency.fresh()
    for s in range(n_seq):
        r = rng.child(s)
        z = r.normal(size=(1, dim))
        center = r.uniform(-30, 30, size=(1, 2))
        for _ in range(seq_len):
            dt = model.sample(r) * r.uniform(1.0 - jitter, 1.0 + jitter)
            m = random_motion(1, [dt], r)
            z_next = teacher_step(kind, z, m, teacher)
            c_next = center_transform_batch(center, m)
            srcs.append(z[0])
            motions.append(m[0])
            dsts.append(z_next[0] + noise * r.normal(size=dim))
            c0.append(center[0])
            c1.append(c_next[0])
            z, center = z_next, c_next
            # re-seed decayed states so magnitudes stay O(1)
            if np.linalg.norm(z) < 0.3 * math.sqrt(dim):
                z = r.normal(size=(1, dim))
    return TransitionDataset(np.array(srcs), np.array(motions), np.array(dsts), np.array(c0), np.array(c1))


LossFn = Callable[[np.ndarray], tuple]


def run_training(arrays_fn, loss_fn: LossFn, n_items: int, cfg: TrainConfig, what: str,
                 start_step: int = 0, optimizer: Optimizer | None = None, on_step=None,
                 after_update=None):
    """Shared minibatch loop. Batch ``s`` is drawn from ``Rng(cfg.seed).child(s)``,
    so a run resumed at ``start_step`` replays the uninterrupted run exactly."""
    opt = optimizer or Optimizer(cfg.optimizer, cfg.lr)
    losses = []
    base = Rng(cfg.seed, 0x7A1)
    for step in range(start_step, cfg.steps):
        if cfg.batch_size and cfg.batch_size < n_items:
            idx = np.sort(base.child(step).choice(n_items, cfg.batch_size, replace=False))
        else:
            idx = np.arange(n_items)
        loss, grads = loss_fn(idx)
        check_finite(loss, step, what)
        grads, _ = clip_by_global_norm(grads, cfg.clip_norm)
        opt.step(arrays_fn(), grads, lr_at(cfg, step))
        if after_update is not None:
            after_update()
        losses.append(loss)
        if on_step is not None:
            on_step(step, loss, opt)
    return losses, opt


def train_propagator(dataset: TransitionDataset, params: PropagatorParams, opt: TrainConfig,
                     start_step: int = 0, optimizer: Optimizer | None = None, on_step=None):
    """Fit the ODE propagator to ``dataset``; returns ``(params, loss curve)``."""
    if not len(dataset):
        raise ValueError("empty dataset")

    def loss_fn(idx):
        return propagator_loss_and_grads(params, dataset.src[idx], dataset.motion[idx], dataset.dst[idx])

    losses, optimizer = run_training(params.arrays, loss_fn, len(dataset), opt, "propagator",
                                     start_step, optimizer, on_step, after_update=params.invalidate)
    params.last_optimizer = optimizer
    return params, losses


def train_mln(dataset: TransitionDataset, params: MlnParams, opt: TrainConfig,
              start_step: int = 0, optimizer: Optimizer | None = None, on_step=None):
    if not len(dataset):
        raise ValueError("empty dataset")

    def loss_fn(idx):
        return mln_loss_and_grads(params, dataset.src[idx], dataset.motion[idx], dataset.dst[idx])

    losses, optimizer = run_training(params.arrays, loss_fn, len(dataset), opt, "mln", start_step,
                                     optimizer, on_step)
    params.last_optimizer = optimizer
    return params, losses


def propagate_variant(variant: str, X, motion, params=None) -> np.ndarray:
    """Embedding alignment by variant: ``none`` (identity), ``mln`` or ``ode``."""
    if variant == "none":
        return np.array(X, dtype=np.float64, copy=True)
    if variant == "mln":
        return mln_embeddings(X, motion, params)
    if variant == "ode":
        return propagate_embeddings(X, motion, params)
    raise ValueError(f"unknown propagation variant {variant!r}")


def variant_mse(variant: str, dataset: TransitionDataset, params=None) -> float:
    out = propagate_variant(variant, dataset.src, dataset.motion, params)
    return float(np.mean((out - dataset.dst) ** 2))


def load_propagator(path):
    """Load either an ODE or an MLN bundle based on its sidecar."""
    _, hyper = load_bundle(path)
    if hyper.get("variant") == "mln":
        return MlnParams.load(path)
    return PropagatorParams.load(path)
