"""Dense networks with hand-written backward passes, optimizers and parameter blobs.

Blob layout (all integers little-endian)::

    magic    4 bytes  b"SLPB"
    version  uint32
    count    uint32                      number of arrays
    repeated count times:
        name_len uint16, name utf-8 bytes
        ndim     uint32, dims uint64 * ndim
        data     float64 little-endian, row-major

A JSON sidecar (``<blob>.json``) carries the hyperparameters needed to
rebuild the owning object, plus the blob's array names.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Rng

BLOB_MAGIC = b"SLPB"
BLOB_VERSION = 1

ACTIVATIONS = ("identity", "tanh", "relu")


class ShapeError(ValueError):
    pass


class TrainingDivergence(RuntimeError):
    pass


def _act(name, x):
    if name == "tanh":
        return np.tanh(x)
    if name == "relu":
        return np.maximum(x, 0.0)
    return x


def _act_grad(name, pre, post, g):
    if name == "tanh":
        return g * (1.0 - post * post)
    if name == "relu":
        return g * (pre > 0.0)
    return g


@dataclass
class Mlp:
    """Stack of dense layers ``y = act(W x + b)``.

    With ``residual=True`` the network computes ``x + f(x)`` (square nets only).
    Inputs may be a single vector or a batch of row vectors.
    """

    weights: list
    biases: list
    activations: list
    residual: bool = False

    def __post_init__(self):
        if not (len(self.weights) == len(self.biases) == len(self.activations)):
            raise ShapeError("weights, biases and activations must align")
        for a in self.activations:
            if a not in ACTIVATIONS:
                raise ShapeError(f"unknown activation {a!r}")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ShapeError(f"layer {i}: bad shapes {w.shape}, {b.shape}")
            if i and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ShapeError(f"layer {i}: input dim {w.shape[1]} does not chain")
        if self.residual and self.in_dim != self.out_dim:
            raise ShapeError("residual networks must be square")

    @classmethod
    def create(cls, dims, activations, rng: Rng, scale: float = 1.0, zero_last: bool = False,
               residual: bool = False) -> "Mlp":
        ws, bs = [], []
        for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            w = rng.normal(0.0, scale / math.sqrt(a), size=(b, a))
            if zero_last and i == len(dims) - 2:
                w = np.zeros((b, a))
            ws.append(w)
            bs.append(np.zeros(b))
        return cls(ws, bs, list(activations), residual)

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[0]

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def param_names(self) -> list[str]:
        out = []
        for i in range(len(self.weights)):
            out += [f"W{i}", f"b{i}"]
        return out

    def copy(self) -> "Mlp":
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                   list(self.activations), self.residual)

    def forward(self, x, cache: bool = False):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"expected input dim {self.in_dim}, got {x.shape[-1]}")
        h = x
        trace = [(None, x)]
        for w, b, a in zip(self.weights, self.biases, self.activations):
            pre = h @ w.T + b
            h = _act(a, pre)
            trace.append((pre, h))
        y = x + h if self.residual else h
        return (y, trace) if cache else y

    def backward(self, trace, grad_out):
        """Return ``(param_grads, input_grad)``; grads are summed over the batch."""
        g = np.asarray(grad_out, dtype=np.float64)
        g_in_skip = g if self.residual else None
        grads = [None] * (2 * len(self.weights))
        for i in range(len(self.weights) - 1, -1, -1):
            pre, post = trace[i + 1]
            g = _act_grad(self.activations[i], pre, post, g)
            h_prev = trace[i][1]
            if g.ndim == 1:
                grads[2 * i] = np.outer(g, h_prev)
                grads[2 * i + 1] = g.copy()
            else:
                grads[2 * i] = g.T @ h_prev
                grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.weights[i]
        if g_in_skip is not None:
            g = g + g_in_skip
        return grads, g


def mlp_forward(net: Mlp, x) -> np.ndarray:
    return net.forward(x)


def mlp_backward(net: Mlp, x, upstream_grad):
    _, trace = net.forward(x, cache=True)
    return net.backward(trace, upstream_grad)


def softmax(x, axis=-1):
    z = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_backward(p, g, axis=-1):
    return p * (g - (p * g).sum(axis=axis, keepdims=True))


# --------------------------------------------------------------------------
# optimizers


@dataclass
class TrainConfig:
    steps: int = 2000
    lr: float = 0.05
    batch_size: int = 128
    optimizer: str = "sgd"  # sgd | adam
    clip_norm: float = 10.0
    cosine: bool = False
    seed: int = 0
    log_every: int = 1


def clip_by_global_norm(grads, max_norm):
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if not math.isfinite(total):
        return grads, total
    if max_norm and total > max_norm:
        s = max_norm / total
        grads = [g * s for g in grads]
    return grads, total


@dataclass
class Optimizer:
    """Plain gradient descent or Adam over a list of arrays, updated in place."""

    kind: str = "sgd"
    lr: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def step(self, params, grads, lr=None):
        lr = self.lr if lr is None else lr
        self.step_count += 1
        if self.kind == "sgd":
            for p, g in zip(params, grads):
                p -= lr * g
            return
        if self.kind != "adam":
            raise ValueError(f"unknown optimizer {self.kind!r}")
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.step_count
        c2 = 1.0 - b2**self.step_count
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state(self) -> dict:
        out = {"opt_step": np.array([float(self.step_count)])}
        for i, (m, v) in enumerate(zip(self.m, self.v)):
            out[f"opt_m{i}"] = m
            out[f"opt_v{i}"] = v
        return out

    def load_state(self, arrays: dict, n: int):
        self.step_count = int(arrays["opt_step"][0])
        if "opt_m0" in arrays:
            self.m = [arrays[f"opt_m{i}"].copy() for i in range(n)]
            self.v = [arrays[f"opt_v{i}"].copy() for i in range(n)]


def lr_at(cfg: TrainConfig, step: int) -> float:
    if not cfg.cosine:
        return cfg.lr
    return 0.5 * cfg.lr * (1.0 + math.cos(math.pi * step / max(cfg.steps, 1)))


def check_finite(loss: float, step: int, what: str) -> None:
    if not math.isfinite(loss):
        raise TrainingDivergence(
            f"{what} diverged at step {step}: loss={loss!r}; lower the learning rate "
            f"or tighten gradient clipping"
        )


# --------------------------------------------------------------------------
# parameter blobs


def write_blob(path, arrays: dict) -> None:
    out = bytearray()
    out += BLOB_MAGIC
    out += struct.pack("<II", BLOB_VERSION, len(arrays))
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr, dtype="<f8")
        nb = name.encode("utf-8")
        out += struct.pack("<H", len(nb)) + nb
        out += struct.pack("<I", a.ndim)
        out += struct.pack(f"<{a.ndim}Q", *a.shape)
        out += a.tobytes(order="C")
    Path(path).write_bytes(bytes(out))


def read_blob(path) -> dict:
    buf = Path(path).read_bytes()
    if buf[:4] != BLOB_MAGIC:
        raise ValueError(f"{path}: not a parameter blob")
    version, count = struct.unpack_from("<II", buf, 4)
    if version != BLOB_VERSION:
        raise ValueError(f"{path}: unsupported blob version {version}")
    off = 12
    arrays = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", buf, off)
        off += 2
        name = buf[off:off + nlen].decode("utf-8")
        off += nlen
        (ndim,) = struct.unpack_from("<I", buf, off)
        off += 4
        shape = struct.unpack_from(f"<{ndim}Q", buf, off)
        off += 8 * ndim
        n = int(np.prod(shape)) if ndim else 1
        arrays[name] = np.frombuffer(buf, dtype="<f8", count=n, offset=off).reshape(shape).astype(np.float64)
        off += 8 * n
    return arrays


def save_bundle(path, arrays: dict, hyper: dict) -> None:
    """Write ``path`` (blob) and ``path + '.json'`` (sidecar)."""
    path = Path(path)
    write_blob(path, arrays)
    side = dict(hyper)
    side["arrays"] = list(arrays)
    side["blob_version"] = BLOB_VERSION
    Path(str(path) + ".json").write_text(json.dumps(side, indent=1, sort_keys=True) + "\n")


def load_bundle(path) -> tuple[dict, dict]:
    path = Path(path)
    side_path = Path(str(path) + ".json")
    if not path.exists() or not side_path.exists():
        raise FileNotFoundError(f"model bundle {path} (and sidecar .json) not found")
    return read_blob(path), json.loads(side_path.read_text())


def mlp_to_arrays(net: Mlp, prefix: str) -> dict:
    return {f"{prefix}.{n}": p for n, p in zip(net.param_names(), net.params())}


def mlp_hyper(net: Mlp) -> dict:
    dims = [net.in_dim] + [w.shape[0] for w in net.weights]
    return {"dims": dims, "activations": list(net.activations), "residual": net.residual}


def mlp_from_arrays(arrays: dict, prefix: str, hyper: dict) -> Mlp:
    n = len(hyper["activations"])
    ws = [arrays[f"{prefix}.W{i}"].copy() for i in range(n)]
    bs = [arrays[f"{prefix}.b{i}"].copy() for i in range(n)]
    return Mlp(ws, bs, list(hyper["activations"]), bool(hyper.get("residual", False)))


def save_checkpoint(path, params: list, optimizer: Optimizer, step: int, losses, hyper: dict) -> None:
    """Training state after ``step`` completed steps: parameters, optimizer moments, loss curve."""
    arrays = {f"param{i}": p for i, p in enumerate(params)}
    arrays.update(optimizer.state())
    arrays["losses"] = np.asarray(losses, dtype=np.float64)
    save_bundle(path, arrays, {**hyper, "kind": "checkpoint", "step": int(step), "n_params": len(params),
                               "optimizer": optimizer.kind})


def load_checkpoint(path, params: list, optimizer: Optimizer) -> tuple[int, list, dict]:
    """Restore into ``params`` (in place) and ``optimizer``; returns ``(step, losses, hyper)``."""
    arrays, hyper = load_bundle(path)
    if hyper.get("kind") != "checkpoint":
        raise ValueError(f"{path}: not a training checkpoint")
    if hyper["n_params"] != len(params):
        raise ShapeError(f"{path}: checkpoint holds {hyper['n_params']} arrays, model has {len(params)}")
    for i, p in enumerate(params):
        src = arrays[f"param{i}"]
        if src.shape != p.shape:
            raise ShapeError(f"{path}: array {i} has shape {src.shape}, model expects {p.shape}")
        np.copyto(p, src)
    optimizer.load_state(arrays, len(params))
    return int(hyper["step"]), list(arrays["losses"]), hyper
