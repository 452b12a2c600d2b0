"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 20]

Prints one row per kernel with the best-of-``repeat`` time of each path, the
speedup, and whether the two paths agree on the benchmark input. Also times
one full streaming evaluation of a 20 s scene with the active backend.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from streamlat import _kernels as K
from streamlat.compensation import CompensationStrategy
from streamlat.core import Rng
from streamlat.eval import EvalConfig, streaming_evaluate
from streamlat.pipeline import PipelineModels
from streamlat.stream import ConstantLatency, frames_from_times, schedule_run
from streamlat.worldgen import SceneConfig, frame_times, generate_scene


def best_of(fn, args, repeat):
    fn(*args)  # warm-up (and JIT compile)
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t)
    return best


def as_tuple(r):
    return r if isinstance(r, tuple) else (r,)


def cases(rng):
    P, G = 300, 250
    dist = rng.uniform(0, 20, (P, G))
    order = np.argsort(-rng.random(P)).astype(np.int64)
    thr = np.array([0.5, 1.0, 2.0, 4.0])
    pts = rng.normal(size=(20_000, 2)) * 5
    cent = rng.normal(size=(6, 2)) * 5
    flags = (rng.random(50_000) < 0.6).astype(np.float64)
    return [
        ("greedy_match", K.greedy_match_py, K.greedy_match_jit, (dist, order, thr)),
        ("kmeans_assign", K.kmeans_assign_py, K.kmeans_assign_jit, (pts, cent)),
        ("clipped_pr_area", K.clipped_pr_area_py, K.clipped_pr_area_jit, (flags, 40_000, 0.1, 0.1)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    print(f"numba available: {K.HAVE_NUMBA}; active backend: {K.backend()}")
    print(f"{'kernel':16s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}  agree")
    for name, py, jit, a in cases(Rng(0)):
        tp = best_of(py, a, args.repeat)
        tj = best_of(jit, a, args.repeat)
        agree = all(np.allclose(x, y, rtol=1e-12, atol=0) for x, y in zip(as_tuple(py(*a)), as_tuple(jit(*a))))
        print(f"{name:16s} {tp * 1e3:10.3f} {tj * 1e3:10.3f} {tp / tj:8.1f}  {agree}")

    sc = generate_scene(SceneConfig(seed=1))
    sched = schedule_run(frames_from_times(frame_times(sc.duration, 12.0)), ConstantLatency(0.5), 12.0, Rng(1))
    t = time.perf_counter()
    streaming_evaluate(sc, sched, PipelineModels("none"), CompensationStrategy("velocity_based"), EvalConfig())
    print(f"streaming evaluation of one 20 s scene ({K.backend()}): {time.perf_counter() - t:.2f} s")


if __name__ == "__main__":
    main()
