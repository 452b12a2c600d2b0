import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streamlat import _kernels as K
from streamlat.core import Rng

needs_numba = pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba not installed")


def _match_case(seed):
    r = Rng(seed)
    P, G = int(r.integers(0, 12)), int(r.integers(0, 12))
    dist = np.ascontiguousarray(np.round(r.uniform(0, 5, (P, G)), 1))
    order = np.argsort(-r.random(P), kind="stable").astype(np.int64)
    return dist, order, np.array([0.5, 1.0, 2.0, 4.0])


@needs_numba
@given(st.integers(0, 100_000))
@settings(max_examples=60, deadline=None)
def test_greedy_match_parity(seed):
    args = _match_case(seed)
    np.testing.assert_array_equal(K.greedy_match_py(*args), K.greedy_match_jit(*args))


@needs_numba
@given(st.integers(0, 100_000), st.integers(1, 6))
@settings(max_examples=60, deadline=None)
def test_kmeans_assign_parity(seed, k):
    r = Rng(seed)
    pts = np.round(r.normal(size=(40, 2)), 1)
    cents = np.round(r.normal(size=(k, 2)), 1)
    la, sa = K.kmeans_assign_py(pts, cents)
    lb, sb = K.kmeans_assign_jit(pts, cents)
    np.testing.assert_array_equal(la, lb)
    assert sa == pytest.approx(sb, rel=1e-12)


@needs_numba
@given(st.integers(0, 100_000), st.integers(0, 40))
@settings(max_examples=60, deadline=None)
def test_clipped_pr_area_parity(seed, n_gt):
    flags = (Rng(seed).random(int(Rng(seed + 1).integers(0, 60))) < 0.5).astype(np.float64)
    a = K.clipped_pr_area_py(flags, n_gt, 0.1, 0.1)
    b = K.clipped_pr_area_jit(flags, n_gt, 0.1, 0.1)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-15)


def test_greedy_match_semantics():
    dist = np.array([[0.3, 0.2], [0.1, 3.0]])
    out = K.greedy_match_py(dist, np.array([0, 1]), np.array([0.5, 4.0]))
    # row 0 goes first and takes its nearest column; row 1 falls back to column 0 only if free
    np.testing.assert_array_equal(out, [[1, 0], [1, 0]])


def test_env_flag_selects_numpy():
    code = "from streamlat import _kernels as K; print(K.backend())"
    env = dict(os.environ, STREAMLAT_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
