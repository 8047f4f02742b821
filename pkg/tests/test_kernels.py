"""The numba loop kernels and their numpy fallbacks must agree bit for bit."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from miditonal import kernels as K

seeds = st.integers(0, 2**32 - 1)


def windows_case(rng):
    n = int(rng.integers(0, 60))
    onsets = rng.integers(0, 200, n) / 8.0
    ends = onsets + rng.integers(1, 40, n) / 8.0
    bins = rng.integers(0, 12, n)
    width = float(rng.choice([0.5, 1.0, 2.0, 3.0]))
    n_windows = int(np.ceil(ends.max() / width)) if n else 0
    return onsets, ends, bins.astype(np.int64), n_windows, 12, width


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_window_weights(seed):
    args = windows_case(np.random.default_rng(seed))
    a = K.window_weights_jit(*args)
    b = K._window_weights_numpy(*args)
    assert a.tobytes() == b.tobytes()


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_cloud_diameters(seed):
    rng = np.random.default_rng(seed)
    weights = rng.random((20, 9)) * (rng.random((20, 9)) < 0.4)
    pts = rng.normal(size=(9, 3))
    pair = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    assert K.cloud_diameters_jit(weights, pair).tobytes() == K._cloud_diameters_numpy(weights, pair).tobytes()


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 4))
def test_best_split(seed, min_leaf):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 80))
    X = np.round(rng.normal(size=(n, 6)), 1)
    y = (rng.random(n) < 0.4).astype(np.int64)
    rows = rng.choice(n, size=n).astype(np.int64)
    features = rng.choice(6, size=3, replace=False).astype(np.int64)
    a = K.best_split_jit(X, y, rows, features, min_leaf)
    b = K._best_split_numpy(X, y, rows, features, min_leaf)
    assert a[0] == b[0]
    assert np.float64(a[1]).tobytes() == np.float64(b[1]).tobytes()
    assert np.float64(a[2]).tobytes() == np.float64(b[2]).tobytes()


def test_best_split_separable():
    X = np.array([[0.1], [0.2], [0.8], [0.9]])
    y = np.array([0, 0, 1, 1])
    f, thr, _ = K._best_split_numpy(X, y, np.arange(4), np.array([0]), 1)
    assert f == 0 and thr == pytest.approx(0.5)


def test_predict_tree():
    # root splits feature 0 at 0.5; leaves 0.0 (left) and 1.0 (right)
    feature = np.array([0, -1, -1])
    threshold = np.array([0.5, 0.0, 0.0])
    left = np.array([1, -1, -1])
    right = np.array([2, -1, -1])
    value = np.array([0.0, 0.0, 1.0])
    X = np.array([[0.2], [0.5], [0.7]])
    for fn in (K.predict_tree_jit, K._predict_tree_numpy):
        assert fn(feature, threshold, left, right, value, X).tolist() == [0.0, 0.0, 1.0]


def test_backend_label():
    assert K.BACKEND in ("numba", "numpy")


def test_env_flag_selects_numpy_backend():
    import os
    import subprocess
    import sys

    env = dict(os.environ, MIDITONAL_DISABLE_JIT="1")
    out = subprocess.run(
        [sys.executable, "-c", "from miditonal import kernels; print(kernels.BACKEND, kernels.window_weights is kernels._window_weights_numpy)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.split() == ["numpy", "True"]
