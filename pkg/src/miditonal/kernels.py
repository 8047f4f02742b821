"""Hot numeric kernels, each in a numba loop form and a numpy form.

The loop forms (``*_loops``) compile under numba; the numpy forms are the
fallback when ``MIDITONAL_DISABLE_JIT`` is set. Both produce bit-identical
results, which the test-suite checks directly.
"""

import numpy as np

from ._accel import JIT_ENABLED, njit, select

# ---------------------------------------------------------------- windows


def _window_weights_loops(onsets, ends, bins, n_windows, n_bins, width):
    out = np.zeros((n_windows, n_bins))
    for i in range(onsets.shape[0]):
        first = int(np.floor(onsets[i] / width))
        last = int(np.ceil(ends[i] / width)) - 1
        if first < 0:
            first = 0
        if last > n_windows - 1:
            last = n_windows - 1
        for j in range(first, last + 1):
            lo = max(onsets[i], j * width)
            hi = min(ends[i], (j + 1) * width)
            if hi > lo:
                out[j, bins[i]] += hi - lo
    return out


def _window_weights_numpy(onsets, ends, bins, n_windows, n_bins, width):
    out = np.zeros((n_windows, n_bins))
    if onsets.size == 0 or n_windows == 0:
        return out
    first = np.maximum(np.floor(onsets / width).astype(np.int64), 0)
    last = np.minimum(np.ceil(ends / width).astype(np.int64) - 1, n_windows - 1)
    counts = np.maximum(last - first + 1, 0)
    note = np.repeat(np.arange(onsets.size), counts)
    # position of each (note, window) pair within its note's run
    offsets = np.arange(note.size) - np.repeat(np.cumsum(counts) - counts, counts)
    win = first[note] + offsets
    lo = np.maximum(onsets[note], win * width)
    hi = np.minimum(ends[note], (win + 1) * width)
    keep = hi > lo
    np.add.at(out, (win[keep], bins[note][keep]), (hi - lo)[keep])
    return out


# ---------------------------------------------------------------- diameters


def _cloud_diameters_loops(weights, pair_dist):
    n_windows, n_bins = weights.shape
    out = np.zeros(n_windows)
    for w in range(n_windows):
        best = 0.0
        for a in range(n_bins):
            if weights[w, a] <= 0.0:
                continue
            for b in range(a + 1, n_bins):
                if weights[w, b] > 0.0 and pair_dist[a, b] > best:
                    best = pair_dist[a, b]
        out[w] = best
    return out


def _cloud_diameters_numpy(weights, pair_dist):
    if weights.shape[0] == 0:
        return np.zeros(0)
    present = weights > 0.0
    both = present[:, :, None] & present[:, None, :]
    return np.where(both, pair_dist[None, :, :], 0.0).max(axis=(1, 2))


# ---------------------------------------------------------------- forest


def _best_split_loops(X, y, rows, features, min_leaf):
    """Best Gini split of ``rows`` over the candidate ``features``.

    Returns ``(feature, threshold, score)``; ``feature`` is -1 when no split
    leaves at least ``min_leaf`` rows on both sides. ``score`` is the sum over
    both children of ``n - (pos**2 + neg**2) / n``.
    """
    n = rows.shape[0]
    total_pos = 0
    for i in range(n):
        total_pos += y[rows[i]]
    best_feature = -1
    best_threshold = 0.0
    best_score = np.inf
    values = np.empty(n)
    labels = np.empty(n, dtype=np.int64)
    for f in features:
        for i in range(n):
            values[i] = X[rows[i], f]
        order = np.argsort(values, kind="mergesort")
        for i in range(n):
            labels[i] = y[rows[order[i]]]
        left_pos = 0
        for i in range(n - 1):
            left_pos += labels[i]
            left_n = i + 1
            right_n = n - left_n
            if left_n < min_leaf or right_n < min_leaf:
                continue
            lo = values[order[i]]
            hi = values[order[i + 1]]
            if not hi > lo:
                continue
            right_pos = total_pos - left_pos
            left_neg = left_n - left_pos
            right_neg = right_n - right_pos
            score = (left_n - (left_pos * left_pos + left_neg * left_neg) / left_n) + (
                right_n - (right_pos * right_pos + right_neg * right_neg) / right_n
            )
            if score < best_score:
                best_score = score
                best_feature = f
                threshold = (lo + hi) / 2.0
                if not threshold < hi:
                    threshold = lo
                best_threshold = threshold
    return best_feature, best_threshold, best_score


def _best_split_numpy(X, y, rows, features, min_leaf):
    n = rows.shape[0]
    total_pos = int(y[rows].sum())
    best_feature, best_threshold, best_score = -1, 0.0, np.inf
    if n < 2:
        return best_feature, best_threshold, best_score
    left_n = np.arange(1, n, dtype=np.int64)
    right_n = n - left_n
    for f in features:
        values = X[rows, f]
        order = np.argsort(values, kind="mergesort")
        sorted_vals = values[order]
        left_pos = np.cumsum(y[rows[order]])[:-1]
        right_pos = total_pos - left_pos
        left_neg = left_n - left_pos
        right_neg = right_n - right_pos
        valid = (left_n >= min_leaf) & (right_n >= min_leaf) & (sorted_vals[1:] > sorted_vals[:-1])
        if not valid.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            score = (left_n - (left_pos * left_pos + left_neg * left_neg) / left_n) + (
                right_n - (right_pos * right_pos + right_neg * right_neg) / right_n
            )
        score = np.where(valid, score, np.inf)
        i = int(np.argmin(score))
        if score[i] < best_score:
            lo, hi = sorted_vals[i], sorted_vals[i + 1]
            threshold = (lo + hi) / 2.0
            if not threshold < hi:
                threshold = lo
            best_feature, best_threshold, best_score = int(f), float(threshold), float(score[i])
    return best_feature, best_threshold, best_score


def _predict_tree_loops(feature, threshold, left, right, value, X):
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


def _predict_tree_numpy(feature, threshold, left, right, value, X):
    node = np.zeros(X.shape[0], dtype=np.int64)
    rows = np.arange(X.shape[0])
    active = feature[node] >= 0
    while active.any():
        idx = rows[active]
        cur = node[idx]
        go_left = X[idx, feature[cur]] <= threshold[cur]
        node[idx] = np.where(go_left, left[cur], right[cur])
        active = feature[node] >= 0
    return value[node]


window_weights_jit = njit(cache=True)(_window_weights_loops)
cloud_diameters_jit = njit(cache=True)(_cloud_diameters_loops)
best_split_jit = njit(cache=True)(_best_split_loops)
predict_tree_jit = njit(cache=True)(_predict_tree_loops)

window_weights = select(window_weights_jit, _window_weights_numpy)
cloud_diameters = select(cloud_diameters_jit, _cloud_diameters_numpy)
best_split = select(best_split_jit, _best_split_numpy)
predict_tree = select(predict_tree_jit, _predict_tree_numpy)

BACKEND = "numba" if JIT_ENABLED else "numpy"
