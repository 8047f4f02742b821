"""Cloud diameter, cloud momentum and tensile strain over time windows.

A window's *cloud* is the set of spelled pitch positions sounding inside
it, each weighted by how long it sounds there. Diameter is the widest pair
of distinct positions, momentum the jump of the center of effect between
neighbouring windows, and strain the distance from the center of effect to
the key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import kernels
from .midi_io import TimeSigMap
from .spiral import DEFAULT_PARAMS, KeyId, Point3, SpiralParams, key_center, pitch_position, pitch_positions
from .tonal import KeyEstimate, SpelledNote, detect_key, spelling_of

DEFAULT_WINDOW_BEATS = 2.0
KEY_CHANGE_SPAN_BEATS = 16.0
KEY_CHANGE_RATIO = 2.0
KEY_CHANGE_CONSECUTIVE = 4
RATIO_EPSILON = 1e-6


@dataclass(frozen=True)
class Cloud:
    start_beat: float
    end_beat: float
    fifths: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if not self.end_beat > self.start_beat:
            raise ValueError("a cloud must span a positive time range")

    @property
    def is_empty(self) -> bool:
        return self.fifths.size == 0

    def weighted_points(self, params: SpiralParams = DEFAULT_PARAMS) -> list[tuple[Point3, float]]:
        return [(pitch_position(int(k), params), float(w)) for k, w in zip(self.fifths, self.weights)]

    def center(self, params: SpiralParams = DEFAULT_PARAMS) -> Point3 | None:
        if self.is_empty:
            return None
        return (self.weights @ pitch_positions(self.fifths, params)) / self.weights.sum()


@dataclass(frozen=True)
class TensionSeries:
    window_beats: float
    window_starts: np.ndarray
    diameter: np.ndarray
    momentum: np.ndarray
    strain: np.ndarray
    bars: np.ndarray
    bar_diameter: np.ndarray
    bar_momentum: np.ndarray
    bar_strain: np.ndarray
    key: KeyId | None = None
    key_changes: tuple[tuple[int, float], ...] = ()
    segment_keys: tuple[tuple[float, KeyId], ...] = ()

    @property
    def windows(self) -> list[tuple[float, float, float, float]]:
        return list(zip(self.window_starts.tolist(), self.diameter.tolist(), self.momentum.tolist(), self.strain.tolist()))

    @property
    def per_bar(self) -> list[tuple[int, float, float, float]]:
        return list(zip(self.bars.tolist(), self.bar_diameter.tolist(), self.bar_momentum.tolist(), self.bar_strain.tolist()))

    def equals(self, other: "TensionSeries") -> bool:
        arrays = ("window_starts", "diameter", "momentum", "strain", "bars", "bar_diameter", "bar_momentum", "bar_strain")
        return (
            self.window_beats == other.window_beats
            and self.key == other.key
            and self.key_changes == other.key_changes
            and all(np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays)
        )


def _note_arrays(spelled: Sequence[SpelledNote]):
    notes = [s for s in spelled if s.channel != 9]
    onsets = np.array([s.onset_beats for s in notes], dtype=float)
    ends = np.array([s.end_beats for s in notes], dtype=float)
    fifths = np.array([s.fifth_index for s in notes], dtype=np.int64)
    return onsets, ends, fifths


def window_count(piece_end_beat: float, window_beats: float) -> int:
    if piece_end_beat <= 0:
        return 0
    return max(1, math.ceil(piece_end_beat / window_beats - 1e-9))


def _window_matrix(spelled, window_beats, piece_end_beat):
    """Per-window weights over the fifth indices ``kmin..kmin+n_bins-1``."""
    if not window_beats > 0:
        raise ValueError("window_beats must be positive")
    onsets, ends, fifths = _note_arrays(spelled)
    n_windows = window_count(piece_end_beat, window_beats)
    kmin = int(fifths.min()) if fifths.size else 0
    n_bins = int(fifths.max()) - kmin + 1 if fifths.size else 1
    weights = kernels.window_weights(onsets, ends, fifths - kmin, n_windows, n_bins, float(window_beats))
    return weights, kmin


def window_clouds(spelled: Sequence[SpelledNote], window_beats: float, piece_end_beat: float) -> list[Cloud]:
    weights, kmin = _window_matrix(spelled, window_beats, piece_end_beat)
    clouds = []
    for i, row in enumerate(weights):
        nz = np.flatnonzero(row > 0)
        clouds.append(Cloud(i * window_beats, (i + 1) * window_beats, nz.astype(np.int64) + kmin, row[nz]))
    return clouds


def cloud_diameter(cloud: Cloud, params: SpiralParams = DEFAULT_PARAMS) -> float:
    ks = np.unique(cloud.fifths)
    if ks.size < 2:
        return 0.0
    pts = pitch_positions(ks, params)
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diff**2).sum(-1)).max())


def cloud_momentum(prev: Cloud | None, cur: Cloud | None, params: SpiralParams = DEFAULT_PARAMS) -> float:
    if prev is None or cur is None or prev.is_empty or cur.is_empty:
        return 0.0
    return float(np.linalg.norm(cur.center(params) - prev.center(params)))


def tensile_strain(cloud: Cloud, key: KeyId, params: SpiralParams = DEFAULT_PARAMS) -> float:
    if cloud.is_empty:
        return 0.0
    return float(np.linalg.norm(cloud.center(params) - key_center(key, params)))


def _measures(weights, kmin, keys_per_window, params):
    n_windows, n_bins = weights.shape
    positions = pitch_positions(np.arange(kmin, kmin + n_bins), params)
    pair_dist = np.sqrt(((positions[:, None, :] - positions[None, :, :]) ** 2).sum(-1))
    diameter = kernels.cloud_diameters(weights, pair_dist)

    totals = weights.sum(axis=1)
    filled = totals > 0
    centers = np.zeros((n_windows, 3))
    centers[filled] = (weights[filled] @ positions) / totals[filled, None]

    momentum = np.zeros(n_windows)
    if n_windows > 1:
        both = filled[1:] & filled[:-1]
        step = np.linalg.norm(centers[1:] - centers[:-1], axis=1)
        momentum[1:] = np.where(both, step, 0.0)

    strain = np.zeros(n_windows)
    if n_windows:
        key_points = np.array([key_center(k, params) for k in keys_per_window]).reshape(n_windows, 3)
        strain = np.where(filled, np.linalg.norm(centers - key_points, axis=1), 0.0)
    return diameter, momentum, strain


def aggregate_bars(window_starts: np.ndarray, values: Sequence[np.ndarray], timesig: TimeSigMap, n_bars: int):
    """Mean of each series over the windows that start in each bar.

    A bar holding no window start (bars shorter than a window) takes the
    values of the window covering its downbeat.
    """
    bars = np.arange(1, n_bars + 1)
    if n_bars == 0:
        return bars, [np.zeros(0) for _ in values]
    window_bar = np.array([timesig.bar_of(float(s)) for s in window_starts], dtype=np.int64)
    out = []
    counts = np.bincount(window_bar, minlength=n_bars + 1)[1 : n_bars + 1] if window_bar.size else np.zeros(n_bars)
    for series in values:
        sums = np.bincount(window_bar, weights=series, minlength=n_bars + 1)[1 : n_bars + 1] if window_bar.size else np.zeros(n_bars)
        with np.errstate(invalid="ignore", divide="ignore"):
            means = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
        out.append(means)
    if window_starts.size:
        width = window_starts[1] - window_starts[0] if window_starts.size > 1 else None
        for b in np.flatnonzero(counts == 0):
            downbeat = timesig.bar_start(int(bars[b]))
            idx = np.searchsorted(window_starts, downbeat, side="right") - 1
            if idx >= 0 and (width is None or downbeat < window_starts[idx] + width):
                for means, series in zip(out, values):
                    means[b] = series[idx]
    return bars, out


def piece_end(spelled: Sequence[SpelledNote]) -> float:
    return max((s.end_beats for s in spelled if s.channel != 9), default=0.0)


def compute_tension(
    spelled: Sequence[SpelledNote],
    key: KeyId | KeyEstimate,
    window_beats: float = DEFAULT_WINDOW_BEATS,
    timesig: TimeSigMap | None = None,
    params: SpiralParams = DEFAULT_PARAMS,
    piece_end_beat: float | None = None,
) -> TensionSeries:
    if isinstance(key, KeyEstimate):
        key = key.key
    timesig = timesig or TimeSigMap()
    end = piece_end(spelled) if piece_end_beat is None else piece_end_beat
    weights, kmin = _window_matrix(spelled, window_beats, end)
    n_windows = weights.shape[0]
    starts = np.arange(n_windows) * float(window_beats)
    diameter, momentum, strain = _measures(weights, kmin, [key] * n_windows, params)
    n_bars = timesig.bar_count(end)
    bars, (bd, bm, bs) = aggregate_bars(starts, (diameter, momentum, strain), timesig, n_bars)
    return TensionSeries(window_beats, starts, diameter, momentum, strain, bars, bd, bm, bs, key)


def detect_key_changes(
    series: TensionSeries,
    timesig: TimeSigMap | None = None,
    *,
    span_beats: float = KEY_CHANGE_SPAN_BEATS,
    ratio: float = KEY_CHANGE_RATIO,
    consecutive: int = KEY_CHANGE_CONSECUTIVE,
    epsilon: float = RATIO_EPSILON,
    direction: str = "backward",
) -> list[tuple[int, float]]:
    """Flag modulations where mean strain jumps against the adjacent span.

    The detector steps one analysis window at a time. At step ``i`` the
    *current* span is the ``span_beats`` ending with window ``i``; it is
    compared with the span right before it (``direction="backward"``) or,
    with ``direction="forward"``, the span right after is compared with
    it. A step is hot when the ratio exceeds ``ratio`` and the reference
    mean exceeds ``epsilon``. The ``consecutive``-th step of a hot run
    raises one flag at the start of the window where the run began: the
    newest window of the current span when looking backward, the first
    window of the following span when looking forward. Flags closer than
    ``span_beats`` to the previous flag are suppressed.
    """
    if direction not in ("backward", "forward"):
        raise ValueError("direction must be 'backward' or 'forward'")
    timesig = timesig or TimeSigMap()
    strain = np.asarray(series.strain, dtype=float)
    w = series.window_beats
    m = max(1, int(round(span_beats / w)))
    n = strain.size
    if n < 2 * m:
        return []
    csum = np.concatenate([[0.0], np.cumsum(strain)])

    def span_mean(last):  # mean over windows (last - m, last]
        return (csum[last + 1] - csum[last + 1 - m]) / m

    flags: list[tuple[int, float]] = []
    last_flag_beat = -math.inf
    run = 0
    run_start = 0
    if direction == "backward":
        steps = range(2 * m - 1, n)
    else:
        steps = range(m - 1, n - m)
    for i in steps:
        if direction == "backward":
            ref, cur = span_mean(i - m), span_mean(i)
            entry = i
        else:
            ref, cur = span_mean(i), span_mean(i + m)
            entry = i + 1
        hot = ref > epsilon and cur / ref > ratio
        if not hot:
            run = 0
            continue
        run += 1
        if run == 1:
            run_start = entry
        if run == consecutive:
            beat = float(series.window_starts[run_start])
            if beat - last_flag_beat >= span_beats:
                flags.append((timesig.bar_of(beat), beat))
                last_flag_beat = beat
    return flags


def with_key_changes(series: TensionSeries, timesig: TimeSigMap | None = None, **kwargs) -> TensionSeries:
    return replace(series, key_changes=tuple(detect_key_changes(series, timesig, **kwargs)))


def rekeyed_series(
    spelled: Sequence[SpelledNote],
    key_changes: Sequence[tuple[int, float]],
    series: TensionSeries,
    timesig: TimeSigMap | None = None,
    params: SpiralParams = DEFAULT_PARAMS,
) -> TensionSeries:
    """Recompute strain per segment against a key detected on that segment.

    Segments run between consecutive flagged beats; a note belongs to the
    segment containing its onset. Diameter and momentum are carried over.
    """
    if not key_changes:
        return series
    timesig = timesig or TimeSigMap()
    spelled = [s for s in spelled if s.channel != 9]
    spelling = spelling_of(spelled)
    bounds = sorted({0.0, *(float(b) for _, b in key_changes)})
    segment_keys = []
    for j, start in enumerate(bounds):
        stop = bounds[j + 1] if j + 1 < len(bounds) else math.inf
        members = [s for s in spelled if start <= s.onset_beats < stop]
        if members:
            segment_keys.append((start, detect_key(members, params, spelling).key))
        else:
            segment_keys.append((start, series.key))
    starts = series.window_starts
    seg_idx = np.searchsorted(np.array(bounds), starts, side="right") - 1
    keys = [segment_keys[i][1] for i in seg_idx]
    weights, kmin = _window_matrix(spelled, series.window_beats, starts.size * series.window_beats)
    _, _, strain = _measures(weights, kmin, keys, params)
    _, (bs,) = aggregate_bars(starts, (strain,), timesig, series.bars.size)
    return replace(series, strain=strain, bar_strain=bs, segment_keys=tuple(segment_keys))
