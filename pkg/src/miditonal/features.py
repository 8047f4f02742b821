"""Per-track descriptors for melody / bass / harmony classification."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import EmptyTrack
from .midi_io import Note, TimeSigMap

FEATURE_NAMES = (
    "note_count",
    "notes_per_beat",
    "pitch_mean",
    "pitch_std",
    "pitch_range",
    "pitch_mean_song_normalized",
    "distinct_pitch_classes",
    "pitch_class_entropy",
    "interval_abs_mean",
    "interval_std",
    "stepwise_fraction",
    "repeated_pitch_fraction",
    "contour_changes_per_interval",
    "duration_mean",
    "duration_std",
    "long_note_fraction",
    "velocity_mean",
    "velocity_std",
    "polyphony_rate",
    "poly2_time_fraction",
    "poly3_time_fraction",
    "silence_fraction",
    "active_span_ratio",
    "highest_voice_fraction",
    "lowest_voice_fraction",
    "pitch_mean_minus_song_mean",
    "onset_density_std_per_bar",
    "on_beat_onset_fraction",
    "bigram_repetition_rate",
    "low_register_fraction",
)
N_FEATURES = len(FEATURE_NAMES)
assert N_FEATURES == 30

_EPS = 1e-9


@dataclass(frozen=True)
class SongContext:
    """Song-level quantities shared by every track's feature vector."""

    pitch_min: int
    pitch_max: int
    pitch_mean: float
    start: float
    end: float
    highest: dict  # track -> time holding the top sounding pitch
    lowest: dict
    sounding_time: float
    timesig: TimeSigMap

    @property
    def span(self) -> float:
        return self.end - self.start


def _segments(notes: Sequence[Note]):
    """Elementary time segments between consecutive note boundaries."""
    times = np.unique(np.concatenate([[n.onset_beats for n in notes], [n.end_beats for n in notes]]))
    return times[:-1], times[1:]


def song_context(notes_by_track: Mapping[int, Sequence[Note]], timesig: TimeSigMap | None = None) -> SongContext:
    notes = [n for ns in notes_by_track.values() for n in ns if not n.is_drum]
    if not notes:
        raise EmptyTrack("song has no pitched notes")
    pitches = np.array([n.pitch for n in notes])
    onsets = np.array([n.onset_beats for n in notes])
    ends = np.array([n.end_beats for n in notes])
    tracks = np.array([n.track for n in notes])
    lo, hi = _segments(notes)
    mids = (lo + hi) / 2
    lengths = hi - lo
    # sounding[i, j]: note j sounds during segment i
    sounding = (onsets[None, :] <= mids[:, None]) & (ends[None, :] > mids[:, None])
    any_sound = sounding.any(axis=1)
    top = np.where(sounding, pitches[None, :], -1).max(axis=1)
    bottom = np.where(sounding, pitches[None, :], 999).min(axis=1)
    highest: dict[int, float] = {}
    lowest: dict[int, float] = {}
    for t in np.unique(tracks):
        mine = sounding & (tracks[None, :] == t)
        holds_top = (mine & (pitches[None, :] == top[:, None])).any(axis=1) & any_sound
        holds_bottom = (mine & (pitches[None, :] == bottom[:, None])).any(axis=1) & any_sound
        highest[int(t)] = float(lengths[holds_top].sum())
        lowest[int(t)] = float(lengths[holds_bottom].sum())
    return SongContext(
        pitch_min=int(pitches.min()),
        pitch_max=int(pitches.max()),
        pitch_mean=float(pitches.mean()),
        start=float(onsets.min()),
        end=float(ends.max()),
        highest=highest,
        lowest=lowest,
        sounding_time=float(lengths[any_sound].sum()),
        timesig=timesig or TimeSigMap(),
    )


def _skyline(notes: Sequence[Note]) -> np.ndarray:
    """Top pitch of each distinct onset, in time order."""
    tops: dict[float, int] = {}
    for n in notes:
        if n.pitch > tops.get(n.onset_beats, -1):
            tops[n.onset_beats] = n.pitch
    return np.array([tops[t] for t in sorted(tops)], dtype=float)


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(max(0.0, -(p * np.log2(p)).sum()))


def _std(x: np.ndarray) -> float:
    return float(x.std()) if x.size else 0.0


def extract_features(track_notes: Sequence[Note], context: SongContext) -> np.ndarray:
    """The 30-value descriptor of one track, in ``FEATURE_NAMES`` order.

    Melodic-interval features (9-13, 29) run over the track's skyline: the
    highest pitch at each distinct onset.
    """
    notes = sorted((n for n in track_notes if not n.is_drum), key=lambda n: (n.onset_beats, n.pitch))
    if not notes:
        raise EmptyTrack("track has no pitched notes")
    pitches = np.array([n.pitch for n in notes], dtype=float)
    onsets = np.array([n.onset_beats for n in notes])
    ends = np.array([n.end_beats for n in notes])
    durs = np.array([n.duration_beats for n in notes])
    vels = np.array([n.velocity for n in notes], dtype=float)
    track_id = notes[0].track

    start, end = float(onsets.min()), float(ends.max())
    active = end - start

    pc_counts = np.bincount(pitches.astype(int) % 12, minlength=12).astype(float)
    song_range = context.pitch_max - context.pitch_min

    line = _skyline(notes)
    intervals = np.diff(line)
    n_int = intervals.size
    abs_int = np.abs(intervals)
    moving = np.sign(intervals[intervals != 0])
    contour_changes = float((moving[1:] != moving[:-1]).sum()) if moving.size > 1 else 0.0

    lo, hi = _segments(notes)
    mids = (lo + hi) / 2
    lengths = hi - lo
    active_count = ((onsets[None, :] <= mids[:, None]) & (ends[None, :] > mids[:, None])).sum(axis=1)
    sounding = float(lengths[active_count > 0].sum())
    poly_rate = float((lengths * active_count).sum() / sounding)
    poly2 = float(lengths[active_count >= 2].sum() / sounding)
    poly3 = float(lengths[active_count >= 3].sum() / sounding)

    bar_counts = np.array([0.0])
    ts = context.timesig
    first_bar, last_bar = ts.bar_of(context.start), ts.bar_of(max(context.end - _EPS, context.start))
    if last_bar >= first_bar:
        bar_of_onset = np.array([ts.bar_of(o) for o in onsets])
        bar_counts = np.bincount(bar_of_onset - first_bar, minlength=last_bar - first_bar + 1).astype(float)

    if line.size >= 3:
        bigrams = list(zip(line[:-1], line[1:]))
        bigram_rep = 1.0 - len(set(bigrams)) / len(bigrams)
    else:
        bigram_rep = 0.0

    song_time = context.sounding_time
    feats = [
        len(notes),
        len(notes) / active,
        pitches.mean(),
        pitches.std(),
        pitches.max() - pitches.min(),
        (pitches.mean() - context.pitch_min) / song_range if song_range > 0 else 0.5,
        np.count_nonzero(pc_counts),
        _entropy(pc_counts),
        abs_int.mean() if n_int else 0.0,
        _std(intervals),
        (abs_int <= 2).mean() if n_int else 0.0,
        (abs_int == 0).mean() if n_int else 0.0,
        contour_changes / n_int if n_int else 0.0,
        durs.mean(),
        durs.std(),
        (durs >= 1.0 - _EPS).mean(),
        vels.mean() / 127.0,
        vels.std() / 127.0,
        poly_rate,
        poly2,
        poly3,
        max(0.0, 1.0 - sounding / active),
        active / context.span if context.span > 0 else 1.0,
        context.highest.get(track_id, 0.0) / song_time if song_time > 0 else 0.0,
        context.lowest.get(track_id, 0.0) / song_time if song_time > 0 else 0.0,
        pitches.mean() - context.pitch_mean,
        bar_counts.std(),
        (np.abs(onsets - np.round(onsets)) < _EPS).mean(),
        bigram_rep,
        (pitches < 48).mean(),
    ]
    return np.array(feats, dtype=np.float64)


def track_feature_table(notes: Sequence[Note], timesig: TimeSigMap | None = None) -> dict[int, np.ndarray]:
    """Feature vectors for every track holding pitched notes."""
    by_track: dict[int, list[Note]] = {}
    for n in notes:
        if not n.is_drum:
            by_track.setdefault(n.track, []).append(n)
    if not by_track:
        return {}
    ctx = song_context(by_track, timesig)
    return {t: extract_features(ns, ctx) for t, ns in sorted(by_track.items())}
