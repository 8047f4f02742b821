"""Fixture builders shared across test modules."""

import numpy as np

from miditonal.midi_io import Note, midi_from_notes

MAJOR = (0, 2, 4, 5, 7, 9, 11)
HARMONIC_MINOR = (0, 2, 3, 5, 7, 8, 11)


def random_notes(rng, n_tracks, n_notes, ppq=480, max_beat=200):
    """Notes on tick boundaries with no same-pitch overlap per (track, channel)."""
    busy = {}
    notes = []
    attempts = 0
    while len(notes) < n_notes and attempts < n_notes * 20:
        attempts += 1
        track = int(rng.integers(0, n_tracks))
        channel = int(rng.integers(0, 16))
        pitch = int(rng.integers(0, 128))
        on = int(rng.integers(0, max_beat * ppq))
        dur = int(rng.integers(1, 4 * ppq))
        spans = busy.setdefault((track, channel, pitch), [])
        if any(on < e and s < on + dur for s, e in spans):
            continue
        spans.append((on, on + dur))
        notes.append(Note(on / ppq, dur / ppq, pitch, int(rng.integers(1, 128)), track, channel))
    return notes


def random_midi(rng, ppq=480):
    n_tracks = int(rng.integers(1, 17))
    n_notes = int(rng.integers(0, 501))
    notes = random_notes(rng, n_tracks, n_notes, ppq)
    names = {t: f"track {t}" for t in range(n_tracks)}
    return midi_from_notes(notes, ppq, track_names=names), notes


def scale_piece(tonic, scale=MAJOR, third=4, base=60, triad_reps=2, triad_dur=2.0):
    """Ascending scale to the octave, then the tonic triad sounded ``triad_reps`` times."""
    notes = []
    beat = 0.0
    for step in list(scale) + [12]:
        notes.append(Note(beat, 1.0, base + tonic + step, 80, 0, 0))
        beat += 1.0
    for _ in range(triad_reps):
        for step in (0, third, 7):
            notes.append(Note(beat, triad_dur, base + tonic + step, 80, 0, 0))
        beat += triad_dur
    return notes


def modulating_piece(first_tonic=0, second_tonic=6, bars_each=32, step=0.5):
    """Eighth-note diatonic scale figures: first key for ``bars_each`` bars, then the second."""
    notes = []
    half = bars_each * 4.0
    n = int(2 * half / step)
    for i in range(n):
        beat = i * step
        tonic = first_tonic if beat < half else second_tonic
        notes.append(Note(beat, step, 60 + tonic + MAJOR[i % 7], 80, 0, 0))
    return notes


def transpose(notes, semitones):
    return [
        Note(n.onset_beats, n.duration_beats, n.pitch + semitones, n.velocity, n.track, n.channel)
        for n in notes
    ]


def random_piece(rng, max_notes=8, max_beat=12.0):
    """Small random piece on a 0.25-beat grid, pitches kept clear of the MIDI edges."""
    n = int(rng.integers(1, max_notes + 1))
    notes = []
    for _ in range(n):
        on = float(rng.integers(0, int(max_beat * 4))) / 4
        dur = float(rng.integers(1, 17)) / 4
        notes.append(Note(on, dur, int(rng.integers(24, 100)), int(rng.integers(1, 128)), 0, 0))
    return notes
