"""Deterministic synthetic songs with stereotyped melody, bass and harmony tracks.

Used for training and testing the track classifier in the absence of a
labelled real-world corpus, and for timing runs.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .midi_io import MidiFile, Note, midi_from_notes, write_midi

MAJOR_SCALE = (0, 2, 4, 5, 7, 9, 11)
MINOR_SCALE = (0, 2, 3, 5, 7, 8, 10)
PROGRESSIONS = ((0, 4, 5, 3), (0, 5, 3, 4), (0, 3, 4, 4), (5, 3, 0, 4), (0, 3, 0, 4), (1, 4, 0, 0))

MELODY_NAMES = ("Melody", "Vocal", "Lead", "Lead Vocal")
BASS_NAMES = ("Bass", "Finger Bass", "Synth Bass", "Bass Line")
HARMONY_NAMES = ("Chords", "Pad", "Piano Comp", "Rhythm Guitar")


def _scale_pitch(tonic: int, scale, degree: int, base_octave: int) -> int:
    octave, step = divmod(degree, 7)
    return 12 * (base_octave + octave) + tonic + scale[step]


def _chord_tones(tonic, scale, root_degree, base_octave, size=3):
    return [_scale_pitch(tonic, scale, root_degree + 2 * i, base_octave) for i in range(size)]


def _melody(rng, tonic, scale, chords, beats_per_bar, n_bars, track, channel):
    notes = []
    degree = int(rng.integers(7, 12))  # around the 5th octave
    octave = 4
    t = 0.0
    end = n_bars * beats_per_bar
    durations = np.array([0.5, 0.5, 1.0, 1.0, 1.5, 0.25])
    while t < end - 1e-9:
        d = float(rng.choice(durations))
        d = min(d, end - t)
        if rng.random() < 0.1 and t > 0:
            t += d  # rest
            continue
        step = int(rng.choice([-2, -1, -1, 0, 1, 1, 2, 3, -3]))
        degree = int(np.clip(degree + step, 4, 17))
        pitch = _scale_pitch(tonic, scale, degree, octave)
        vel = int(np.clip(rng.normal(96, 8), 40, 127))
        notes.append(Note(t, d, pitch, vel, track, channel))
        t += d
    return notes


def _bass(rng, tonic, scale, chords, beats_per_bar, n_bars, track, channel):
    notes = []
    pattern = int(rng.integers(0, 3))
    for bar in range(n_bars):
        root = chords[bar % len(chords)]
        p = _scale_pitch(tonic, scale, root, 2)
        if p > 47:
            p -= 12
        b0 = bar * beats_per_bar
        vel = int(np.clip(rng.normal(88, 6), 40, 127))
        if pattern == 0:  # whole-bar roots
            notes.append(Note(b0, float(beats_per_bar), p, vel, track, channel))
        elif pattern == 1:  # quarter-note pulse with octave or fifth
            for k in range(beats_per_bar):
                q = p + (12 if k % 2 and rng.random() < 0.4 else 0)
                if k == beats_per_bar - 1 and rng.random() < 0.3:
                    q = p + 7
                notes.append(Note(b0 + k, 1.0, q, vel, track, channel))
        else:  # half notes root-fifth
            half = beats_per_bar / 2
            notes.append(Note(b0, half, p, vel, track, channel))
            notes.append(Note(b0 + half, beats_per_bar - half, p + 7, vel, track, channel))
    return notes


def _harmony(rng, tonic, scale, chords, beats_per_bar, n_bars, track, channel):
    notes = []
    style = int(rng.integers(0, 3))
    size = int(rng.integers(3, 5))
    for bar in range(n_bars):
        root = chords[bar % len(chords)]
        tones = _chord_tones(tonic, scale, root, 4, size)
        while min(tones) > 64:
            tones = [x - 12 for x in tones]
        b0 = bar * beats_per_bar
        vel = int(np.clip(rng.normal(70, 6), 30, 127))
        if style == 0:  # sustained block chord
            notes.extend(Note(b0, float(beats_per_bar), x, vel, track, channel) for x in tones)
        elif style == 1:  # chord hits every beat
            for k in range(beats_per_bar):
                notes.extend(Note(b0 + k, 0.9, x, vel, track, channel) for x in tones)
        else:  # two half-bar strums
            half = beats_per_bar / 2
            for start in (b0, b0 + half):
                notes.extend(Note(start, half, x, vel, track, channel) for x in tones)
    return notes


def _drums(rng, beats_per_bar, n_bars, track):
    notes = []
    for bar in range(n_bars):
        b0 = bar * beats_per_bar
        for k in range(beats_per_bar * 2):
            notes.append(Note(b0 + k * 0.5, 0.25, 42, 70, track, 9))
        notes.append(Note(b0, 0.5, 36, 100, track, 9))
        if beats_per_bar >= 2:
            notes.append(Note(b0 + 1, 0.5, 38, 100, track, 9))
    return notes


def generate_song(seed: int, n_bars: int | None = None, drums: bool = True) -> tuple[MidiFile, dict[int, str]]:
    """One synthetic song and its ``{track_index: role}`` labels.

    Track order is shuffled so the role cannot be read from the index.
    """
    rng = np.random.default_rng(seed)
    tonic = int(rng.integers(0, 12))
    scale = MAJOR_SCALE if rng.random() < 0.7 else MINOR_SCALE
    beats_per_bar = 3 if rng.random() < 0.15 else 4
    n_bars = n_bars or int(rng.integers(12, 33))
    chords = PROGRESSIONS[int(rng.integers(0, len(PROGRESSIONS)))]
    tempo = int(rng.integers(70, 150))

    roles = ["melody", "bass", "harmony"] + (["drums"] if drums else [])
    order = rng.permutation(len(roles))
    channels = {"melody": 0, "bass": 1, "harmony": 2, "drums": 9}
    names = {
        "melody": MELODY_NAMES[int(rng.integers(0, len(MELODY_NAMES)))],
        "bass": BASS_NAMES[int(rng.integers(0, len(BASS_NAMES)))],
        "harmony": HARMONY_NAMES[int(rng.integers(0, len(HARMONY_NAMES)))],
        "drums": "Drums",
    }
    makers = {"melody": _melody, "bass": _bass, "harmony": _harmony}
    notes: list[Note] = []
    track_names = {}
    labels = {}
    for slot, ridx in enumerate(order):
        role = roles[ridx]
        if role == "drums":
            notes.extend(_drums(rng, beats_per_bar, n_bars, slot))
        else:
            notes.extend(makers[role](rng, tonic, scale, chords, beats_per_bar, n_bars, slot, channels[role]))
            labels[slot + 1] = role  # midi_from_notes puts the conductor at index 0
        track_names[slot] = names[role]
    midi = midi_from_notes(
        notes,
        480,
        tempo_usec=int(60_000_000 / tempo),
        time_signatures=((0.0, beats_per_bar, 4),),
        track_names=track_names,
    )
    return midi, labels


def write_corpus(out_dir, n_songs: int, seed: int = 0) -> Path:
    """Write ``song_XXXX.mid`` files plus ``labels.csv``; returns the label path."""
    from .classifier import write_label_file

    out = Path(out_dir)
    os.makedirs(out, exist_ok=True)
    rows = []
    seeds = np.random.SeedSequence(seed).generate_state(n_songs)
    for i in range(n_songs):
        midi, labels = generate_song(int(seeds[i]))
        name = f"song_{i:04d}.mid"
        write_midi(midi, out / name)
        rows.extend((name, idx, role) for idx, role in sorted(labels.items()))
    label_path = out / "labels.csv"
    write_label_file(label_path, rows)
    return label_path


def long_song(seed: int = 0, minutes: float = 5.0, tempo: int = 120) -> MidiFile:
    """A song of roughly ``minutes`` length at ``tempo`` bpm in 4/4."""
    n_bars = int(round(minutes * tempo / 4))
    rng = np.random.default_rng(seed)
    tonic = int(rng.integers(0, 12))
    chords = PROGRESSIONS[0]
    notes = (
        _melody(rng, tonic, MAJOR_SCALE, chords, 4, n_bars, 0, 0)
        + _bass(rng, tonic, MAJOR_SCALE, chords, 4, n_bars, 1, 1)
        + _harmony(rng, tonic, MAJOR_SCALE, chords, 4, n_bars, 2, 2)
        + _drums(rng, 4, n_bars, 3)
    )
    return midi_from_notes(
        notes,
        480,
        tempo_usec=int(60_000_000 / tempo),
        track_names={0: "Melody", 1: "Bass", 2: "Chords", 3: "Drums"},
    )
