"""Key-index estimation, pitch spelling and spiral-array key finding."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import EmptyCloud, NoNotes
from .midi_io import Note
from .spiral import DEFAULT_PARAMS, KeyId, Mode, SpiralParams, key_center, pitch_positions


class Spelling(str, Enum):
    SHARPS = "sharps"
    FLATS = "flats"


NATURAL_FIFTHS = {0: 0, 7: 1, 2: 2, 9: 3, 4: 4, 11: 5, 5: -1}
SHARP_FIFTHS = {**NATURAL_FIFTHS, 1: 7, 3: 9, 6: 6, 8: 8, 10: 10}
FLAT_FIFTHS = {**NATURAL_FIFTHS, 1: -5, 3: -3, 6: -6, 8: -4, 10: -2}

_SHARP_KEY_INDICES = frozenset({0, 2, 4, 7, 9, 11})


@dataclass(frozen=True, slots=True)
class SpelledNote:
    note: Note
    fifth_index: int

    # delegate the Note fields so a SpelledNote reads like a Note
    @property
    def onset_beats(self) -> float:
        return self.note.onset_beats

    @property
    def duration_beats(self) -> float:
        return self.note.duration_beats

    @property
    def end_beats(self) -> float:
        return self.note.end_beats

    @property
    def pitch(self) -> int:
        return self.note.pitch

    @property
    def velocity(self) -> int:
        return self.note.velocity

    @property
    def track(self) -> int:
        return self.note.track

    @property
    def channel(self) -> int:
        return self.note.channel


@dataclass(frozen=True)
class KeyEstimate:
    key: KeyId
    confidence: float
    distances: tuple[tuple[KeyId, float], ...] = ()

    def as_dict(self) -> dict:
        return {
            "tonic_name": self.key.tonic_name,
            "mode": self.key.mode.value,
            "confidence": self.confidence,
            "fifth_index": self.key.fifth_index,
        }


def tonal_notes(notes: Sequence[Note]) -> list[Note]:
    return [n for n in notes if not n.is_drum]


def estimate_key_index(notes: Sequence[Note]) -> int:
    """Most frequent pitch class by onset count.

    Ties go to the larger total duration, then to the lower pitch class.
    """
    notes = tonal_notes(notes)
    if not notes:
        raise NoNotes("no pitched notes to analyse")
    counts = Counter()
    durations = defaultdict(float)
    for n in notes:
        pc = n.pitch % 12
        counts[pc] += 1
        durations[pc] += n.duration_beats
    return min(counts, key=lambda pc: (-counts[pc], -durations[pc], pc))


def spelling_class(key_index: int) -> Spelling:
    if not 0 <= key_index < 12:
        raise ValueError("key index must be a pitch class 0-11")
    return Spelling.SHARPS if key_index in _SHARP_KEY_INDICES else Spelling.FLATS


def spell_pitch_class(pc: int, spelling: Spelling | str) -> int:
    table = SHARP_FIFTHS if Spelling(spelling) is Spelling.SHARPS else FLAT_FIFTHS
    return table[pc % 12]


def spell_notes(notes: Sequence[Note], spelling: Spelling | str) -> list[SpelledNote]:
    spelling = Spelling(spelling)
    return [SpelledNote(n, spell_pitch_class(n.pitch, spelling)) for n in tonal_notes(notes)]


def candidate_keys(spelling: Spelling | str) -> list[KeyId]:
    """The 24 major/minor keys with tonics spelled in the given class."""
    out = []
    for mode in (Mode.MAJOR, Mode.MINOR):
        for pc in range(12):
            out.append(KeyId(spell_pitch_class(pc, spelling), mode))
    return out


def spelling_of(spelled: Sequence[SpelledNote]) -> Spelling:
    """Recover the spelling class used for ``spelled`` (sharps if undecidable)."""
    for s in spelled:
        pc = s.pitch % 12
        if pc not in NATURAL_FIFTHS:
            return Spelling.SHARPS if s.fifth_index == SHARP_FIFTHS[pc] else Spelling.FLATS
    return Spelling.SHARPS


def weighted_center(spelled: Sequence[SpelledNote], params: SpiralParams = DEFAULT_PARAMS) -> np.ndarray:
    if not spelled:
        raise EmptyCloud("no notes to weigh")
    ks = np.array([s.fifth_index for s in spelled])
    w = np.array([s.duration_beats for s in spelled])
    return (w @ pitch_positions(ks, params)) / w.sum()


def nearest_key(
    center: np.ndarray,
    spelling: Spelling | str,
    params: SpiralParams = DEFAULT_PARAMS,
) -> KeyEstimate:
    ranked = []
    for key in candidate_keys(spelling):
        d = float(np.linalg.norm(center - key_center(key, params)))
        ranked.append((d, key.mode is not Mode.MAJOR, abs(key.fifth_index), key))
    ranked.sort(key=lambda r: r[:3])
    best = ranked[0]
    confidence = ranked[1][0] - best[0]
    return KeyEstimate(best[3], confidence, tuple((r[3], r[0]) for r in ranked))


def detect_key(
    spelled: Sequence[SpelledNote],
    params: SpiralParams = DEFAULT_PARAMS,
    spelling: Spelling | str | None = None,
) -> KeyEstimate:
    """Nearest of the 24 keys to the duration-weighted center of effect."""
    spelled = [s for s in spelled if s.channel != 9]
    if not spelled:
        raise EmptyCloud("cannot detect a key without notes")
    if spelling is None:
        spelling = spelling_of(spelled)
    return nearest_key(weighted_center(spelled, params), spelling, params)


def analyse_key(notes: Sequence[Note], params: SpiralParams = DEFAULT_PARAMS):
    """Full pass: key index, spelling class, spelled notes, key estimate."""
    key_index = estimate_key_index(notes)
    spelling = spelling_class(key_index)
    spelled = spell_notes(notes, spelling)
    return spelled, spelling, detect_key(spelled, params, spelling)
