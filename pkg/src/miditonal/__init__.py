"""Tonal tension, key finding and track-role classification for MIDI files."""

__version__ = "0.1.0"

from .midi_io import MidiFile, Note, TimeSigMap, build_note_list, parse_smf, read_midi, write_smf
from .spiral import KeyId, Mode, SpiralParams
from .tension import TensionSeries, compute_tension, detect_key_changes
from .tonal import KeyEstimate, analyse_key, detect_key

__all__ = [
    "KeyEstimate",
    "KeyId",
    "MidiFile",
    "Mode",
    "Note",
    "SpiralParams",
    "TensionSeries",
    "TimeSigMap",
    "analyse_key",
    "build_note_list",
    "compute_tension",
    "detect_key",
    "detect_key_changes",
    "parse_smf",
    "read_midi",
    "write_smf",
]
