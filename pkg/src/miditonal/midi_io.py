"""Standard MIDI File reading and writing.

Only formats 0 and 1 with metrical (ticks-per-quarter) division are
accepted. Events keep their absolute tick and raw payload so that a file
can be written back without losing unknown meta or sysex data.
"""

from __future__ import annotations

import bisect
import math
import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import BadChunk, BadHeader, MalformedVlq, UnsupportedDivision, UnsupportedFormat

DRUM_CHANNEL = 9

META_TRACK_NAME = 0x03
META_END_OF_TRACK = 0x2F
META_TEMPO = 0x51
META_TIME_SIGNATURE = 0x58

NOTE_OFF = 0x80
NOTE_ON = 0x90
PROGRAM_CHANGE = 0xC0

# data bytes following a channel status byte, keyed by the high nibble
_CHANNEL_DATA_LEN = {0x80: 2, 0x90: 2, 0xA0: 2, 0xB0: 2, 0xC0: 1, 0xD0: 1, 0xE0: 2}

VLQ_LIMIT = 1 << 28


def read_vlq(data: bytes, offset: int = 0) -> tuple[int, int]:
    """Decode a variable-length quantity starting at ``offset``.

    Returns ``(value, bytes_consumed)``.
    """
    value = 0
    for i in range(4):
        pos = offset + i
        if pos >= len(data):
            raise MalformedVlq(f"truncated variable-length quantity at offset {offset}")
        byte = data[pos]
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, i + 1
    raise MalformedVlq(f"variable-length quantity at offset {offset} exceeds 4 bytes")


def encode_vlq(value: int) -> bytes:
    if not 0 <= value < VLQ_LIMIT:
        raise ValueError(f"value {value} outside VLQ range [0, 2**28)")
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(out))


@dataclass(frozen=True, slots=True)
class Event:
    """One timed track event.

    ``status`` is the full status byte (channel messages carry their channel
    in the low nibble; meta events use 0xFF, sysex 0xF0/0xF7). ``meta_type``
    is only set for meta events. ``data`` holds the payload bytes after the
    status (and meta type / length) bytes.
    """

    tick: int
    status: int
    data: bytes = b""
    meta_type: int | None = None

    @property
    def is_meta(self) -> bool:
        return self.status == 0xFF

    @property
    def is_channel(self) -> bool:
        return 0x80 <= self.status < 0xF0

    @property
    def kind(self) -> int:
        return self.status & 0xF0 if self.is_channel else self.status

    @property
    def channel(self) -> int:
        return self.status & 0x0F

    @property
    def is_note_on(self) -> bool:
        return self.kind == NOTE_ON and self.data[1] > 0

    @property
    def is_note_off(self) -> bool:
        return self.kind == NOTE_OFF or (self.kind == NOTE_ON and self.data[1] == 0)


def note_on(tick: int, channel: int, pitch: int, velocity: int) -> Event:
    return Event(tick, NOTE_ON | channel, bytes((pitch, velocity)))


def note_off(tick: int, channel: int, pitch: int) -> Event:
    return Event(tick, NOTE_OFF | channel, bytes((pitch, 0)))


def meta(tick: int, meta_type: int, data: bytes) -> Event:
    return Event(tick, 0xFF, bytes(data), meta_type)


def tempo_event(tick: int, usec_per_quarter: int) -> Event:
    return meta(tick, META_TEMPO, usec_per_quarter.to_bytes(3, "big"))


def time_signature_event(tick: int, numerator: int, denominator: int) -> Event:
    exponent = int(math.log2(denominator))
    return meta(tick, META_TIME_SIGNATURE, bytes((numerator, exponent, 24, 8)))


@dataclass(frozen=True)
class Track:
    index: int
    events: tuple[Event, ...] = ()
    name: bytes | None = None

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if self.name is None:
            for ev in self.events:
                if ev.is_meta and ev.meta_type == META_TRACK_NAME:
                    object.__setattr__(self, "name", ev.data)
                    break

    @property
    def name_text(self) -> str:
        return self.name.decode("latin-1") if self.name is not None else ""


@dataclass(frozen=True)
class MidiFile:
    format: int
    ppq: int
    tracks: tuple[Track, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tracks", tuple(self.tracks))
        if self.ppq <= 0:
            raise ValueError("ppq must be positive")
        if self.format not in (0, 1):
            raise UnsupportedFormat(f"format {self.format} is not supported")
        if self.format == 0 and len(self.tracks) != 1:
            raise ValueError("a format 0 file holds exactly one track")


@dataclass(frozen=True, slots=True)
class Note:
    onset_beats: float
    duration_beats: float
    pitch: int
    velocity: int
    track: int
    channel: int
    onset_tick: int = field(default=0, compare=False)
    duration_ticks: int = field(default=0, compare=False)

    @property
    def end_beats(self) -> float:
        return self.onset_beats + self.duration_beats

    @property
    def is_drum(self) -> bool:
        return self.channel == DRUM_CHANNEL


class TimeSigMap:
    """Piecewise-constant time signatures keyed by start beat."""

    def __init__(self, entries: Iterable[tuple[float, int, int]] = ()):
        merged: dict[float, tuple[int, int]] = {}
        for start, num, den in sorted(entries, key=lambda e: e[0]):
            if start < 0 or num <= 0 or den <= 0:
                raise ValueError(f"invalid time signature entry {(start, num, den)}")
            merged[float(start)] = (int(num), int(den))
        if 0.0 not in merged:
            merged[0.0] = (4, 4)
        starts = sorted(merged)
        entries_out = []
        for s in starts:
            # a repeated signature is not a change
            if entries_out and entries_out[-1][1:] == merged[s]:
                continue
            entries_out.append((s, *merged[s]))
        self.entries: tuple[tuple[float, int, int], ...] = tuple(entries_out)
        # first bar number and bar length of every span
        self._starts = [e[0] for e in self.entries]
        self._first_bar = []
        bar = 1
        for i, (start, num, den) in enumerate(self.entries):
            self._first_bar.append(bar)
            if i + 1 < len(self.entries):
                span = self.entries[i + 1][0] - start
                bar += max(1, math.ceil(span / self.bar_length(num, den) - 1e-9))

    @staticmethod
    def bar_length(numerator: int, denominator: int) -> float:
        return numerator * 4.0 / denominator

    def __eq__(self, other):
        return isinstance(other, TimeSigMap) and self.entries == other.entries

    def __repr__(self):
        return f"TimeSigMap({list(self.entries)!r})"

    def bar_of(self, beat: float) -> int:
        if beat < 0:
            raise ValueError("beat must be non-negative")
        i = bisect.bisect_right(self._starts, beat) - 1
        start, num, den = self.entries[i]
        offset = math.floor((beat - start) / self.bar_length(num, den) + 1e-9)
        return self._first_bar[i] + offset

    def bar_start(self, bar: int) -> float:
        i = bisect.bisect_right(self._first_bar, bar) - 1
        start, num, den = self.entries[max(i, 0)]
        return start + (bar - self._first_bar[max(i, 0)]) * self.bar_length(num, den)

    def bar_count(self, end_beat: float) -> int:
        """Number of bars needed to cover ``[0, end_beat)``."""
        if end_beat <= 0:
            return 0
        bar = self.bar_of(end_beat)
        if self.bar_start(bar) >= end_beat - 1e-9:
            bar -= 1
        return bar


def bar_of(beat: float, timesig: TimeSigMap) -> int:
    return timesig.bar_of(beat)


@dataclass
class Diagnostics:
    dangling_note_offs: int = 0
    unterminated_notes: int = 0
    zero_length_notes: int = 0
    drum_notes: int = 0

    def as_dict(self) -> dict:
        return {
            "dangling_note_offs": self.dangling_note_offs,
            "unterminated_notes": self.unterminated_notes,
            "zero_length_notes": self.zero_length_notes,
            "drum_notes": self.drum_notes,
        }


# ---------------------------------------------------------------- parsing


def parse_smf(data: bytes) -> MidiFile:
    data = bytes(data)
    if len(data) < 14 or data[:4] != b"MThd":
        raise BadHeader("missing or short 'MThd' chunk")
    header_len = struct.unpack(">I", data[4:8])[0]
    if header_len < 6 or 8 + header_len > len(data):
        raise BadHeader(f"header length {header_len} is invalid")
    fmt, ntracks, division = struct.unpack(">HHH", data[8:14])
    if division & 0x8000:
        raise UnsupportedDivision("SMPTE time division is not supported")
    if division == 0:
        raise BadHeader("ticks-per-quarter division of zero")
    if fmt == 2:
        raise UnsupportedFormat("format 2 files are not supported")
    if fmt not in (0, 1):
        raise UnsupportedFormat(f"unknown SMF format {fmt}")

    pos = 8 + header_len
    tracks = []
    while pos < len(data):
        if pos + 8 > len(data):
            # trailing garbage shorter than a chunk header
            break
        chunk_id = data[pos : pos + 4]
        length = struct.unpack(">I", data[pos + 4 : pos + 8])[0]
        body_start = pos + 8
        if body_start + length > len(data):
            raise BadChunk(f"chunk at offset {pos} overruns the buffer")
        if chunk_id == b"MTrk":
            events = _parse_track_events(data[body_start : body_start + length], body_start)
            tracks.append(Track(len(tracks), events))
        pos = body_start + length

    if not tracks:
        raise BadChunk("file contains no track chunks")
    if fmt == 0 and len(tracks) > 1:
        fmt = 1
    return MidiFile(fmt, division, tracks)


def _parse_track_events(chunk: bytes, base: int) -> list[Event]:
    events = []
    pos = 0
    tick = 0
    running = None
    end = len(chunk)
    while pos < end:
        delta, used = read_vlq(chunk, pos)
        pos += used
        tick += delta
        if pos >= end:
            raise BadChunk(f"event at offset {base + pos} truncated")
        status = chunk[pos]
        if status == 0xFF:
            if pos + 2 > end:
                raise BadChunk(f"meta event at offset {base + pos} truncated")
            meta_type = chunk[pos + 1]
            length, used = read_vlq(chunk, pos + 2)
            start = pos + 2 + used
            if start + length > end:
                raise BadChunk(f"meta event at offset {base + pos} overruns its track")
            events.append(Event(tick, 0xFF, chunk[start : start + length], meta_type))
            pos = start + length
            if meta_type == META_END_OF_TRACK:
                break
            continue
        if status in (0xF0, 0xF7):
            length, used = read_vlq(chunk, pos + 1)
            start = pos + 1 + used
            if start + length > end:
                raise BadChunk(f"sysex event at offset {base + pos} overruns its track")
            events.append(Event(tick, status, chunk[start : start + length]))
            pos = start + length
            running = None
            continue
        if status & 0x80:
            if status > 0xF0:
                raise BadChunk(f"system real-time/common status {status:#04x} inside a track")
            running = status
            pos += 1
        elif running is None:
            raise BadChunk(f"running status without a prior status at offset {base + pos}")
        n = _CHANNEL_DATA_LEN[running & 0xF0]
        if pos + n > end:
            raise BadChunk(f"channel event at offset {base + pos} truncated")
        payload = chunk[pos : pos + n]
        if any(b & 0x80 for b in payload):
            raise BadChunk(f"data byte with high bit set at offset {base + pos}")
        events.append(Event(tick, running, payload))
        pos += n
    return events


def read_midi(path) -> MidiFile:
    with open(path, "rb") as fh:
        return parse_smf(fh.read())


# ---------------------------------------------------------------- writing


def _encode_event(ev: Event) -> bytes:
    if ev.is_meta:
        return bytes((0xFF, ev.meta_type)) + encode_vlq(len(ev.data)) + ev.data
    if ev.status in (0xF0, 0xF7):
        return bytes((ev.status,)) + encode_vlq(len(ev.data)) + ev.data
    return bytes((ev.status,)) + ev.data


def _encode_track(track: Track) -> bytes:
    body = bytearray()
    last = 0
    end_tick = 0
    for ev in track.events:
        if ev.is_meta and ev.meta_type == META_END_OF_TRACK:
            end_tick = max(end_tick, ev.tick)
            continue
        if ev.tick < last:
            raise ValueError(f"track {track.index} events are not sorted by tick")
        body += encode_vlq(ev.tick - last)
        body += _encode_event(ev)
        last = ev.tick
    body += encode_vlq(max(end_tick, last) - last) + b"\xff\x2f\x00"
    return b"MTrk" + struct.pack(">I", len(body)) + bytes(body)


def write_smf(midi: MidiFile) -> bytes:
    """Serialise to a format 1 file (running status is not used)."""
    header = b"MThd" + struct.pack(">IHHH", 6, 1, len(midi.tracks), midi.ppq)
    return header + b"".join(_encode_track(t) for t in midi.tracks)


def write_midi(midi: MidiFile, path) -> None:
    with open(path, "wb") as fh:
        fh.write(write_smf(midi))


# ---------------------------------------------------------------- notes


def build_note_list(
    midi: MidiFile, diagnostics: Diagnostics | None = None
) -> tuple[list[Note], TimeSigMap]:
    """Pair note-on/off events into beat-domain notes.

    Pairing is FIFO per (track, channel, pitch). Notes still sounding at the
    end of their track close at its final event tick.
    """
    diag = diagnostics if diagnostics is not None else Diagnostics()
    ppq = midi.ppq
    notes: list[Note] = []
    timesigs = []
    for track in midi.tracks:
        pending: dict[tuple[int, int], list[tuple[int, int]]] = {}
        last_tick = 0
        for ev in track.events:
            last_tick = max(last_tick, ev.tick)
            if ev.is_meta:
                if ev.meta_type == META_TIME_SIGNATURE and len(ev.data) >= 2:
                    timesigs.append((ev.tick / ppq, ev.data[0], 2 ** ev.data[1]))
                continue
            if not ev.is_channel:
                continue
            if ev.is_note_on:
                pending.setdefault((ev.channel, ev.data[0]), []).append((ev.tick, ev.data[1]))
            elif ev.is_note_off:
                queue = pending.get((ev.channel, ev.data[0]))
                if not queue:
                    diag.dangling_note_offs += 1
                    continue
                start, velocity = queue.pop(0)
                _emit(notes, diag, track.index, ev.channel, ev.data[0], velocity, start, ev.tick, ppq)
        for (channel, pitch), queue in pending.items():
            for start, velocity in queue:
                diag.unterminated_notes += 1
                _emit(notes, diag, track.index, channel, pitch, velocity, start, last_tick, ppq)
    notes.sort(key=lambda n: (n.onset_beats, n.track, n.pitch, n.channel, n.duration_beats, n.velocity))
    valid = [ts for ts in timesigs if ts[1] > 0 and ts[2] > 0]
    return notes, TimeSigMap(valid)


def _emit(notes, diag, track, channel, pitch, velocity, start, stop, ppq):
    if stop <= start:
        diag.zero_length_notes += 1
        return
    notes.append(
        Note(start / ppq, (stop - start) / ppq, pitch, velocity, track, channel, start, stop - start)
    )


def tempo_map(midi: MidiFile) -> list[tuple[int, int]]:
    """(tick, microseconds per quarter) pairs across all tracks, by tick."""
    out = []
    for track in midi.tracks:
        for ev in track.events:
            if ev.is_meta and ev.meta_type == META_TEMPO and len(ev.data) == 3:
                out.append((ev.tick, int.from_bytes(ev.data, "big")))
    return sorted(out)


def midi_from_notes(
    notes: Sequence[Note],
    ppq: int = 480,
    *,
    tempo_usec: int = 500_000,
    time_signatures: Sequence[tuple[float, int, int]] = ((0.0, 4, 4),),
    track_names: dict[int, str] | None = None,
    programs: dict[int, int] | None = None,
) -> MidiFile:
    """Build a format 1 file: a conductor track followed by one track per note track id.

    Note times are quantised to ticks via ``round(beats * ppq)``; note
    ``track`` ids are remapped so that track ``t`` lands in output track
    ``t + 1``.
    """
    conductor = [tempo_event(0, tempo_usec)]
    for start, num, den in time_signatures:
        conductor.append(time_signature_event(round(start * ppq), num, den))
    conductor.sort(key=lambda e: e.tick)
    track_names = track_names or {}
    programs = programs or {}
    n_tracks = max([n.track for n in notes] + list(track_names) + [-1]) + 1
    tracks = [Track(0, conductor)]
    for t in range(n_tracks):
        evs: list[tuple[int, int, Event]] = []
        if t in track_names:
            evs.append((0, -1, meta(0, META_TRACK_NAME, track_names[t].encode("latin-1"))))
        if t in programs:
            chans = sorted({n.channel for n in notes if n.track == t}) or [0]
            for ch in chans:
                evs.append((0, -1, Event(0, PROGRAM_CHANGE | ch, bytes((programs[t],)))))
        for n in notes:
            if n.track != t:
                continue
            on = round(n.onset_beats * ppq)
            off = round(n.end_beats * ppq)
            evs.append((on, 1, note_on(on, n.channel, n.pitch, n.velocity)))
            evs.append((off, 0, note_off(off, n.channel, n.pitch)))
        # offs before ons at equal ticks keep back-to-back notes separate
        evs.sort(key=lambda e: (e[0], e[1]))
        tracks.append(Track(t + 1, [e[2] for e in evs]))
    return MidiFile(1, ppq, tracks)
