import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_midi
from miditonal.errors import BadChunk, BadHeader, MalformedVlq, MidiError, UnsupportedDivision, UnsupportedFormat
from miditonal.midi_io import (
    Diagnostics,
    Event,
    MidiFile,
    Note,
    TimeSigMap,
    Track,
    bar_of,
    build_note_list,
    encode_vlq,
    meta,
    midi_from_notes,
    note_off,
    note_on,
    parse_smf,
    read_vlq,
    tempo_event,
    tempo_map,
    time_signature_event,
    write_smf,
)


def smf(fmt, ppq, *track_bodies):
    out = b"MThd" + struct.pack(">IHHH", 6, fmt, len(track_bodies), ppq)
    for body in track_bodies:
        out += b"MTrk" + struct.pack(">I", len(body)) + body
    return out


EOT = b"\x00\xff\x2f\x00"


def _body(track):
    return [ev for ev in track.events if not (ev.is_meta and ev.meta_type == 0x2F)]


class TestVlq:
    @pytest.mark.parametrize(
        "raw, expected",
        [
            (b"\x00", (0, 1)),
            (b"\x81\x00", (128, 2)),
            (b"\xff\xff\xff\x7f", (268435455, 4)),
            (b"\x7f", (127, 1)),
            (b"\xc0\x00", (8192, 2)),
        ],
    )
    def test_known_values(self, raw, expected):
        assert read_vlq(raw, 0) == expected

    def test_offset(self):
        assert read_vlq(b"\x00\x00\x81\x00", 2) == (128, 2)

    def test_five_byte_quantity_rejected(self):
        with pytest.raises(MalformedVlq):
            read_vlq(b"\xff\xff\xff\xff\x7f", 0)

    def test_truncated(self):
        with pytest.raises(MalformedVlq):
            read_vlq(b"\x81", 0)

    @given(st.integers(min_value=0, max_value=(1 << 28) - 1))
    def test_bijection(self, v):
        raw = encode_vlq(v)
        assert read_vlq(raw, 0) == (v, len(raw))

    def test_encode_out_of_range(self):
        with pytest.raises(ValueError):
            encode_vlq(1 << 28)


class TestParse:
    def test_minimal_file(self):
        midi = parse_smf(smf(0, 480, EOT))
        assert midi.format == 0 and midi.ppq == 480 and len(midi.tracks) == 1
        notes, ts = build_note_list(midi)
        assert notes == []
        assert ts.entries == ((0.0, 4, 4),)

    def test_velocity_zero_is_note_off(self):
        body = b"\x00\x90\x3c\x40" + b"\x83\x60\x90\x3c\x00" + EOT
        notes, _ = build_note_list(parse_smf(smf(0, 480, body)))
        assert len(notes) == 1
        assert notes[0].pitch == 60 and notes[0].onset_beats == 0.0 and notes[0].duration_beats == 1.0

    def test_running_status(self):
        # note-on C, then E via running status, then both off via running status (vel 0)
        body = b"\x00\x90\x3c\x40\x00\x40\x40\x83\x60\x3c\x00\x00\x40\x00" + EOT
        notes, _ = build_note_list(parse_smf(smf(0, 480, body)))
        assert [(n.pitch, n.duration_beats) for n in notes] == [(60, 1.0), (64, 1.0)]

    def test_track_name_and_unknown_meta_preserved(self):
        body = b"\x00\xff\x03\x05Piano" + b"\x00\xff\x7f\x03abc" + b"\x00\xf0\x02\x01\xf7" + EOT
        midi = parse_smf(smf(1, 96, body))
        track = midi.tracks[0]
        assert track.name == b"Piano"
        assert Event(0, 0xFF, b"abc", 0x7F) in track.events
        assert Event(0, 0xF0, b"\x01\xf7") in track.events
        assert parse_smf(write_smf(midi)).tracks[0].events == track.events

    def test_bad_header(self):
        with pytest.raises(BadHeader):
            parse_smf(b"RIFF....")
        with pytest.raises(BadHeader):
            parse_smf(b"MThd\x00\x00")

    def test_chunk_overrun(self):
        raw = smf(0, 480, EOT)
        raw = raw[:-8] + b"MTrk" + struct.pack(">I", 100) + EOT
        with pytest.raises(BadChunk):
            parse_smf(raw)

    def test_smpte_rejected(self):
        with pytest.raises(UnsupportedDivision):
            parse_smf(smf(0, 0xE728, EOT))

    def test_format_2_rejected(self):
        with pytest.raises(UnsupportedFormat):
            parse_smf(smf(2, 480, EOT))

    def test_running_status_without_status(self):
        with pytest.raises(BadChunk):
            parse_smf(smf(0, 480, b"\x00\x3c\x40" + EOT))

    @settings(max_examples=300, deadline=None)
    @given(st.binary(max_size=200))
    def test_fuzz_never_crashes(self, junk):
        raw = smf(1, 480, junk)
        try:
            parse_smf(raw)
        except MidiError:
            pass

    @settings(max_examples=200, deadline=None)
    @given(st.data())
    def test_fuzz_mutated_valid_file(self, data):
        rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
        raw = bytearray(write_smf(midi_from_notes([Note(0, 1, 60, 90, 0, 0), Note(1, 2, 64, 90, 1, 3)])))
        for _ in range(data.draw(st.integers(1, 8))):
            raw[int(rng.integers(0, len(raw)))] = int(rng.integers(0, 256))
        cut = data.draw(st.integers(0, len(raw)))
        try:
            parse_smf(bytes(raw[:cut]))
        except MidiError:
            pass


class TestNotes:
    def test_ppq_definition(self):
        midi = MidiFile(1, 480, [Track(0, [note_on(0, 0, 60, 90), note_off(480, 0, 60)])])
        (n,), _ = build_note_list(midi)
        assert (n.onset_beats, n.duration_beats) == (0.0, 1.0)

    def test_fifo_pairing(self):
        evs = [note_on(0, 0, 60, 90), note_on(240, 0, 60, 80), note_off(480, 0, 60), note_off(960, 0, 60)]
        notes, _ = build_note_list(MidiFile(1, 480, [Track(0, evs)]))
        assert [(n.onset_beats, n.duration_beats, n.velocity) for n in notes] == [(0.0, 1.0, 90), (0.5, 1.5, 80)]

    def test_dangling_and_unterminated_counted(self):
        evs = [note_off(0, 0, 50), note_on(0, 0, 60, 90), meta(960, 0x01, b"x")]
        diag = Diagnostics()
        notes, _ = build_note_list(MidiFile(1, 480, [Track(0, evs)]), diag)
        assert diag.dangling_note_offs == 1 and diag.unterminated_notes == 1
        assert notes[0].duration_beats == 2.0

    def test_sort_order(self):
        evs0 = [note_on(0, 0, 64, 90), note_off(480, 0, 64)]
        evs1 = [note_on(0, 1, 60, 90), note_off(480, 1, 60), note_on(0, 1, 48, 90), note_off(240, 1, 48)]
        notes, _ = build_note_list(MidiFile(1, 480, [Track(0, evs0), Track(1, evs1)]))
        assert [(n.track, n.pitch) for n in notes] == [(0, 64), (1, 48), (1, 60)]

    def test_time_signature_map(self):
        evs = [time_signature_event(0, 3, 4), time_signature_event(480 * 6, 6, 8)]
        _, ts = build_note_list(MidiFile(1, 480, [Track(0, evs)]))
        assert ts.entries == ((0.0, 3, 4), (6.0, 6, 8))

    def test_tempo_map(self):
        midi = MidiFile(1, 480, [Track(0, [tempo_event(0, 500000), tempo_event(960, 400000)])])
        assert tempo_map(midi) == [(0, 500000), (960, 400000)]
        assert tempo_map(parse_smf(write_smf(midi))) == tempo_map(midi)


class TestBars:
    def test_examples(self):
        four = TimeSigMap()
        assert bar_of(0.0, four) == 1
        assert bar_of(4.0, four) == 2
        assert bar_of(3.999, four) == 1
        # 3-beat bars: [0,3) bar 1, [3,6) bar 2, [6,9) bar 3
        assert bar_of(7.0, TimeSigMap([(0, 3, 4)])) == 3

    def test_signature_change(self):
        ts = TimeSigMap([(0, 4, 4), (8, 3, 4)])
        assert [ts.bar_of(b) for b in (0, 4, 7.5, 8, 10.9, 11)] == [1, 2, 2, 3, 3, 4]
        assert ts.bar_start(3) == 8 and ts.bar_start(4) == 11

    def test_eighth_note_denominator(self):
        ts = TimeSigMap([(0, 6, 8)])
        assert ts.bar_of(2.9) == 1 and ts.bar_of(3.0) == 2

    def test_bar_count(self):
        ts = TimeSigMap()
        assert ts.bar_count(0) == 0
        assert ts.bar_count(4.0) == 1
        assert ts.bar_count(4.5) == 2
        assert ts.bar_count(256.0) == 64

    @given(
        st.lists(st.tuples(st.integers(1, 60), st.integers(1, 7), st.sampled_from([2, 4, 8])), max_size=4),
        st.lists(st.floats(0, 300, allow_nan=False), min_size=2, max_size=20),
    )
    def test_monotone(self, changes, beats):
        entries = []
        start = 0.0
        for gap, num, den in changes:
            start += gap
            entries.append((start, num, den))
        ts = TimeSigMap([(0.0, 4, 4)] + entries)
        beats = sorted(beats)
        bars = [ts.bar_of(b) for b in beats]
        assert bars == sorted(bars)
        assert bars[0] >= 1


class TestWrite:
    def test_empty_file(self):
        midi = MidiFile(1, 480, [Track(0, [])])
        back = parse_smf(write_smf(midi))
        assert back.format == 1 and back.ppq == 480 and len(back.tracks) == 1

    def test_single_note(self):
        midi = midi_from_notes([Note(0.0, 1.0, 60, 100, 0, 0)])
        notes, _ = build_note_list(parse_smf(write_smf(midi)))
        assert notes == [Note(0.0, 1.0, 60, 100, 1, 0)]

    def test_header_is_format_1_with_original_ppq(self):
        raw = write_smf(MidiFile(0, 96, [Track(0, [note_on(0, 0, 60, 1), note_off(96, 0, 60)])]))
        assert raw[:14] == b"MThd" + struct.pack(">IHHH", 6, 1, 1, 96)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        midi, _ = random_midi(rng)
        back = parse_smf(write_smf(midi))
        assert build_note_list(back) == build_note_list(midi)
        assert tempo_map(back) == tempo_map(midi)
        assert [_body(t) for t in back.tracks] == [_body(t) for t in midi.tracks]
