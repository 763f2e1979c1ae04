import numpy as np
import pytest

from pdaugment.errors import (
    InsufficientNotesError,
    MidiParseError,
    ValidationError,
)
from pdaugment.midi import (
    NoteEvent,
    NoteSequence,
    TempoMap,
    load_melody,
    parse_midi,
    extract_melody,
    sample_note_window,
)

from conftest import midi_bytes, vlq


def melody(data: bytes) -> NoteSequence:
    tempo_map, tracks = parse_midi(data)
    return extract_melody(tracks, tempo_map)


def test_single_note_default_tempo():
    # 480 ticks at 500000 us / 480 tpq = 0.5 s
    seq = melody(midi_bytes([(60, 0, 480)]))
    assert len(seq) == 1
    n = seq.notes[0]
    assert n.pitch == 60
    assert n.onset_s == pytest.approx(0.0, abs=1e-9)
    assert n.duration_s == pytest.approx(0.5, abs=1e-6)


def test_tempo_change_mid_note():
    # note on at tick 240, off at 720; tempo doubles at tick 480.
    # onset: 240 * (500000/480) us = 0.25 s
    # offset: 480 ticks at tempo 1 (0.5 s) + 240 at tempo 2 (0.5 s) = 1.0 s
    data = midi_bytes([(64, 240, 480)],
                      tempos=((0, 500000), (480, 1000000)))
    seq = melody(data)
    n = seq.notes[0]
    assert n.onset_s == pytest.approx(0.25, abs=1e-6)
    assert n.duration_s == pytest.approx(0.75, abs=1e-6)


def test_tick_to_seconds_piecewise_integration():
    tm = TempoMap(480, [(0, 500000), (480, 1000000), (960, 250000)])
    assert tm.tick_to_seconds(0) == pytest.approx(0.0, abs=1e-9)
    assert tm.tick_to_seconds(240) == pytest.approx(0.25, abs=1e-6)
    assert tm.tick_to_seconds(480) == pytest.approx(0.5, abs=1e-6)
    assert tm.tick_to_seconds(960) == pytest.approx(1.5, abs=1e-6)
    # 120 ticks past the last change at 250000 us/q: 120*250000e-6/480
    assert tm.tick_to_seconds(1080) == pytest.approx(1.5625, abs=1e-6)


def test_running_status_and_velocity_zero_note_off():
    # one explicit status byte, then data-only events; offs are
    # velocity-0 note-ons under the same running status.
    body = (vlq(0) + bytes([0x90, 60, 64])
            + vlq(480) + bytes([60, 0])
            + vlq(0) + bytes([62, 64])
            + vlq(480) + bytes([62, 0])
            + vlq(0) + b"\xff\x2f\x00")
    header = (b"MThd" + (6).to_bytes(4, "big") + (0).to_bytes(2, "big")
              + (1).to_bytes(2, "big") + (480).to_bytes(2, "big"))
    data = header + b"MTrk" + len(body).to_bytes(4, "big") + body
    seq = melody(data)
    assert [(n.pitch, round(n.onset_s, 6), round(n.duration_s, 6))
            for n in seq.notes] == [(60, 0.0, 0.5), (62, 0.5, 0.5)]


def test_polyphony_keeps_higher_pitch():
    # 60 spans ticks 0-960; 67 overlaps from 480: 60 is cut at 480.
    seq = melody(midi_bytes([(60, 0, 960), (67, 480, 480)]))
    assert [(n.pitch, round(n.onset_s, 6), round(n.duration_s, 6))
            for n in seq.notes] == [(60, 0.0, 0.5), (67, 0.5, 0.5)]


def test_polyphony_lower_overlapping_note_dropped():
    # 55 starts inside 64's span and is lower: it never surfaces.
    seq = melody(midi_bytes([(64, 0, 960), (55, 240, 240)]))
    assert [(n.pitch, round(n.onset_s, 6), round(n.duration_s, 6))
            for n in seq.notes] == [(64, 0.0, 1.0)]


def test_percussion_channel_ignored():
    tempo_map, tracks = parse_midi(midi_bytes([(35, 0, 480)], channel=9))
    from pdaugment.errors import EmptyScoreError
    with pytest.raises(EmptyScoreError):
        extract_melody(tracks, tempo_map)


def test_smpte_division_rejected():
    data = bytearray(midi_bytes([(60, 0, 480)]))
    data[12] = 0xE8  # negative high byte marks SMPTE time division
    with pytest.raises(MidiParseError):
        parse_midi(bytes(data))


def test_unsupported_format_rejected():
    data = bytearray(midi_bytes([(60, 0, 480)]))
    data[9] = 3
    with pytest.raises(MidiParseError):
        parse_midi(bytes(data))


def test_truncated_file_rejected():
    data = midi_bytes([(60, 0, 480)])
    with pytest.raises(MidiParseError):
        parse_midi(data[: len(data) - 6])


def test_missing_header_rejected():
    with pytest.raises(MidiParseError):
        parse_midi(b"RIFFxxxx")


def test_unterminated_note_is_flagged_truncated():
    # note-on with no matching off before end of track
    body = vlq(0) + bytes([0x90, 60, 64]) + vlq(480) + b"\xff\x2f\x00"
    header = (b"MThd" + (6).to_bytes(4, "big") + (0).to_bytes(2, "big")
              + (1).to_bytes(2, "big") + (480).to_bytes(2, "big"))
    _, tracks = parse_midi(header + b"MTrk" + len(body).to_bytes(4, "big") + body)
    notes = [n for t in tracks for n in t]
    assert len(notes) == 1 and notes[0].truncated


def test_load_melody_from_file(tmp_path):
    p = tmp_path / "m.mid"
    p.write_bytes(midi_bytes([(60, 0, 480), (62, 480, 480)]))
    seq = load_melody(p)
    assert [n.pitch for n in seq.notes] == [60, 62]
    assert seq.source_id == "m.mid"


def test_note_sequence_validation():
    with pytest.raises(ValidationError):
        NoteSequence([NoteEvent(200, 0.0, 1.0)])
    with pytest.raises(ValidationError):
        NoteSequence([NoteEvent(60, 0.0, 0.0)])
    with pytest.raises(ValidationError):
        NoteSequence([NoteEvent(60, 1.0, 0.5), NoteEvent(62, 0.0, 0.5)])


def test_sample_note_window_re_zeroes_and_is_deterministic():
    seq = NoteSequence([NoteEvent(60 + i, 0.5 * i, 0.5) for i in range(8)])
    rng = np.random.default_rng(7)
    w = sample_note_window(seq, 3, rng)
    assert len(w) == 3
    assert w.notes[0].onset_s == pytest.approx(0.0, abs=1e-12)
    # consecutive pitches from the source
    base = w.notes[0].pitch
    assert [n.pitch for n in w.notes] == [base, base + 1, base + 2]
    again = sample_note_window(seq, 3, np.random.default_rng(7))
    assert again.notes == w.notes


def test_sample_note_window_too_few_notes():
    seq = NoteSequence([NoteEvent(60, 0.0, 0.5)])
    with pytest.raises(InsufficientNotesError):
        sample_note_window(seq, 2, np.random.default_rng(0))
