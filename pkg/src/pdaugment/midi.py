"""Standard MIDI File parsing and melody extraction.

Implements enough of SMF formats 0 and 1 to recover tempo-resolved note
sequences: header/track chunks, variable-length deltas, running status,
note-on/note-off pairing, and Set Tempo meta events. Channel 10 (index 9)
is percussion and never contributes melody notes.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    EmptyScoreError,
    InsufficientNotesError,
    MidiParseError,
    ValidationError,
)

DEFAULT_US_PER_QUARTER = 500000
PERCUSSION_CHANNEL = 9

_META = 0xFF
_META_SET_TEMPO = 0x51
_META_END_OF_TRACK = 0x2F


@dataclass(frozen=True)
class NoteEvent:
    """One melodic note in seconds, pitch as a MIDI note number."""

    pitch: int
    onset_s: float
    duration_s: float
    velocity: int = 64


@dataclass
class NoteSequence:
    notes: list[NoteEvent]
    source_id: str = ""

    def __post_init__(self):
        prev_onset = -np.inf
        for n in self.notes:
            if not 0 <= n.pitch <= 127:
                raise ValidationError(f"pitch {n.pitch} outside 0..127")
            if n.duration_s <= 0:
                raise ValidationError(f"note at {n.onset_s:.6f}s has non-positive duration")
            if n.onset_s < prev_onset:
                raise ValidationError("note onsets must be non-decreasing")
            prev_onset = n.onset_s

    def __len__(self) -> int:
        return len(self.notes)

    @property
    def total_duration_s(self) -> float:
        return sum(n.duration_s for n in self.notes)


@dataclass(frozen=True)
class RawNote:
    """Track-level note in ticks; ``truncated`` marks a note-on that was
    never closed and got cut at end of track."""

    channel: int
    pitch: int
    velocity: int
    onset_tick: int
    offset_tick: int
    truncated: bool = False


@dataclass
class TempoMap:
    """Piecewise tick-to-seconds conversion from Set Tempo change points."""

    ticks_per_quarter: int
    changes: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        if self.ticks_per_quarter <= 0:
            raise ValidationError("ticks_per_quarter must be positive")
        changes = sorted(self.changes, key=lambda c: c[0])
        # later events win when several land on the same tick
        dedup: list[tuple[int, int]] = []
        for tick, us in changes:
            if dedup and dedup[-1][0] == tick:
                dedup[-1] = (tick, us)
            else:
                dedup.append((tick, us))
        if not dedup or dedup[0][0] != 0:
            dedup.insert(0, (0, DEFAULT_US_PER_QUARTER))
        self.changes = dedup
        self._ticks = [t for t, _ in dedup]
        cum = [0.0]
        for (t0, us), (t1, _) in zip(dedup, dedup[1:]):
            cum.append(cum[-1] + (t1 - t0) * us * 1e-6 / self.ticks_per_quarter)
        self._cum_s = cum

    def tick_to_seconds(self, tick: int) -> float:
        if tick < 0:
            raise ValidationError(f"negative tick {tick}")
        i = bisect.bisect_right(self._ticks, tick) - 1
        t0, us = self.changes[i]
        return self._cum_s[i] + (tick - t0) * us * 1e-6 / self.ticks_per_quarter


def _read_vlq(data: bytes, pos: int, end: int) -> tuple[int, int]:
    value = 0
    for _ in range(4):
        if pos >= end:
            raise MidiParseError("truncated variable-length quantity", pos)
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos
    raise MidiParseError("variable-length quantity longer than 4 bytes", pos)


def _parse_track(data: bytes, pos: int, end: int,
                 tempo_events: list[tuple[int, int]]) -> list[RawNote]:
    tick = 0
    running: int | None = None
    open_notes: dict[tuple[int, int], list[tuple[int, int]]] = {}
    notes: list[RawNote] = []
    while pos < end:
        delta, pos = _read_vlq(data, pos, end)
        tick += delta
        if pos >= end:
            raise MidiParseError("event truncated after delta time", pos)
        byte = data[pos]
        if byte >= 0x80:
            status = byte
            pos += 1
        elif running is not None:
            status = running
        else:
            raise MidiParseError("data byte with no running status", pos)

        if status == _META:
            running = None
            if pos >= end:
                raise MidiParseError("truncated meta event", pos)
            meta_type = data[pos]
            pos += 1
            length, pos = _read_vlq(data, pos, end)
            if pos + length > end:
                raise MidiParseError("meta event payload overruns track", pos)
            payload = data[pos:pos + length]
            pos += length
            if meta_type == _META_SET_TEMPO:
                if length != 3:
                    raise MidiParseError(f"Set Tempo payload of {length} bytes", pos)
                tempo_events.append((tick, int.from_bytes(payload, "big")))
            elif meta_type == _META_END_OF_TRACK:
                break
        elif status in (0xF0, 0xF7):
            running = None
            length, pos = _read_vlq(data, pos, end)
            if pos + length > end:
                raise MidiParseError("sysex payload overruns track", pos)
            pos += length
        elif status >= 0xF0:
            raise MidiParseError(f"unsupported system message 0x{status:02x}", pos)
        else:
            running = status
            kind = status & 0xF0
            channel = status & 0x0F
            n_data = 1 if kind in (0xC0, 0xD0) else 2
            if pos + n_data > end:
                raise MidiParseError("truncated channel message", pos)
            d1 = data[pos]
            d2 = data[pos + 1] if n_data == 2 else 0
            pos += n_data
            if kind == 0x90 and d2 > 0:
                open_notes.setdefault((channel, d1), []).append((tick, d2))
            elif kind == 0x80 or (kind == 0x90 and d2 == 0):
                stack = open_notes.get((channel, d1))
                if stack:
                    onset, vel = stack.pop(0)
                    if tick > onset:
                        notes.append(RawNote(channel, d1, vel, onset, tick))
                # note-off without a matching note-on is ignored
    for (channel, pitch), stack in open_notes.items():
        for onset, vel in stack:
            if tick > onset:
                notes.append(RawNote(channel, pitch, vel, onset, tick, truncated=True))
    notes.sort(key=lambda n: (n.onset_tick, -n.pitch))
    return notes


def parse_midi(data: bytes) -> tuple[TempoMap, list[list[RawNote]]]:
    """Parse raw SMF bytes into a tempo map and per-track note lists.

    Only formats 0 and 1 with metrical (ticks-per-quarter) time division
    are accepted. Unknown chunk types are skipped, as the SMF spec asks.
    """
    if len(data) < 14 or data[:4] != b"MThd":
        raise MidiParseError("missing MThd header", 0)
    header_len = int.from_bytes(data[4:8], "big")
    if header_len < 6 or 8 + header_len > len(data):
        raise MidiParseError("truncated MThd chunk", 4)
    fmt = int.from_bytes(data[8:10], "big")
    n_tracks = int.from_bytes(data[10:12], "big")
    division = int.from_bytes(data[12:14], "big")
    if fmt not in (0, 1):
        raise MidiParseError(f"unsupported SMF format {fmt}", 8)
    if division & 0x8000:
        raise MidiParseError("SMPTE time division is not supported", 12)
    if division == 0:
        raise MidiParseError("ticks-per-quarter must be positive", 12)

    pos = 8 + header_len
    tracks: list[list[RawNote]] = []
    tempo_events: list[tuple[int, int]] = []
    while pos < len(data) and len(tracks) < n_tracks:
        if pos + 8 > len(data):
            raise MidiParseError("truncated chunk header", pos)
        chunk_id = data[pos:pos + 4]
        chunk_len = int.from_bytes(data[pos + 4:pos + 8], "big")
        body_start = pos + 8
        body_end = body_start + chunk_len
        if body_end > len(data):
            raise MidiParseError("truncated chunk body", pos)
        if chunk_id == b"MTrk":
            tracks.append(_parse_track(data, body_start, body_end, tempo_events))
        pos = body_end
    if len(tracks) < n_tracks:
        raise MidiParseError(
            f"header promised {n_tracks} tracks, found {len(tracks)}", pos)
    tempo_events.sort(key=lambda e: e[0])
    return TempoMap(division, tempo_events), tracks


def _reduce_monophonic(notes: list[RawNote]) -> list[RawNote]:
    """Resolve overlaps in tick domain: keep the higher pitch, cut the
    other at the overlap start."""
    reduced: list[RawNote] = []
    for note in notes:
        cur: RawNote | None = note
        while reduced and cur is not None:
            prev = reduced[-1]
            if cur.onset_tick >= prev.offset_tick:
                break
            if cur.pitch > prev.pitch:
                reduced.pop()
                if cur.onset_tick > prev.onset_tick:
                    reduced.append(replace(prev, offset_tick=cur.onset_tick))
                    break
                # prev fully covered: drop it, re-check the one before
            else:
                cur = None
        if cur is not None:
            reduced.append(cur)
    return reduced


def extract_melody(tracks: list[list[RawNote]], tempo_map: TempoMap,
                   source_id: str = "") -> NoteSequence:
    """Pick the melody track (most non-percussion notes) and reduce it to a
    monophonic note sequence in seconds."""
    best: list[RawNote] = []
    for track in tracks:
        melodic = [n for n in track if n.channel != PERCUSSION_CHANNEL]
        if len(melodic) > len(best):
            best = melodic
    if not best:
        raise EmptyScoreError(f"{source_id or 'midi input'}: no melodic notes")
    events = []
    for rn in _reduce_monophonic(best):
        onset = tempo_map.tick_to_seconds(rn.onset_tick)
        duration = tempo_map.tick_to_seconds(rn.offset_tick) - onset
        events.append(NoteEvent(rn.pitch, onset, duration, rn.velocity))
    return NoteSequence(events, source_id)


def load_melody(path: str | Path) -> NoteSequence:
    path = Path(path)
    tempo_map, tracks = parse_midi(path.read_bytes())
    return extract_melody(tracks, tempo_map, source_id=path.name)


def sample_note_window(seq: NoteSequence, n_notes: int,
                       rng: np.random.Generator) -> NoteSequence:
    """Draw a contiguous window of n_notes notes, onsets re-zeroed to the
    window start. Deterministic for a fixed generator state."""
    if n_notes <= 0:
        raise ValidationError(f"window size must be positive, got {n_notes}")
    if len(seq) < n_notes:
        raise InsufficientNotesError(
            f"{seq.source_id or 'sequence'}: {len(seq)} notes < requested {n_notes}")
    start = int(rng.integers(0, len(seq) - n_notes + 1))
    window = seq.notes[start:start + n_notes]
    t0 = window[0].onset_s
    shifted = [replace(n, onset_s=n.onset_s - t0) for n in window]
    return NoteSequence(shifted, f"{seq.source_id}[{start}:{start + n_notes}]")
