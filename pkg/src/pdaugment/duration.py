"""Retiming speech so syllable lengths match their aligned notes.

Only vowels stretch or shrink; consonants and silence keep their length.
For each alignment pair the uniform vowel scale is (T - C) / V, where T
is the total note duration, C the consonant total, and V the vowel total
of the member syllables, so every vowel in the pair scales in proportion
to its own length. Scales clamp to configured bounds with a warning
instead of producing degenerate audio. Retiming happens in vocoder
parameter space: each phoneme's frame run is resampled to its target
frame count, which keeps the pitch command exact through one synthesis
pass.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .align import AlignmentPair
from .errors import ConsistencyError, ValidationError
from .midi import NoteEvent, NoteSequence
from .syllables import SyllableSequence
from .textgrid import SILENCE, VOWEL
from .vocoder import (
    DEFAULT_HOP_S,
    F0Contour,
    VocoderParams,
    hz_to_semitone,
    semitone_to_hz,
)

DEFAULT_SCALE_BOUNDS = (0.25, 8.0)
DEFAULT_MIN_VOWEL_S = 0.030

FILLER = "filler"


@dataclass
class PlanEntry:
    index: int
    label: str
    kind: str
    src_start_s: float
    src_end_s: float
    scale: float
    clamped: bool = False
    absorbed_rest_s: float = 0.0

    @property
    def src_duration_s(self) -> float:
        return self.src_end_s - self.src_start_s

    @property
    def target_s(self) -> float:
        return self.src_duration_s * self.scale + self.absorbed_rest_s


@dataclass(frozen=True)
class PairTiming:
    pair_index: int
    kind: str
    note_total_s: float
    planned_s: float
    scale: float
    clamped: bool


@dataclass
class DurationPlan:
    entries: list[PlanEntry]
    pair_timings: list[PairTiming] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def total_target_s(self) -> float:
        return sum(e.target_s for e in self.entries)

    @property
    def n_clamped(self) -> int:
        return sum(1 for p in self.pair_timings if p.clamped)

    def to_json(self) -> str:
        doc = {
            "entries": [asdict(e) for e in self.entries],
            "pair_timings": [asdict(p) for p in self.pair_timings],
            "warnings": list(self.warnings),
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def _pair_scale(syls, pair: AlignmentPair, note_total: float, min_vowel_s: float,
                bounds: tuple[float, float]) -> tuple[float, float]:
    consonant = sum(syls[i].consonant_duration_s for i in pair.syllable_indices)
    vowel = sum(syls[i].vowel_duration_s for i in pair.syllable_indices)
    raw = (note_total - consonant) / vowel
    floor = max(bounds[0], min_vowel_s * len(pair.syllable_indices) / vowel)
    return raw, float(np.clip(raw, floor, max(bounds[1], floor)))


def compute_duration_plan(syllables: SyllableSequence, notes,
                          pairs: list[AlignmentPair],
                          min_vowel_s: float = DEFAULT_MIN_VOWEL_S,
                          scale_bounds: tuple[float, float] = DEFAULT_SCALE_BOUNDS,
                          hop_s: float = DEFAULT_HOP_S) -> DurationPlan:
    """Per-phoneme duration targets from the alignment.

    Rests between notes of consecutive pairs longer than one hop extend
    an intervening silence interval when one exists; otherwise they are
    dropped with a warning. Rests inside a melisma cannot be represented
    and are only logged.
    """
    nts: list[NoteEvent] = notes.notes if isinstance(notes, NoteSequence) else list(notes)
    syls = syllables.syllables
    warnings_log: list[str] = []

    scale_of: dict[int, tuple[float, bool]] = {}
    timings: list[PairTiming] = []
    for pi, pair in enumerate(pairs):
        note_total = sum(nts[i].duration_s for i in pair.note_indices)
        raw, scale = _pair_scale(syls, pair, note_total, min_vowel_s, scale_bounds)
        clamped = abs(scale - raw) > 1e-9
        if clamped:
            warnings_log.append(
                f"pair {pi}: vowel scale {raw:.4f} clamped to {scale:.4f}, "
                f"span misses its note total by "
                f"{note_total - _planned(syls, pair, scale):.4f}s")
        for si in pair.syllable_indices:
            scale_of[si] = (scale, clamped)
        timings.append(PairTiming(pi, pair.kind, note_total,
                                  _planned(syls, pair, scale), scale, clamped))

    entries: list[PlanEntry] = []
    for item in syllables.ordered_items():
        iv = item.interval
        if item.syllable_index is None:
            entries.append(PlanEntry(len(entries), iv.label, SILENCE if
                                     iv.kind == SILENCE else iv.kind,
                                     iv.start_s, iv.end_s, 1.0))
        elif iv.kind == VOWEL:
            scale, clamped = scale_of.get(item.syllable_index, (1.0, False))
            entries.append(PlanEntry(len(entries), iv.label, VOWEL,
                                     iv.start_s, iv.end_s, scale, clamped))
        else:
            entries.append(PlanEntry(len(entries), iv.label, iv.kind,
                                     iv.start_s, iv.end_s, 1.0))

    _absorb_note_rests(entries, nts, pairs, syls, hop_s, warnings_log)
    return DurationPlan(entries, timings, warnings_log)


def _planned(syls, pair: AlignmentPair, scale: float) -> float:
    consonant = sum(syls[i].consonant_duration_s for i in pair.syllable_indices)
    vowel = sum(syls[i].vowel_duration_s for i in pair.syllable_indices)
    return consonant + scale * vowel


def _absorb_note_rests(entries, nts, pairs, syls, hop_s, warnings_log):
    """A rest between the notes of consecutive pairs widens a silence
    entry lying between the two pairs' syllables, when there is one."""
    for (pa, pb) in zip(pairs, pairs[1:]):
        last = nts[pa.note_indices[-1]]
        rest = nts[pb.note_indices[0]].onset_s - (last.onset_s + last.duration_s)
        if rest <= hop_s:
            continue
        lo = syls[pa.syllable_indices[-1]].end_s
        hi = syls[pb.syllable_indices[0]].start_s
        target = next((e for e in entries if e.kind == SILENCE
                       and e.src_start_s >= lo - 1e-9 and e.src_end_s <= hi + 1e-9),
                      None)
        if target is None:
            warnings_log.append(
                f"{rest:.3f}s note rest after note {pa.note_indices[-1]} has "
                f"no adjacent silence to absorb it")
        else:
            target.absorbed_rest_s += rest
            warnings_log.append(
                f"silence at {target.src_start_s:.3f}s extended by {rest:.3f}s rest")
    for pair in pairs:
        for na, nb in zip(pair.note_indices, pair.note_indices[1:]):
            rest = nts[nb].onset_s - (nts[na].onset_s + nts[na].duration_s)
            if rest > hop_s:
                warnings_log.append(
                    f"{rest:.3f}s rest inside a melisma (notes {na}-{nb}) ignored")


def uniform_vowel_plan(syllables: SyllableSequence, ratio: float,
                       scale_bounds: tuple[float, float] = DEFAULT_SCALE_BOUNDS
                       ) -> DurationPlan:
    """One duration ratio applied to every vowel (the random baseline)."""
    if ratio <= 0:
        raise ValidationError(f"duration ratio must be positive, got {ratio}")
    scale = float(np.clip(ratio, *scale_bounds))
    entries = []
    for item in syllables.ordered_items():
        iv = item.interval
        is_vowel = item.syllable_index is not None and iv.kind == VOWEL
        entries.append(PlanEntry(len(entries), iv.label, iv.kind,
                                 iv.start_s, iv.end_s,
                                 scale if is_vowel else 1.0))
    return DurationPlan(entries)


@dataclass(frozen=True)
class RealizedSpan:
    label: str
    kind: str
    scale: float
    src_lo: int
    src_hi: int
    tgt_lo: int
    tgt_hi: int


def realized_spans(plan: DurationPlan, hop_s: float, n_frames: int
                   ) -> list[RealizedSpan]:
    """Integer frame spans for every plan entry plus grid fillers.

    Shared by apply_duration and by tests that check attainment, so both
    sides agree on rounding.
    """
    entries = plan.entries
    if not entries:
        raise ValidationError("empty duration plan")
    for a, b in zip(entries, entries[1:]):
        if abs(a.src_end_s - b.src_start_s) > 1e-6:
            raise ConsistencyError(
                f"plan entries not contiguous at {a.src_end_s:.4f}s")
    head = entries[0].src_start_s
    tail = n_frames * hop_s - entries[-1].src_end_s
    if head > hop_s + 1e-9 or abs(tail) > hop_s + 1e-9 or head < -1e-9:
        raise ConsistencyError(
            f"plan spans [{head:.4f}, {entries[-1].src_end_s:.4f}]s do not "
            f"tile the {n_frames}-frame grid within one hop")

    items: list[tuple[str, str, float, float, float]] = []
    if head > 1e-9:
        items.append((FILLER, FILLER, 1.0, head, head))
    for e in entries:
        items.append((e.label, e.kind, e.scale, e.src_duration_s, e.target_s))
    if tail > 1e-9:
        items.append((FILLER, FILLER, 1.0, tail, tail))

    spans = []
    src_acc = 0.0 if head > 1e-9 else head
    tgt_acc = 0.0
    src_lo, tgt_lo = 0, 0
    for i, (label, kind, scale, src_d, tgt_d) in enumerate(items):
        src_acc += src_d
        tgt_acc += tgt_d
        src_hi = n_frames if i == len(items) - 1 else int(round(src_acc / hop_s))
        src_hi = min(max(src_hi, src_lo), n_frames)
        tgt_hi = max(int(round(tgt_acc / hop_s)), tgt_lo)
        spans.append(RealizedSpan(label, kind, scale, src_lo, src_hi, tgt_lo, tgt_hi))
        src_lo, tgt_lo = src_hi, tgt_hi
    return spans


def _resample_span(params: VocoderParams, span: RealizedSpan):
    a, b = span.src_lo, span.src_hi
    m = span.tgt_hi - span.tgt_lo
    env, ap = params.envelope, params.aperiodicity
    f0, voiced = params.f0.f0_hz, params.f0.voiced
    if m == 0:
        return None
    if b <= a:  # zero-width source span realized anyway: hold a neighbor
        idx = min(max(a - 1, 0), params.n_frames - 1)
        rep = np.repeat
        return (rep(env[idx:idx + 1], m, 0), rep(ap[idx:idx + 1], m, 0),
                rep(f0[idx:idx + 1], m), rep(voiced[idx:idx + 1], m))
    x = a + (np.arange(m) + 0.5) * (b - a) / m - 0.5
    x = np.clip(x, a, b - 1)
    i0 = np.floor(x).astype(int)
    i1 = np.minimum(i0 + 1, b - 1)
    wgt = (x - i0)[:, None]
    env_out = env[i0] * (1.0 - wgt) + env[i1] * wgt
    ap_out = ap[i0] * (1.0 - wgt) + ap[i1] * wgt
    nearest = np.clip(np.round(x).astype(int), a, b - 1)
    voiced_out = voiced[nearest]
    f0_out = np.zeros(m)
    both = voiced[i0] & voiced[i1] & voiced_out
    if np.any(both):
        p0 = hz_to_semitone(f0[i0[both]])
        p1 = hz_to_semitone(f0[i1[both]])
        w1 = wgt[both, 0]
        f0_out[both] = semitone_to_hz(p0 * (1.0 - w1) + p1 * w1)
    rest = voiced_out & ~both
    f0_out[rest] = f0[nearest[rest]]
    return env_out, ap_out, f0_out, voiced_out


def apply_duration(params: VocoderParams, plan: DurationPlan) -> VocoderParams:
    """Resample every phoneme's frame run to its planned length.

    Envelope and aperiodicity interpolate linearly per bin; F0
    interpolates in the semitone domain inside voiced runs; voicing uses
    the nearest source frame.
    """
    hop_s = params.f0.hop_s
    spans = realized_spans(plan, hop_s, params.n_frames)
    parts = [p for span in spans if (p := _resample_span(params, span)) is not None]
    if not parts:
        raise ConsistencyError("duration plan produces an empty utterance")
    env = np.vstack([p[0] for p in parts])
    ap = np.vstack([p[1] for p in parts])
    f0 = np.concatenate([p[2] for p in parts])
    voiced = np.concatenate([p[3] for p in parts])
    f0[~voiced] = 0.0
    contour = F0Contour(f0, voiced, hop_s)
    return VocoderParams(contour, env, ap, params.sample_rate_hz,
                         params.fft_size, params.band_edges_hz)
