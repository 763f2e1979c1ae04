"""Replacing the F0 contour with aligned note pitches.

Three rules from the alignment kinds: a 1-1 or many-1 pair paints every
frame of its syllable span with the single note's pitch; a 1-many pair
splits the syllable span into segments proportional to the note durations
(melisma). Frames outside any syllable span are interpolated linearly in
the semitone domain between neighboring targets. The global shift keeps
the note register within reach of the speaker: beyond a threshold the
whole note sequence moves by an integer semitone count.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace

import numpy as np

from .align import AlignmentPair
from .errors import ConsistencyError
from .midi import NoteEvent, NoteSequence
from .syllables import Syllable, SyllableSequence
from .vocoder import (
    F0Contour,
    VocoderParams,
    hz_to_semitone,
    require_same_grid,
    semitone_to_hz,
)

DEFAULT_SHIFT_THRESHOLD = 5.0


@dataclass(frozen=True)
class PlanSegment:
    syllable_index: int
    note_index: int
    frame_lo: int
    frame_hi: int


@dataclass
class PitchPlan:
    target_f0: F0Contour
    global_shift_semitones: int
    segments: list[PlanSegment]

    def to_json(self) -> str:
        doc = {
            "global_shift_semitones": self.global_shift_semitones,
            "segments": [asdict(s) for s in self.segments],
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def mean_voiced_semitone(c: F0Contour) -> float | None:
    if not np.any(c.voiced):
        return None
    return float(np.mean(hz_to_semitone(c.f0_hz[c.voiced])))


def mean_note_pitch(notes) -> float:
    pitches = [n.pitch for n in (notes.notes if isinstance(notes, NoteSequence) else notes)]
    return float(np.mean(pitches))


def compute_global_shift(speech_mean_p: float, note_mean_p: float,
                         threshold: float = DEFAULT_SHIFT_THRESHOLD) -> int:
    """Integer semitone shift for the whole note sequence: zero when the
    register difference is within the threshold, otherwise the rounded
    difference is cancelled (residual at most half a semitone)."""
    d = note_mean_p - speech_mean_p
    if abs(d) <= threshold:
        return 0
    return -int(np.rint(d))


def _frame_of(t_s: float, hop_s: float) -> int:
    return int(round(t_s / hop_s))


def _proportional_bounds(lo: int, hi: int, weights: list[float]) -> list[int]:
    """Split [lo, hi) into len(weights) consecutive spans with lengths
    proportional to the weights, by cumulative rounding."""
    total = sum(weights)
    span = hi - lo
    bounds = [lo]
    acc = 0.0
    for w in weights[:-1]:
        acc += w
        bounds.append(lo + int(round(span * acc / total)))
    bounds.append(hi)
    return bounds


def build_pitch_plan(src_f0: F0Contour, syllables, notes,
                     pairs: list[AlignmentPair], shift: int) -> PitchPlan:
    """Per-frame semitone targets from the alignment, on the source grid.

    Source-unvoiced frames stay unvoiced. Gap frames between assigned
    spans ramp linearly in semitones; leading/trailing gaps hold the
    nearest target.
    """
    syls: list[Syllable] = syllables.syllables if isinstance(
        syllables, SyllableSequence) else list(syllables)
    nts: list[NoteEvent] = notes.notes if isinstance(
        notes, NoteSequence) else list(notes)
    n = src_f0.n_frames
    hop = src_f0.hop_s

    tier_end = max((s.end_s for s in syls), default=0.0)
    if _frame_of(tier_end, hop) > n:
        raise ConsistencyError(
            f"syllable tier ends at {tier_end:.3f}s, beyond the "
            f"{n}-frame contour")

    target_p = np.full(n, np.nan)
    segments: list[PlanSegment] = []

    def paint(si: int, ni: int, lo: int, hi: int):
        lo, hi = max(lo, 0), min(hi, n)
        segments.append(PlanSegment(si, ni, lo, hi))
        if hi > lo:
            target_p[lo:hi] = nts[ni].pitch + shift

    for pair in pairs:
        if len(pair.note_indices) == 1:
            ni = pair.note_indices[0]
            for si in pair.syllable_indices:
                s = syls[si]
                paint(si, ni, _frame_of(s.start_s, hop), _frame_of(s.end_s, hop))
        else:
            si = pair.syllable_indices[0]
            s = syls[si]
            lo, hi = _frame_of(s.start_s, hop), _frame_of(s.end_s, hop)
            weights = [nts[ni].duration_s for ni in pair.note_indices]
            bounds = _proportional_bounds(lo, hi, weights)
            for ni, seg_lo, seg_hi in zip(pair.note_indices, bounds, bounds[1:]):
                paint(si, ni, seg_lo, seg_hi)

    assigned = np.nonzero(~np.isnan(target_p))[0]
    if assigned.size == 0:
        raise ConsistencyError("no contour frame falls inside any syllable span")
    first, last = assigned[0], assigned[-1]
    target_p[:first] = target_p[first]
    target_p[last:] = target_p[last]
    gaps = np.nonzero(np.isnan(target_p))[0]
    if gaps.size:
        # maximal runs of unassigned frames, interpolated between anchors
        run_breaks = np.nonzero(np.diff(gaps) > 1)[0]
        for run in np.split(gaps, run_breaks + 1):
            a, b = run[0], run[-1] + 1
            left, right = target_p[a - 1], target_p[b]
            steps = (run - (a - 1)) / (b - (a - 1))
            target_p[run] = left + steps * (right - left)

    f0_hz = np.where(src_f0.voiced, semitone_to_hz(target_p), 0.0)
    target = F0Contour(f0_hz, src_f0.voiced.copy(), hop)
    return PitchPlan(target, shift, segments)


def apply_pitch(params: VocoderParams, plan: PitchPlan) -> VocoderParams:
    """Swap in the planned F0; envelope and aperiodicity pass through
    untouched, voicing flags keep their source values."""
    require_same_grid(params, plan.target_f0)
    if np.any(plan.target_f0.voiced != params.f0.voiced):
        raise ConsistencyError("plan voicing flags do not match the source")
    return replace(params, f0=plan.target_f0)
