"""Greedy left-to-right alignment of syllables to notes.

One syllable maps to one note when their duration ratio sits inside
[ratio_low, ratio_high]. A too-short syllable accumulates following
syllables onto its note (many-to-one); a too-long syllable accumulates
following notes (one-to-many). Thresholds apply to the cumulative ratio
while accumulating. When one side runs out, the leftovers merge into the
tail in a way that never creates a many-to-many pair; affected pairs are
flagged as forced and exempt from the ratio bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import ValidationError
from .midi import NoteEvent, NoteSequence
from .syllables import Syllable, SyllableSequence

ONE_TO_ONE = "1-1"
MANY_TO_ONE = "many-1"
ONE_TO_MANY = "1-many"


@dataclass(frozen=True)
class AlignmentPair:
    syllable_indices: tuple[int, ...]
    note_indices: tuple[int, ...]
    ratio: float
    forced: bool = False

    def __post_init__(self):
        if not self.syllable_indices or not self.note_indices:
            raise ValidationError("alignment pair with an empty side")
        if len(self.syllable_indices) > 1 and len(self.note_indices) > 1:
            raise ValidationError("many-to-many alignment pair")

    @property
    def kind(self) -> str:
        if len(self.syllable_indices) > 1:
            return MANY_TO_ONE
        if len(self.note_indices) > 1:
            return ONE_TO_MANY
        return ONE_TO_ONE


def _as_syllables(syllables) -> list[Syllable]:
    if isinstance(syllables, SyllableSequence):
        return syllables.syllables
    return list(syllables)


def _as_notes(notes) -> list[NoteEvent]:
    if isinstance(notes, NoteSequence):
        return notes.notes
    return list(notes)


def align_speech_notes(syllables, notes, ratio_low: float = 0.5,
                       ratio_high: float = 2.0) -> list[AlignmentPair]:
    """Pair syllables with notes left to right under the ratio thresholds.

    Totality holds by construction: concatenating the pairs reproduces
    both index ranges without gaps or repeats.
    """
    syls = _as_syllables(syllables)
    nts = _as_notes(notes)
    if not syls or not nts:
        raise ValidationError("alignment needs at least one syllable and one note")
    if not 0 < ratio_low < ratio_high:
        raise ValidationError(f"bad ratio thresholds [{ratio_low}, {ratio_high}]")

    sdur = [s.duration_s for s in syls]
    ndur = [n.duration_s for n in nts]
    pairs: list[AlignmentPair] = []
    si, ni = 0, 0
    while si < len(syls) and ni < len(nts):
        r = sdur[si] / ndur[ni]
        if r < ratio_low:
            total = sdur[si]
            js = si + 1
            while total / ndur[ni] < ratio_low and js < len(syls):
                total += sdur[js]
                js += 1
            # still below the bound means the syllables ran out mid-pair
            ratio = total / ndur[ni]
            pairs.append(AlignmentPair(tuple(range(si, js)), (ni,), ratio,
                                       forced=ratio < ratio_low))
            si, ni = js, ni + 1
        elif r > ratio_high:
            total = ndur[ni]
            jn = ni + 1
            while sdur[si] / total > ratio_high and jn < len(nts):
                total += ndur[jn]
                jn += 1
            ratio = sdur[si] / total
            pairs.append(AlignmentPair((si,), tuple(range(ni, jn)), ratio,
                                       forced=ratio > ratio_high))
            si, ni = si + 1, jn
        else:
            pairs.append(AlignmentPair((si,), (ni,), r))
            si, ni = si + 1, ni + 1

    if si < len(syls):
        pairs = _merge_leftover_syllables(pairs, range(si, len(syls)), sdur, ndur)
    elif ni < len(nts):
        pairs = _merge_leftover_notes(pairs, range(ni, len(nts)), sdur, ndur)
    return pairs


def _pair_ratio(syl_idx, note_idx, sdur, ndur) -> float:
    return sum(sdur[i] for i in syl_idx) / sum(ndur[j] for j in note_idx)


def _merge_leftover_syllables(pairs, leftover, sdur, ndur) -> list:
    last = pairs[-1]
    if len(last.note_indices) == 1:
        syl_idx = last.syllable_indices + tuple(leftover)
        pairs[-1] = AlignmentPair(
            syl_idx, last.note_indices,
            _pair_ratio(syl_idx, last.note_indices, sdur, ndur), forced=True)
    else:
        # last pair is 1-many: hand its final note to the leftovers so the
        # merge stays many-to-one instead of going many-to-many
        kept = last.note_indices[:-1]
        moved = last.note_indices[-1:]
        pairs[-1] = replace(
            last, note_indices=kept,
            ratio=_pair_ratio(last.syllable_indices, kept, sdur, ndur), forced=True)
        syl_idx = tuple(leftover)
        pairs.append(AlignmentPair(
            syl_idx, moved, _pair_ratio(syl_idx, moved, sdur, ndur), forced=True))
    return pairs


def _merge_leftover_notes(pairs, leftover, sdur, ndur) -> list:
    last = pairs[-1]
    if len(last.syllable_indices) == 1:
        note_idx = last.note_indices + tuple(leftover)
        pairs[-1] = AlignmentPair(
            last.syllable_indices, note_idx,
            _pair_ratio(last.syllable_indices, note_idx, sdur, ndur), forced=True)
    else:
        kept = last.syllable_indices[:-1]
        moved = last.syllable_indices[-1:]
        pairs[-1] = replace(
            last, syllable_indices=kept,
            ratio=_pair_ratio(kept, last.note_indices, sdur, ndur), forced=True)
        note_idx = tuple(leftover)
        pairs.append(AlignmentPair(
            moved, note_idx, _pair_ratio(moved, note_idx, sdur, ndur), forced=True))
    return pairs
