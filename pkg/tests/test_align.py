import pytest

from pdaugment.align import AlignmentPair, align_speech_notes
from pdaugment.errors import ValidationError
from pdaugment.midi import NoteEvent
from pdaugment.syllables import syllabify
from pdaugment.textgrid import PhonemeInterval, classify


def syllables(durations, vowel_s=None):
    """One CV syllable per duration: 0.05 s consonant + remainder vowel
    (or all vowel when too short to split)."""
    phones, t = [], 0.0
    for d in durations:
        if d > 0.08:
            phones.append(PhonemeInterval("B", t, t + 0.05, "consonant"))
            phones.append(PhonemeInterval("AA1", t + 0.05, t + d, "vowel"))
        else:
            phones.append(PhonemeInterval("AA1", t, t + d, "vowel"))
        t = round(t + d, 6)
    return syllabify(phones)


def notes(durations, pitch=60):
    out, t = [], 0.0
    for d in durations:
        out.append(NoteEvent(pitch, t, d))
        t = round(t + d, 6)
    return out


def kinds(pairs):
    return [p.kind for p in pairs]


def test_ratio_in_bounds_is_one_to_one():
    pairs = align_speech_notes(syllables([0.30]), notes([0.50]))
    assert kinds(pairs) == ["1-1"]
    assert pairs[0].syllable_indices == (0,)
    assert pairs[0].note_indices == (0,)
    assert pairs[0].ratio == pytest.approx(0.6)


def test_short_syllables_accumulate_many_to_one():
    # 0.20/0.50 = 0.4 < 0.5 -> take the next syllable: 0.35/0.50 = 0.7
    pairs = align_speech_notes(syllables([0.20, 0.15]), notes([0.50]))
    assert kinds(pairs) == ["many-1"]
    assert pairs[0].syllable_indices == (0, 1)
    assert pairs[0].ratio == pytest.approx(0.7)
    assert not pairs[0].forced


def test_long_syllable_accumulates_one_to_many():
    # 1.2/0.5 = 2.4 > 2 -> take the next note: 1.2/0.9 = 1.33
    pairs = align_speech_notes(syllables([1.2]), notes([0.5, 0.4]))
    assert kinds(pairs) == ["1-many"]
    assert pairs[0].note_indices == (0, 1)
    assert pairs[0].ratio == pytest.approx(1.2 / 0.9)


def test_boundary_ratios_inclusive():
    assert kinds(align_speech_notes(syllables([0.25]), notes([0.50]))) == ["1-1"]
    assert kinds(align_speech_notes(syllables([1.00]), notes([0.50]))) == ["1-1"]


def test_mixed_sequence_totality_and_monotonicity():
    syls = syllables([0.20, 0.15, 0.50, 1.20, 0.40])
    nts = notes([0.50, 0.45, 0.50, 0.40, 0.35])
    pairs = align_speech_notes(syls, nts)
    syl_seq = [i for p in pairs for i in p.syllable_indices]
    note_seq = [i for p in pairs for i in p.note_indices]
    assert syl_seq == list(range(len(syls)))
    assert note_seq == list(range(len(nts)))
    for p in pairs:
        assert list(p.syllable_indices) == sorted(p.syllable_indices)
        assert list(p.note_indices) == sorted(p.note_indices)


def test_leftover_notes_merge_into_tail():
    syls = syllables([0.50])
    nts = notes([0.50, 0.50, 0.50])
    pairs = align_speech_notes(syls, nts)
    assert len(pairs) == 1
    assert pairs[0].kind == "1-many"
    assert pairs[0].note_indices == (0, 1, 2)
    assert pairs[0].forced


def test_leftover_syllables_merge_into_tail():
    syls = syllables([0.50, 0.50, 0.50])
    nts = notes([0.50])
    pairs = align_speech_notes(syls, nts)
    assert len(pairs) == 1
    assert pairs[0].kind == "many-1"
    assert pairs[0].syllable_indices == (0, 1, 2)
    assert pairs[0].forced


def test_forced_merge_never_creates_many_to_many():
    # tail pair is 1-many before the leftover syllable arrives; the
    # merge must keep one side singular
    syls = syllables([1.2, 0.3, 0.3])
    nts = notes([0.5, 0.4])
    pairs = align_speech_notes(syls, nts)
    for p in pairs:
        assert not (len(p.syllable_indices) > 1 and len(p.note_indices) > 1)
    syl_seq = [i for p in pairs for i in p.syllable_indices]
    note_seq = [i for p in pairs for i in p.note_indices]
    assert syl_seq == [0, 1, 2]
    assert note_seq == [0, 1]


def test_unforced_one_to_one_pairs_respect_ratio_bounds():
    syls = syllables([0.2, 0.8, 0.4, 1.3, 0.25, 0.6])
    nts = notes([0.5, 0.6, 0.45, 0.5, 0.4, 0.55, 0.5])
    pairs = align_speech_notes(syls, nts)
    assert any(p.kind == "1-1" for p in pairs)
    for p in pairs:
        if p.kind == "1-1" and not p.forced:
            assert 0.5 - 1e-9 <= p.ratio <= 2.0 + 1e-9


def test_exhausted_accumulation_is_flagged_forced():
    # a lone syllable below the low bound has nothing to accumulate:
    # the pair keeps its out-of-bounds ratio but carries the flag
    pairs = align_speech_notes(syllables([0.20]), notes([0.50]))
    assert kinds(pairs) == ["1-1"]
    assert pairs[0].forced
    assert pairs[0].ratio == pytest.approx(0.4)


def test_empty_inputs_rejected():
    with pytest.raises(ValidationError):
        align_speech_notes(syllables([0.3]), [])
    with pytest.raises(ValidationError):
        align_speech_notes([], notes([0.3]))


def test_many_to_many_pair_construction_rejected():
    with pytest.raises(ValidationError):
        AlignmentPair((0, 1), (0, 1), 1.0)


def test_custom_ratio_bounds():
    pairs = align_speech_notes(syllables([0.30, 0.30]), notes([0.50]),
                               ratio_low=0.7, ratio_high=1.5)
    assert kinds(pairs) == ["many-1"]
    assert pairs[0].syllable_indices == (0, 1)
    assert pairs[0].ratio == pytest.approx(1.2)
    assert not pairs[0].forced
