import json

import numpy as np
import pytest

from pdaugment.errors import ValidationError
from pdaugment.stats import (
    corpus_report,
    duration_range,
    duration_variance,
    pitch_range,
    pitch_smoothness,
    utterance_stats,
)
from pdaugment.syllables import syllabify
from pdaugment.textgrid import PhonemeInterval
from pdaugment.vocoder import F0Contour, semitone_to_hz


def contour_from_semitones(p, voiced=None):
    p = np.asarray(p, dtype=float)
    if voiced is None:
        voiced = np.ones(len(p), bool)
    voiced = np.asarray(voiced, bool)
    return F0Contour(np.where(voiced, semitone_to_hz(p), 0.0), voiced, 0.01)


def test_pitch_range_constant_is_zero():
    c = F0Contour(np.full(10, 220.0), np.ones(10, bool))
    assert pitch_range(c) == pytest.approx(0.0, abs=1e-12)


def test_pitch_range_octave_is_twelve():
    f = np.tile([220.0, 440.0], 5)
    c = F0Contour(f, np.ones(10, bool))
    assert pitch_range(c) == pytest.approx(12.0)


def test_pitch_range_ignores_unvoiced():
    c = contour_from_semitones([60, 60, 90], voiced=[True, True, False])
    assert pitch_range(c) == pytest.approx(0.0, abs=1e-9)


def test_pitch_range_undefined_without_voiced_frames():
    c = F0Contour(np.zeros(5), np.zeros(5, bool))
    assert pitch_range(c) is None


def test_pitch_smoothness_oracle():
    c = contour_from_semitones([69.0, 70.0, 72.0])
    assert pitch_smoothness(c) == pytest.approx(1.5)


def test_pitch_smoothness_constant_is_zero():
    c = F0Contour(np.full(8, 220.0), np.ones(8, bool))
    assert pitch_smoothness(c) == pytest.approx(0.0, abs=1e-12)


def test_pitch_smoothness_skips_pairs_spanning_unvoiced():
    # voiced 69, 70 | unvoiced | voiced 90: only the first pair counts
    c = contour_from_semitones([69.0, 70.0, 60.0, 90.0],
                               voiced=[True, True, False, True])
    assert pitch_smoothness(c) == pytest.approx(1.0)


def test_pitch_smoothness_undefined_without_adjacent_pairs():
    c = contour_from_semitones([69.0, 60.0, 70.0],
                               voiced=[True, False, True])
    assert pitch_smoothness(c) is None


def test_duration_range_oracle():
    assert duration_range([0.1, 0.3, 0.25]) == pytest.approx(0.2)
    assert duration_range([0.4]) == pytest.approx(0.0)


def test_duration_variance_population():
    assert duration_variance([0.1, 0.3]) == pytest.approx(0.01)
    assert duration_variance([0.2, 0.2, 0.2]) == pytest.approx(0.0, abs=1e-15)


def test_duration_metrics_accept_syllable_sequences():
    phones = [PhonemeInterval("AA1", 0.0, 0.1, "vowel"),
              PhonemeInterval("IY1", 0.1, 0.4, "vowel")]
    seq = syllabify(phones)
    assert duration_range(seq) == pytest.approx(0.2)
    assert duration_variance(seq) == pytest.approx(0.01)


def test_transposition_invariance():
    rng = np.random.default_rng(0)
    p = rng.uniform(50, 70, 40)
    voiced = rng.uniform(size=40) > 0.2
    base = contour_from_semitones(p, voiced)
    shifted = contour_from_semitones(p + 7.0, voiced)
    assert pitch_range(shifted) == pytest.approx(pitch_range(base), abs=1e-9)
    assert pitch_smoothness(shifted) == pytest.approx(
        pitch_smoothness(base), abs=1e-9)


def test_utterance_stats_fields():
    c = contour_from_semitones([60.0, 61.0], voiced=[True, True])
    phones = [PhonemeInterval("AA1", 0.0, 0.1, "vowel")]
    u = utterance_stats("u1", c, syllabify(phones))
    assert u.utterance_id == "u1"
    assert u.n_voiced_frames == 2
    assert u.n_syllables == 1
    assert u.pitch_range_semitones == pytest.approx(1.0)
    assert u.duration_variance_s2 == pytest.approx(0.0, abs=1e-15)


def stats_for(uid, p, durations):
    c = contour_from_semitones(p)
    return utterance_stats(uid, c, durations)


def test_corpus_report_singleton_means_equal_utterance():
    u = stats_for("a", [60.0, 62.0], [0.1, 0.2])
    rep = corpus_report([u], corpus_id="x")
    assert rep.means["pitch_range_semitones"] == pytest.approx(2.0)
    assert rep.means["duration_range_s"] == pytest.approx(0.1)
    assert rep.n_utterances == 1


def test_corpus_report_mean_and_permutation_invariance():
    a = stats_for("a", [60.0, 60.0], [0.2, 0.2])   # range 0
    b = stats_for("b", [60.0, 72.0], [0.1, 0.4])   # range 12
    fwd = corpus_report([a, b])
    rev = corpus_report([b, a])
    assert fwd.means["pitch_range_semitones"] == pytest.approx(6.0)
    assert fwd.means == rev.means
    assert [u.utterance_id for u in fwd.utterances] == ["a", "b"]
    assert [u.utterance_id for u in rev.utterances] == ["a", "b"]


def test_corpus_report_excludes_undefined_from_means():
    a = stats_for("a", [60.0, 62.0], [0.1])
    silent = utterance_stats(
        "b", F0Contour(np.zeros(4), np.zeros(4, bool)), [0.3])
    rep = corpus_report([a, silent])
    assert rep.means["pitch_range_semitones"] == pytest.approx(2.0)
    assert rep.n_defined["pitch_range_semitones"] == 1
    assert rep.n_defined["duration_range_s"] == 2
    assert rep.n_utterances == 2


def test_empty_corpus_rejected():
    with pytest.raises(ValidationError):
        corpus_report([])


def test_report_json_schema():
    rep = corpus_report([stats_for("a", [60.0, 61.0], [0.1, 0.2])], "demo")
    doc = json.loads(rep.to_json())
    assert doc["corpus_id"] == "demo"
    assert doc["n_utterances"] == 1
    assert set(doc["means"]) == {
        "pitch_range_semitones", "pitch_smoothness",
        "duration_range_s", "duration_variance_s2"}
    assert doc["utterances"][0]["utterance_id"] == "a"


def test_report_table_layout():
    rep = corpus_report([stats_for("a", [60.0, 61.0], [0.1, 0.2])], "demo")
    table = rep.to_table()
    assert "Pitch Range (semitone)" in table
    assert "Duration Variance (s^2)" in table
    assert "demo" in table
