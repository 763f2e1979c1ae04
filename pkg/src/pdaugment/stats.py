"""Acoustic-gap metrics between plain speech and singing-like speech.

Four per-utterance numbers: pitch range (max minus min semitone over
voiced frames), pitch smoothness (mean absolute semitone step between
adjacent voiced frames; smaller is smoother), syllable duration range,
and population variance of syllable durations. Corpus means average the
utterances where a metric is defined; undefined values stay null and are
counted separately.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ValidationError
from .syllables import SyllableSequence
from .vocoder import F0Contour, hz_to_semitone

METRICS = ("pitch_range_semitones", "pitch_smoothness",
           "duration_range_s", "duration_variance_s2")


def pitch_range(c: F0Contour) -> float | None:
    """Max minus min semitone pitch over voiced frames; None when the
    contour has no voiced frame."""
    p = hz_to_semitone(c.f0_hz[c.voiced]) if np.any(c.voiced) else None
    if p is None or p.size == 0:
        return None
    return float(np.max(p) - np.min(p))


def pitch_smoothness(c: F0Contour) -> float | None:
    """Mean |semitone step| over adjacent frame pairs with both frames
    voiced; pairs spanning an unvoiced frame are skipped."""
    both = c.voiced[:-1] & c.voiced[1:]
    if not np.any(both):
        return None
    p = np.where(c.voiced, hz_to_semitone(np.where(c.voiced, c.f0_hz, 1.0)), 0.0)
    steps = np.abs(p[1:] - p[:-1])[both]
    return float(np.mean(steps))


def _durations(s) -> np.ndarray:
    if isinstance(s, SyllableSequence):
        return np.array([syl.duration_s for syl in s.syllables])
    return np.asarray(list(s), dtype=np.float64)


def duration_range(s) -> float | None:
    d = _durations(s)
    if d.size == 0:
        return None
    return float(np.max(d) - np.min(d))


def duration_variance(s) -> float | None:
    """Population variance (no Bessel correction) of syllable durations."""
    d = _durations(s)
    if d.size == 0:
        return None
    return float(np.var(d))


@dataclass
class UtteranceStats:
    utterance_id: str
    pitch_range_semitones: float | None
    pitch_smoothness: float | None
    duration_range_s: float | None
    duration_variance_s2: float | None
    n_voiced_frames: int
    n_syllables: int


def utterance_stats(utterance_id: str, contour: F0Contour,
                    syllables) -> UtteranceStats:
    n_syl = len(syllables.syllables) if isinstance(
        syllables, SyllableSequence) else len(list(syllables))
    return UtteranceStats(
        utterance_id=utterance_id,
        pitch_range_semitones=pitch_range(contour),
        pitch_smoothness=pitch_smoothness(contour),
        duration_range_s=duration_range(syllables),
        duration_variance_s2=duration_variance(syllables),
        n_voiced_frames=int(np.count_nonzero(contour.voiced)),
        n_syllables=n_syl,
    )


@dataclass
class StatsReport:
    corpus_id: str
    utterances: list[UtteranceStats]
    means: dict[str, float | None]
    n_defined: dict[str, int]

    @property
    def n_utterances(self) -> int:
        return len(self.utterances)

    def to_json(self) -> str:
        doc = {
            "corpus_id": self.corpus_id,
            "n_utterances": self.n_utterances,
            "means": self.means,
            "n_defined": self.n_defined,
            "utterances": [asdict(u) for u in self.utterances],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def to_table(self) -> str:
        """Aligned text table, one metric per row."""
        labels = {
            "pitch_range_semitones": "Pitch Range (semitone)",
            "pitch_smoothness": "Pitch Smoothness (semitone)",
            "duration_range_s": "Duration Range (s)",
            "duration_variance_s2": "Duration Variance (s^2)",
        }
        width = max(len(v) for v in labels.values())
        lines = [f"corpus: {self.corpus_id}  ({self.n_utterances} utterances)"]
        for key in METRICS:
            mean = self.means[key]
            value = f"{mean:10.4f}" if mean is not None else "         -"
            lines.append(f"{labels[key]:<{width}}  {value}  "
                         f"(defined on {self.n_defined[key]})")
        return "\n".join(lines) + "\n"


def corpus_report(utterances: list[UtteranceStats], corpus_id: str = "") -> StatsReport:
    """Means over utterances with defined values, rows ordered by id."""
    if not utterances:
        raise ValidationError("empty corpus")
    ordered = sorted(utterances, key=lambda u: u.utterance_id)
    means: dict[str, float | None] = {}
    n_defined: dict[str, int] = {}
    for key in METRICS:
        values = [getattr(u, key) for u in ordered if getattr(u, key) is not None]
        n_defined[key] = len(values)
        means[key] = float(np.mean(values)) if values else None
    return StatsReport(corpus_id, ordered, means, n_defined)
