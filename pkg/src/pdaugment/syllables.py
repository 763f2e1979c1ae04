"""Grouping phoneme intervals into syllables by the maximal-onset rule.

Every vowel becomes exactly one nucleus. Intervocalic consonant clusters
split so that the longest legal English onset (from a packaged data table)
attaches to the following vowel; the rest stays as the preceding coda.
Silence intervals are kept aside as gaps, never inside a syllable.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

from .errors import UnsyllabifiableError, ValidationError
from .textgrid import SILENCE, VOWEL, PhonemeInterval, load_symbol_table

ONSETS = frozenset(load_symbol_table("onsets.txt"))


@dataclass
class Syllable:
    phonemes: list[PhonemeInterval]
    nucleus_index: int

    def __post_init__(self):
        vowels = [i for i, p in enumerate(self.phonemes) if p.kind == VOWEL]
        if vowels != [self.nucleus_index]:
            raise ValidationError(
                f"syllable {self.labels} must contain exactly one vowel nucleus")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(p.label for p in self.phonemes)

    @property
    def nucleus(self) -> PhonemeInterval:
        return self.phonemes[self.nucleus_index]

    @property
    def start_s(self) -> float:
        return self.phonemes[0].start_s

    @property
    def end_s(self) -> float:
        return self.phonemes[-1].end_s

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    @property
    def vowel_duration_s(self) -> float:
        return self.nucleus.duration_s

    @property
    def consonant_duration_s(self) -> float:
        return sum(p.duration_s for i, p in enumerate(self.phonemes)
                   if i != self.nucleus_index)


@dataclass(frozen=True)
class TierItem:
    """One tier interval with its owning syllable (None for gaps)."""

    interval: PhonemeInterval
    syllable_index: int | None


@dataclass
class SyllableSequence:
    syllables: list[Syllable]
    gaps: list[PhonemeInterval] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.syllables)

    def ordered_items(self) -> list[TierItem]:
        """The full tier in time order, each interval tagged with its
        syllable index (gaps tagged None)."""
        items = [TierItem(p, i)
                 for i, s in enumerate(self.syllables) for p in s.phonemes]
        items += [TierItem(g, None) for g in self.gaps]
        items.sort(key=lambda it: it.interval.start_s)
        return items

    @property
    def span(self) -> tuple[float, float]:
        items = self.ordered_items()
        return items[0].interval.start_s, items[-1].interval.end_s


def _onset_length(cluster: tuple[str, ...]) -> int:
    for k in range(len(cluster), 0, -1):
        if cluster[-k:] in ONSETS:
            return k
    return 0


def _split_run(run: list[PhonemeInterval]) -> list[Syllable]:
    vowel_pos = [i for i, p in enumerate(run) if p.kind == VOWEL]
    bounds = [0]
    for left, right in zip(vowel_pos, vowel_pos[1:]):
        cluster = tuple(p.label.upper() for p in run[left + 1:right])
        bounds.append(right - _onset_length(cluster))
    bounds.append(len(run))
    return [
        Syllable(run[lo:hi], nucleus_index=vowel_pos[j] - lo)
        for j, (lo, hi) in enumerate(zip(bounds, bounds[1:]))
    ]


def syllabify(tier: list[PhonemeInterval]) -> SyllableSequence:
    """Group a phoneme tier into syllables; raises when the tier carries
    no vowel at all. A vowelless run between silences cannot form a
    syllable and is moved to the gaps with a warning."""
    if not any(p.kind == VOWEL for p in tier):
        raise UnsyllabifiableError("phoneme tier contains no vowel")
    syllables: list[Syllable] = []
    gaps: list[PhonemeInterval] = []
    run: list[PhonemeInterval] = []

    def flush():
        if not run:
            return
        if any(p.kind == VOWEL for p in run):
            syllables.extend(_split_run(run))
        else:
            labels = " ".join(p.label for p in run)
            warnings.warn(f"vowelless run [{labels}] kept as a gap")
            gaps.extend(run)
        run.clear()

    for p in tier:
        if p.kind == SILENCE:
            flush()
            gaps.append(p)
        else:
            run.append(p)
    flush()
    return SyllableSequence(syllables, gaps)
