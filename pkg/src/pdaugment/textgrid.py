"""Phoneme-tier ingestion from Praat TextGrid or JSON alignment files.

Both long and short TextGrid forms are read through one token stream: the
long form is the short form plus decoration (keys, brackets), so after
dropping bare non-numeric tokens the two are identical. The JSON
alternative is {"phones": [{"label": str, "start": float, "end": float}]}.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import FormatError, ValidationError

VOWEL = "vowel"
CONSONANT = "consonant"
SILENCE = "silence"

SILENCE_LABELS = {"", "sil", "sp"}

_STRESS_DIGITS = "012"


def load_symbol_table(name: str) -> list[tuple[str, ...]]:
    """Read a packaged data table: one space-separated symbol group per
    line, '#' starts a comment."""
    text = resources.files("pdaugment.data").joinpath(name).read_text("utf-8")
    entries = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            entries.append(tuple(line.split()))
    return entries


VOWELS = frozenset(sym for (sym,) in load_symbol_table("vowels.txt"))
_CONSONANTS = frozenset(
    "B CH D DH F G HH JH K L M N NG P R S SH T TH V W Y Z ZH".split())


def classify(label: str) -> str:
    """Map an ARPAbet-style label to vowel/consonant/silence. Unknown
    labels are classified consonant with a warning."""
    if label.lower() in SILENCE_LABELS:
        return SILENCE
    base = label.rstrip(_STRESS_DIGITS).upper()
    if base in VOWELS:
        return VOWEL
    if base not in _CONSONANTS:
        warnings.warn(f"unknown phoneme label {label!r}, treating as consonant")
    return CONSONANT


@dataclass(frozen=True)
class PhonemeInterval:
    label: str
    start_s: float
    end_s: float
    kind: str

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


def _finalize(raw: list[tuple[str, float, float]]) -> list[PhonemeInterval]:
    for label, start, end in raw:
        if end <= start:
            raise ValidationError(
                f"interval {label!r} has end {end} <= start {start}")
    raw = sorted(raw, key=lambda r: r[1])
    prev_end = None
    for label, start, end in raw:
        if prev_end is not None and start < prev_end - 1e-9:
            raise ValidationError(
                f"interval {label!r} at {start:.4f}s overlaps the previous one")
        prev_end = end
    return [
        PhonemeInterval(label, start, end, classify(label))
        for label, start, end in raw
    ]


def _tokenize(text: str) -> list[object]:
    """Quoted strings plus bare tokens that are numbers or the <exists>
    flag; all other bare tokens are long-form decoration."""
    tokens: list[object] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch == '"':
            i += 1
            parts = []
            while i < n:
                if text[i] == '"':
                    if i + 1 < n and text[i + 1] == '"':  # doubled quote escape
                        parts.append('"')
                        i += 2
                        continue
                    i += 1
                    break
                parts.append(text[i])
                i += 1
            else:
                raise FormatError("unterminated string in TextGrid")
            tokens.append(("str", "".join(parts)))
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] != '"':
                j += 1
            word = text[i:j]
            i = j
            if word in ("<exists>", "<absent>"):
                tokens.append(("flag", word))
            else:
                try:
                    tokens.append(("num", float(word)))
                except ValueError:
                    pass  # decoration: keys, brackets, '='
    return tokens


class _TokenReader:
    def __init__(self, tokens: list[object]):
        self.tokens = tokens
        self.pos = 0

    def _next(self, kind: str):
        while self.pos < len(self.tokens):
            tk, value = self.tokens[self.pos]
            self.pos += 1
            if tk == kind:
                return value
            if kind == "num" and tk == "flag":
                continue  # tiers? <exists> line
            raise FormatError(f"expected {kind} token, found {tk} {value!r}")
        raise FormatError("unexpected end of TextGrid")

    def number(self) -> float:
        return self._next("num")

    def string(self) -> str:
        return self._next("str")


def _parse_textgrid(text: str, tier_name: str) -> list[tuple[str, float, float]]:
    rd = _TokenReader(_tokenize(text))
    if rd.string() != "ooTextFile":
        raise FormatError("not an ooTextFile")
    if rd.string() != "TextGrid":
        raise FormatError("object class is not TextGrid")
    rd.number()  # file xmin
    rd.number()  # file xmax
    n_tiers = int(rd.number())
    found = None
    for _ in range(n_tiers):
        tier_class = rd.string()
        name = rd.string()
        rd.number()  # tier xmin
        rd.number()  # tier xmax
        size = int(rd.number())
        if tier_class == "IntervalTier":
            intervals = []
            for _ in range(size):
                lo = rd.number()
                hi = rd.number()
                label = rd.string()
                intervals.append((label.strip(), lo, hi))
            if name.lower() == tier_name:
                found = intervals
        elif tier_class == "TextTier":
            for _ in range(size):
                rd.number()
                rd.string()
        else:
            raise FormatError(f"unknown tier class {tier_class!r}")
    if found is None:
        raise FormatError(f"no interval tier named {tier_name!r}")
    return found


def _parse_json(text: str) -> list[tuple[str, float, float]]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"malformed JSON alignment: {exc}") from exc
    if not isinstance(doc, dict) or "phones" not in doc:
        raise FormatError('JSON alignment must be an object with a "phones" list')
    raw = []
    for item in doc["phones"]:
        try:
            raw.append((str(item["label"]), float(item["start"]), float(item["end"])))
        except (TypeError, KeyError) as exc:
            raise FormatError(f"bad phone entry {item!r}") from exc
    return raw


def parse_alignment(path: str | Path, tier_name: str = "phones") -> list[PhonemeInterval]:
    """Read a phoneme tier from a TextGrid (long or short) or JSON file.

    Returns sorted, non-overlapping intervals classified by kind. Silence
    intervals (labels "", "sil", "sp") are kept; segmentation into
    syllables happens downstream.
    """
    path = Path(path)
    try:
        text = path.read_text("utf-8-sig")
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: not UTF-8 text: {exc}") from exc
    stripped = text.lstrip()
    if stripped.startswith("{"):
        raw = _parse_json(text)
    elif stripped.startswith("File type"):
        raw = _parse_textgrid(text, tier_name.lower())
    else:
        raise FormatError(f"{path}: neither a TextGrid nor a JSON alignment")
    intervals = _finalize(raw)
    if not intervals:
        raise ValidationError(f"{path}: alignment tier is empty")
    return intervals
