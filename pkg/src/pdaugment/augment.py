"""End-to-end augmentation of single utterances.

The functional core is augment_utterance(): read audio and alignment,
group syllables, pick a note window, align, build pitch/duration plans
per the configured mode, and resynthesize. PDAugmenter and
RandomAugmenter wrap it behind a scikit-learn estimator surface
(fit validates configuration and snapshots the MIDI pool, transform maps
utterance inputs to results) so the augmenters compose with sklearn
tooling; the CLI and tests use the same core.

Determinism: every utterance derives its own generator from
(seed, utterance id) through SHA-256, so results do not depend on batch
order or worker scheduling.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .align import align_speech_notes
from .audio import Waveform, read_wav, resample
from .duration import apply_duration, compute_duration_plan, uniform_vowel_plan
from .errors import (
    EmptyScoreError,
    FormatError,
    InsufficientNotesError,
    MidiParseError,
    PDAugmentError,
    ValidationError,
)
from .midi import NoteSequence, load_melody, sample_note_window
from .pitch import (
    apply_pitch,
    build_pitch_plan,
    compute_global_shift,
    mean_note_pitch,
    mean_voiced_semitone,
)
from .syllables import syllabify
from .textgrid import parse_alignment
from .vocoder import F0Contour, analyze, synthesize

MODES = ("pdaugment", "pitch_only", "duration_only", "random")


@dataclass(frozen=True)
class UtteranceInput:
    utterance_id: str
    wav_path: str
    alignment_path: str
    midi_path: str | None = None


@dataclass
class AugmentResult:
    utterance_id: str
    waveform: Waveform
    meta: dict


@dataclass
class AugmentConfig:
    midi_pool_dir: str | None = None
    out_dir: str = "out"
    seed: int = 0
    mode: str = "pdaugment"
    ratio_low: float = 0.5
    ratio_high: float = 2.0
    shift_threshold: float = 5.0
    random_pitch_low: float = -6.0
    random_pitch_high: float = 6.0
    random_duration_low: float = 0.5
    random_duration_high: float = 1.2
    hop_s: float = 0.010
    f0_floor_hz: float = 50.0
    f0_ceil_hz: float = 1100.0
    min_vowel_s: float = 0.030
    scale_min: float = 0.25
    scale_max: float = 8.0
    sample_rate_hz: int = 16000
    midi_retries: int = 8
    copies: int = 1
    jobs: int = 1

    def validate(self) -> None:
        # Config-file values arrive with whatever type they parsed as;
        # reject wrong-typed fields before the range checks compare them.
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "midi_pool_dir":
                good = v is None or isinstance(v, str)
            elif f.name in ("mode", "out_dir"):
                good = isinstance(v, str)
            elif f.name in ("seed", "sample_rate_hz", "midi_retries", "copies", "jobs"):
                good = isinstance(v, int) and not isinstance(v, bool)
            else:
                good = isinstance(v, (int, float)) and not isinstance(v, bool)
            if not good:
                raise ValidationError(f"config {f.name}={v!r} has the wrong type")
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}, expected one of {MODES}")
        if not 0 < self.ratio_low < self.ratio_high:
            raise ValidationError(
                f"need 0 < ratio_low < ratio_high, got [{self.ratio_low}, {self.ratio_high}]")
        if self.random_pitch_low >= self.random_pitch_high:
            raise ValidationError("empty random pitch range")
        if not 0 < self.random_duration_low < self.random_duration_high:
            raise ValidationError("bad random duration range")
        if self.shift_threshold < 0:
            raise ValidationError("shift threshold must be non-negative")
        if not 0 < self.scale_min <= 1 <= self.scale_max:
            raise ValidationError("vowel scale bounds must straddle 1")
        if self.hop_s <= 0 or self.sample_rate_hz <= 0:
            raise ValidationError("hop and sample rate must be positive")
        if not 0 < self.f0_floor_hz < self.f0_ceil_hz:
            raise ValidationError("bad f0 search range")
        if self.copies < 1 or self.jobs < 1 or self.midi_retries < 1:
            raise ValidationError("copies, jobs and midi_retries must be >= 1")


def utterance_rng(seed: int, utterance_id: str) -> np.random.Generator:
    """Stable per-utterance generator from (seed, id) via SHA-256, so the
    draw sequence never depends on scheduling or platform hashing."""
    digest = hashlib.sha256(f"{seed}\x1f{utterance_id}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def discover_midi_pool(pool_dir: str | Path) -> list[Path]:
    pool = sorted(p for p in Path(pool_dir).iterdir()
                  if p.suffix.lower() in (".mid", ".midi"))
    if not pool:
        raise ValidationError(f"no MIDI files in pool directory {pool_dir}")
    return pool


def _draw_note_window(pool: list[str | Path], n_syllables: int,
                      rng: np.random.Generator, retries: int
                      ) -> tuple[NoteSequence, str]:
    last_err: PDAugmentError | None = None
    for _ in range(retries):
        path = Path(pool[int(rng.integers(len(pool)))])
        try:
            melody = load_melody(path)
            return sample_note_window(melody, n_syllables, rng), path.name
        except (InsufficientNotesError, EmptyScoreError,
                MidiParseError, FormatError) as exc:
            last_err = exc
    raise last_err


def augment_utterance(inp: UtteranceInput, cfg: AugmentConfig,
                      midi_pool: list[Path] | None = None) -> AugmentResult:
    """Run one utterance through the configured augmentation mode."""
    rng = utterance_rng(cfg.seed, inp.utterance_id)
    wav = read_wav(inp.wav_path)
    source_rate = wav.sample_rate_hz
    if source_rate != cfg.sample_rate_hz:
        wav = resample(wav, cfg.sample_rate_hz)
    tier = parse_alignment(inp.alignment_path)
    syllables = syllabify(tier)

    meta: dict = {
        "utterance_id": inp.utterance_id,
        "mode": cfg.mode,
        "global_seed": cfg.seed,
        "source": {
            "wav": str(inp.wav_path),
            "alignment": str(inp.alignment_path),
            "sample_rate_hz": source_rate,
            "duration_s": round(wav.duration_s, 6),
        },
        "n_syllables": len(syllables),
    }

    if cfg.mode == "random":
        pitch_offset = float(rng.uniform(cfg.random_pitch_low, cfg.random_pitch_high))
        duration_ratio = float(rng.uniform(cfg.random_duration_low,
                                           cfg.random_duration_high))
        meta["random_draws"] = {
            "pitch_offset_semitones": round(pitch_offset, 6),
            "duration_ratio": round(duration_ratio, 6),
        }
        noise_seed = int(rng.integers(2 ** 63))
        params = analyze(wav, cfg.hop_s, cfg.f0_floor_hz, cfg.f0_ceil_hz)
        shifted = np.where(
            params.f0.voiced,
            np.minimum(params.f0.f0_hz * 2.0 ** (pitch_offset / 12.0),
                       cfg.sample_rate_hz / 2.0 - 1.0), 0.0)
        params = replace(params, f0=F0Contour(shifted, params.f0.voiced.copy(),
                                              params.f0.hop_s))
        dplan = uniform_vowel_plan(syllables, duration_ratio,
                                   (cfg.scale_min, cfg.scale_max))
        params = apply_duration(params, dplan)
        meta["frames"] = {"in": len(shifted), "out": params.n_frames}
        out = synthesize(params, np.random.default_rng(noise_seed))
        return AugmentResult(inp.utterance_id, out, meta)

    if inp.midi_path:
        melody = load_melody(inp.midi_path)
        n_window = min(len(syllables), len(melody))
        notes = sample_note_window(melody, n_window, rng)
        midi_name = Path(inp.midi_path).name
    else:
        if midi_pool is None:
            if cfg.midi_pool_dir is None:
                raise ValidationError(
                    f"{inp.utterance_id}: no MIDI source (neither per-entry "
                    f"midi nor a pool directory)")
            midi_pool = discover_midi_pool(cfg.midi_pool_dir)
        notes, midi_name = _draw_note_window(midi_pool, len(syllables),
                                             rng, cfg.midi_retries)
    noise_seed = int(rng.integers(2 ** 63))

    pairs = align_speech_notes(syllables, notes, cfg.ratio_low, cfg.ratio_high)
    params = analyze(wav, cfg.hop_s, cfg.f0_floor_hz, cfg.f0_ceil_hz)
    frames_in = params.n_frames

    meta["midi"] = {"file": midi_name, "window": notes.source_id,
                    "n_notes": len(notes)}
    meta["pairs"] = [{
        "kind": p.kind,
        "syllables": list(p.syllable_indices),
        "notes": list(p.note_indices),
        "ratio": round(p.ratio, 6),
        "forced": p.forced,
    } for p in pairs]

    if cfg.mode in ("pdaugment", "pitch_only"):
        speech_mean = mean_voiced_semitone(params.f0)
        if speech_mean is None:
            raise ValidationError(f"{inp.utterance_id}: no voiced frames")
        shift = compute_global_shift(speech_mean, mean_note_pitch(notes),
                                     cfg.shift_threshold)
        plan = build_pitch_plan(params.f0, syllables, notes, pairs, shift)
        params = apply_pitch(params, plan)
        meta["pitch"] = {
            "speech_mean_semitones": round(speech_mean, 6),
            "note_mean_semitones": round(mean_note_pitch(notes), 6),
            "global_shift_semitones": shift,
        }

    if cfg.mode in ("pdaugment", "duration_only"):
        dplan = compute_duration_plan(syllables, notes, pairs, cfg.min_vowel_s,
                                      (cfg.scale_min, cfg.scale_max), cfg.hop_s)
        params = apply_duration(params, dplan)
        meta["duration"] = {
            "total_target_s": round(dplan.total_target_s, 6),
            "n_clamped_pairs": dplan.n_clamped,
            "warnings": list(dplan.warnings),
        }

    meta["frames"] = {"in": frames_in, "out": params.n_frames}
    out = synthesize(params, np.random.default_rng(noise_seed))
    return AugmentResult(inp.utterance_id, out, meta)


def _coerce_input(x) -> UtteranceInput:
    if isinstance(x, UtteranceInput):
        return x
    if isinstance(x, dict):
        return UtteranceInput(**x)
    return UtteranceInput(*x)


class PDAugmenter(BaseEstimator, TransformerMixin):
    """Score-guided pitch/duration augmenter with an estimator surface.

    fit() checks the configuration and snapshots the MIDI pool listing;
    transform() maps utterance inputs (UtteranceInput, dict, or tuple)
    to AugmentResult records. All parameters mirror AugmentConfig.
    """

    def __init__(self, midi_pool_dir=None, mode="pdaugment", seed=0,
                 ratio_low=0.5, ratio_high=2.0, shift_threshold=5.0,
                 min_vowel_s=0.030, scale_min=0.25, scale_max=8.0,
                 sample_rate_hz=16000, hop_s=0.010, midi_retries=8):
        self.midi_pool_dir = midi_pool_dir
        self.mode = mode
        self.seed = seed
        self.ratio_low = ratio_low
        self.ratio_high = ratio_high
        self.shift_threshold = shift_threshold
        self.min_vowel_s = min_vowel_s
        self.scale_min = scale_min
        self.scale_max = scale_max
        self.sample_rate_hz = sample_rate_hz
        self.hop_s = hop_s
        self.midi_retries = midi_retries

    def _config(self) -> AugmentConfig:
        return AugmentConfig(
            midi_pool_dir=self.midi_pool_dir, mode=self.mode, seed=self.seed,
            ratio_low=self.ratio_low, ratio_high=self.ratio_high,
            shift_threshold=self.shift_threshold, min_vowel_s=self.min_vowel_s,
            scale_min=self.scale_min, scale_max=self.scale_max,
            sample_rate_hz=self.sample_rate_hz, hop_s=self.hop_s,
            midi_retries=self.midi_retries)

    def fit(self, X=None, y=None):
        cfg = self._config()
        cfg.validate()
        self.config_ = cfg
        self.midi_pool_ = (discover_midi_pool(self.midi_pool_dir)
                           if self.midi_pool_dir else None)
        return self

    def transform(self, X) -> list[AugmentResult]:
        if not hasattr(self, "config_"):
            raise ValidationError("augmenter is not fitted; call fit() first")
        return [augment_utterance(_coerce_input(x), self.config_, self.midi_pool_)
                for x in X]


class RandomAugmenter(BaseEstimator, TransformerMixin):
    """Baseline augmenter: one uniform pitch offset and one uniform vowel
    duration ratio per utterance, no score guidance."""

    def __init__(self, seed=0, pitch_low=-6.0, pitch_high=6.0,
                 duration_low=0.5, duration_high=1.2,
                 sample_rate_hz=16000, hop_s=0.010):
        self.seed = seed
        self.pitch_low = pitch_low
        self.pitch_high = pitch_high
        self.duration_low = duration_low
        self.duration_high = duration_high
        self.sample_rate_hz = sample_rate_hz
        self.hop_s = hop_s

    def fit(self, X=None, y=None):
        cfg = AugmentConfig(
            mode="random", seed=self.seed,
            random_pitch_low=self.pitch_low, random_pitch_high=self.pitch_high,
            random_duration_low=self.duration_low,
            random_duration_high=self.duration_high,
            sample_rate_hz=self.sample_rate_hz, hop_s=self.hop_s)
        cfg.validate()
        self.config_ = cfg
        return self

    def transform(self, X) -> list[AugmentResult]:
        if not hasattr(self, "config_"):
            raise ValidationError("augmenter is not fitted; call fit() first")
        return [augment_utterance(_coerce_input(x), self.config_) for x in X]
