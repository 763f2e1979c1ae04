"""Shared fixture builders: tiny MIDI files, TextGrids, and synthetic
speech-like signals (harmonic vowels, noise consonants)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from pdaugment.audio import Waveform, write_wav
from pdaugment.textgrid import classify

SR = 16000


# ---------------------------------------------------------------- MIDI

def vlq(n: int) -> bytes:
    out = [n & 0x7F]
    n >>= 7
    while n:
        out.append(0x80 | (n & 0x7F))
        n >>= 7
    return bytes(reversed(out))


def midi_bytes(notes, tpq: int = 480, tempos=((0, 500000),),
               fmt: int = 1, channel: int = 0) -> bytes:
    """Single-track SMF. notes: (pitch, onset_tick, dur_tick) triples."""
    events = []  # (tick, order, payload) -- offs before ons at equal ticks
    for tick, us in tempos:
        events.append((tick, 0, b"\xff\x51\x03" + us.to_bytes(3, "big")))
    for pitch, onset, dur in notes:
        events.append((onset, 2, bytes([0x90 | channel, pitch, 64])))
        events.append((onset + dur, 1, bytes([0x80 | channel, pitch, 0])))
    events.sort(key=lambda e: (e[0], e[1]))
    body = b""
    t = 0
    for tick, _, payload in events:
        body += vlq(tick - t) + payload
        t = tick
    body += vlq(0) + b"\xff\x2f\x00"
    header = (b"MThd" + (6).to_bytes(4, "big") + fmt.to_bytes(2, "big")
              + (1).to_bytes(2, "big") + tpq.to_bytes(2, "big"))
    return header + b"MTrk" + len(body).to_bytes(4, "big") + body


def write_midi(path, durations_s, pitches, tempo: int = 500000,
               tpq: int = 480) -> Path:
    """Back-to-back melody; seconds are exact multiples of the tick."""
    tick_s = tempo * 1e-6 / tpq
    notes, t = [], 0
    for pitch, dur in zip(pitches, durations_s):
        ticks = int(round(dur / tick_s))
        notes.append((pitch, t, ticks))
        t += ticks
    path = Path(path)
    path.write_bytes(midi_bytes(notes, tpq, ((0, tempo),)))
    return path


# ----------------------------------------------------------- TextGrids

def tg_text(phones, tier: str = "phones") -> str:
    """Long-form TextGrid text. phones: (label, start_s, end_s) triples."""
    xmax = max(e for _, _, e in phones)
    lines = [
        'File type = "ooTextFile"',
        'Object class = "TextGrid"',
        "",
        "xmin = 0",
        f"xmax = {xmax}",
        "tiers? <exists>",
        "size = 1",
        "item []:",
        "    item [1]:",
        '        class = "IntervalTier"',
        f'        name = "{tier}"',
        "        xmin = 0",
        f"        xmax = {xmax}",
        f"        intervals: size = {len(phones)}",
    ]
    for i, (label, s, e) in enumerate(phones, 1):
        lines += [
            f"        intervals [{i}]:",
            f"            xmin = {s}",
            f"            xmax = {e}",
            f'            text = "{label}"',
        ]
    return "\n".join(lines) + "\n"


def tg_text_short(phones, tier: str = "phones") -> str:
    xmax = max(e for _, _, e in phones)
    lines = ['File type = "ooTextFile"', 'Object class = "TextGrid"', "",
             "0", str(xmax), "<exists>", "1",
             '"IntervalTier"', f'"{tier}"', "0", str(xmax), str(len(phones))]
    for label, s, e in phones:
        lines += [str(s), str(e), f'"{label}"']
    return "\n".join(lines) + "\n"


def write_textgrid(path, phones, tier: str = "phones") -> Path:
    path = Path(path)
    path.write_text(tg_text(phones, tier), "utf-8")
    return path


# ------------------------------------------------------------- signals

def harm_tone(f0: float, dur_s: float, sr: int = SR, seed: int = 0,
              wobble_cents: float = 12.0, n_harmonics: int = 12,
              amp: float = 0.25) -> np.ndarray:
    """Vowel-like tone: rolled-off harmonic stack with a slow pitch
    wobble and short edge fades."""
    rng = np.random.default_rng(seed)
    n = int(round(dur_s * sr))
    t = np.arange(n) / sr
    wob = wobble_cents / 1200.0 * np.sin(
        2 * np.pi * 2.3 * t + rng.uniform(0, 2 * np.pi))
    phase = 2 * np.pi * np.cumsum(f0 * 2.0 ** wob) / sr
    x = np.zeros(n)
    for k in range(1, n_harmonics + 1):
        if k * f0 > 0.45 * sr:
            break
        x += 0.75 ** (k - 1) * np.sin(k * phase + rng.uniform(0, 2 * np.pi))
    x *= amp / np.max(np.abs(x))
    fade = min(int(0.010 * sr), max(n // 4, 1))
    x[:fade] *= np.linspace(0.0, 1.0, fade)
    x[n - fade:] *= np.linspace(1.0, 0.0, fade)
    return x


def noise_burst(dur_s: float, sr: int = SR, seed: int = 1,
                amp: float = 0.04) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n = int(round(dur_s * sr))
    x = rng.normal(0.0, amp, n)
    fade = min(int(0.005 * sr), max(n // 4, 1))
    x[:fade] *= np.linspace(0.0, 1.0, fade)
    x[n - fade:] *= np.linspace(1.0, 0.0, fade)
    return x


def build_utterance(dir_: Path, uid: str, plan, f0: float = 170.0,
                    sr: int = SR, wobble_cents: float = 120.0
                    ) -> tuple[Path, Path]:
    """Render a phone plan [(label, dur_s), ...] to wav + TextGrid.

    Vowels become harmonic tones at f0 with a speech-like prosodic
    wobble, consonants noise bursts, silence labels digital zero.
    """
    segments, phones = [], []
    t = 0.0
    for i, (label, dur) in enumerate(plan):
        kind = classify(label)
        if kind == "vowel":
            segments.append(harm_tone(f0, dur, sr, seed=100 + i,
                                      wobble_cents=wobble_cents))
        elif kind == "consonant":
            segments.append(noise_burst(dur, sr, seed=200 + i))
        else:
            segments.append(np.zeros(int(round(dur * sr))))
        start = t
        t = round(t + dur, 6)
        phones.append((label, start, t))
    wav_path = dir_ / f"{uid}.wav"
    write_wav(Waveform(np.concatenate(segments), sr), wav_path)
    tg_path = write_textgrid(dir_ / f"{uid}.TextGrid", phones)
    return wav_path, tg_path


# ----------------------------------------------------- fixture corpora

SYLLABLE_SHAPES = [
    ("B", "AA1"), ("S", "IY1"), ("M", "OW1"), ("L", "UW1", "N"),
    ("T", "EH1"), ("N", "AY1"), ("D", "AH1"), ("K", "ER1"),
]


def utterance_plan(n_syllables: int, variant: int = 0):
    """Phone plan with n_syllables CV(C) syllables, varied durations."""
    plan = [("sil", 0.08)]
    for i in range(n_syllables):
        shape = SYLLABLE_SHAPES[(variant + i) % len(SYLLABLE_SHAPES)]
        for j, label in enumerate(shape):
            if classify(label) == "vowel":
                plan.append((label, round(0.18 + 0.04 * ((variant + i + j) % 4), 3)))
            else:
                plan.append((label, round(0.05 + 0.01 * ((variant + i) % 3), 3)))
    plan.append(("sil", 0.08))
    return plan


def make_corpus(dir_: Path, n_utterances: int = 20, with_clamp_case: bool = True):
    """Synthetic acceptance corpus: wav + TextGrid + per-utterance MIDI.

    Melodies have one note per syllable with durations 0.3-0.8 s and
    pitches near (sometimes far from) the speech register so the shift
    gate fires on some fixtures. Returns a list of entry dicts.
    """
    dir_.mkdir(parents=True, exist_ok=True)
    entries = []
    for u in range(n_utterances):
        uid = f"utt{u:02d}"
        n_syll = 2 + u % 5
        f0 = [120.0, 150.0, 175.0, 200.0, 230.0][u % 5]
        if with_clamp_case and u == 7:
            # long consonants against a short note force the vowel-scale
            # clamp: (0.20 - 0.18) / 0.20 falls below the 0.25 floor
            plan = [("sil", 0.08), ("S", 0.09), ("T", 0.09), ("AH1", 0.20),
                    ("B", 0.05), ("IY1", 0.22), ("sil", 0.08)]
            n_syll = 2
            note_durs = [0.2, 0.4]
        else:
            plan = utterance_plan(n_syll, variant=u)
            note_durs = [round(0.3 + 0.1 * ((u + k) % 6), 3)
                         for k in range(n_syll)]
        base = 12.0 * np.log2(f0 / 440.0) + 69.0
        pitches = [int(round(base)) + [0, 2, 4, -1, 7, 12][(u + k) % 6]
                   for k in range(n_syll)]
        if u % 4 == 3:  # push the note mean far enough to trip the gate
            pitches = [p + 9 for p in pitches]
        wav_path, tg_path = build_utterance(dir_, uid, plan, f0=f0)
        midi_path = write_midi(dir_ / f"{uid}.mid", note_durs, pitches)
        entries.append({
            "uid": uid, "wav": wav_path, "tg": tg_path, "midi": midi_path,
            "f0": f0, "note_durs": note_durs, "pitches": pitches,
        })
    return entries


def write_manifest(path: Path, entries, with_midi: bool = True) -> Path:
    lines = ["# id\twav\talignment\tmidi"]
    for e in entries:
        cols = [e["uid"], str(e["wav"]), str(e["tg"])]
        if with_midi:
            cols.append(str(e["midi"]))
        lines.append("\t".join(cols))
    path.write_text("\n".join(lines) + "\n", "utf-8")
    return path


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory) -> Path:
    return tmp_path_factory.mktemp("corpus")


@pytest.fixture(scope="session")
def corpus(corpus_dir):
    return make_corpus(corpus_dir, n_utterances=20)
