"""Mono PCM audio I/O and resampling.

Canonical internal format is mono float64 in [-1, 1] at 16 kHz; the batch
front-end resamples on ingest. Multichannel files are rejected rather than
downmixed so alignment timing assumptions cannot be corrupted silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .errors import FormatError, UnsupportedChannelError, ValidationError

CANONICAL_RATE_HZ = 16000

_INT16_SCALE = 32768.0


@dataclass
class Waveform:
    """Mono audio buffer: float samples plus a sample rate."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise UnsupportedChannelError(
                f"expected mono audio, got shape {self.samples.shape}"
            )
        if self.sample_rate_hz <= 0:
            raise ValidationError(f"sample rate must be positive, got {self.sample_rate_hz}")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz

    def __len__(self) -> int:
        return len(self.samples)


def read_wav(path: str | Path) -> Waveform:
    """Read a mono RIFF/WAVE file (16-bit PCM or IEEE float).

    Raises FormatError on malformed or unsupported encodings and
    UnsupportedChannelError for anything that is not single-channel.
    """
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            magic = fh.read(4)
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if magic != b"RIFF":
        raise FormatError(f"{path}: not a RIFF/WAVE file")
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise FormatError(f"{path}: malformed WAVE file: {exc}") from exc
    if data.ndim != 1:
        raise UnsupportedChannelError(
            f"{path}: {data.shape[1]} channels; only mono input is supported"
        )
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / _INT16_SCALE
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise FormatError(
            f"{path}: unsupported sample format {data.dtype}; "
            "expected 16-bit PCM or IEEE float"
        )
    if len(samples) == 0:
        raise FormatError(f"{path}: file contains no samples")
    return Waveform(samples, int(rate))


def write_wav(w: Waveform, path: str | Path) -> int:
    """Write 16-bit PCM little-endian. Returns the number of clipped samples.

    Samples outside [-1, 1] are clipped to full scale; the count is returned
    so callers can record it.
    """
    if len(w.samples) == 0:
        raise ValidationError("refusing to write an empty waveform")
    if not np.all(np.isfinite(w.samples)):
        raise ValidationError("waveform contains non-finite samples")
    clipped = np.clip(w.samples, -1.0, 1.0)
    n_clipped = int(np.count_nonzero(clipped != w.samples))
    # same scale as read_wav so a round trip stays within one
    # quantization step; +1.0 lands on the clip rail
    pcm = np.clip(np.round(clipped * _INT16_SCALE),
                  -_INT16_SCALE, _INT16_SCALE - 1).astype(np.int16)
    try:
        wavfile.write(Path(path), w.sample_rate_hz, pcm)
    except OSError as exc:
        raise FormatError(f"cannot write {path}: {exc}") from exc
    return n_clipped


def resample(w: Waveform, target_rate_hz: int) -> Waveform:
    """Band-limited (polyphase) resampling; duration preserved within 1 sample."""
    if not 8000 <= target_rate_hz <= 48000:
        raise ValidationError(f"target rate {target_rate_hz} outside [8000, 48000]")
    if target_rate_hz == w.sample_rate_hz:
        return Waveform(w.samples.copy(), w.sample_rate_hz)
    g = math.gcd(target_rate_hz, w.sample_rate_hz)
    up, down = target_rate_hz // g, w.sample_rate_hz // g
    out = resample_poly(w.samples, up, down)
    return Waveform(out, target_rate_hz)
