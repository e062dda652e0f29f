"""Audio decoding, canonicalization, framing, spectra, and level handling.

Clips are canonicalized to a single channel at a target rate (24 kHz by
default) before any analysis. Levels are RMS-referenced dBFS with full
scale at amplitude 1.0.
"""

from __future__ import annotations

import math
import wave
from dataclasses import dataclass
from math import gcd
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

DEFAULT_SAMPLE_RATE = 24000

#: Polyphase windowed-sinc resampler design: taps per phase and Kaiser beta.
RESAMPLE_TAPS_PER_PHASE = 64
RESAMPLE_KAISER_BETA = 12.0

WINDOW_KINDS = ("rectangular", "hann", "gaussian")


class AudioError(Exception):
    """Base class for audio-layer failures."""


class DecodeError(AudioError):
    """File unreadable, encoding unsupported, or stream empty/out of range."""


class SilentClipError(AudioError):
    """Operation needs a non-silent clip but every sample is zero."""


@dataclass(frozen=True, eq=False)
class AudioClip:
    """Mono sample buffer with its sample rate.

    Samples are float64 in [-1.0, 1.0] and frozen read-only so clips can
    be shared freely across workers.
    """

    samples: np.ndarray
    sample_rate: int
    source_id: str = ""

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("clip samples must be one-dimensional (mono)")
        if samples.size == 0:
            raise ValueError("clip must contain at least one sample")
        if int(self.sample_rate) <= 0:
            raise ValueError("sample rate must be a positive integer")
        if float(np.max(np.abs(samples))) > 1.0:
            raise ValueError("clip samples must lie within [-1.0, 1.0]")
        samples = np.ascontiguousarray(samples)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration_seconds(self) -> float:
        return self.samples.size / self.sample_rate

    def with_samples(self, samples: np.ndarray) -> "AudioClip":
        return AudioClip(samples, self.sample_rate, self.source_id)


@dataclass(frozen=True, eq=False)
class FrameSeries:
    """Windowed, hop-spaced frames covering a clip.

    Iterating yields ``(start_time_s, windowed_block)`` pairs. The final
    partial frame, if any, is zero-padded to the full frame length.
    """

    starts: np.ndarray
    frames: np.ndarray
    frame_length: float
    hop: float
    window: str

    def __post_init__(self) -> None:
        if self.hop <= 0:
            raise ValueError("hop must be positive")
        if self.frame_length < self.hop:
            raise ValueError("frame_length must be >= hop")
        if self.window not in WINDOW_KINDS:
            raise ValueError(f"unknown window kind: {self.window!r}")
        if np.any(np.diff(self.starts) <= 0):
            raise ValueError("frame starts must be strictly increasing")

    def __len__(self) -> int:
        return len(self.starts)

    def __iter__(self):
        return zip(self.starts, self.frames)

    def __getitem__(self, i):
        return self.starts[i], self.frames[i]


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Discrete Fourier magnitudes for bins 0..N/2 of one frame."""

    bin_frequencies: np.ndarray
    magnitudes: np.ndarray

    def __post_init__(self) -> None:
        if np.any(np.diff(self.bin_frequencies) <= 0):
            raise ValueError("bin frequencies must be strictly increasing")
        if np.any(self.magnitudes < 0):
            raise ValueError("magnitudes must be non-negative")


def window_coefficients(kind: str, length: int) -> np.ndarray:
    """Window taps by kind: rectangular, symmetric Hann, or Gaussian.

    The Gaussian is the edge-normalized form common in phonetics tools:
    exp(-12 u^2) rescaled so the edges hit zero.
    """
    if kind == "rectangular":
        return np.ones(length)
    if kind == "hann":
        return np.hanning(length)
    if kind == "gaussian":
        u = np.linspace(-1.0, 1.0, length)
        edge = math.exp(-12.0)
        return (np.exp(-12.0 * u * u) - edge) / (1.0 - edge)
    raise ValueError(f"unknown window kind: {kind!r}")


def _decode_to_float(data: np.ndarray) -> np.ndarray:
    """Scale integer PCM to [-1, 1]; validate float data is already there."""
    if data.dtype == np.uint8:
        return (data.astype(np.float64) - 128.0) / 128.0
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0
    if data.dtype == np.int32:
        # scipy left-aligns 24-bit samples into int32, so one scale works
        return data.astype(np.float64) / 2147483648.0
    if data.dtype in (np.float32, np.float64):
        out = data.astype(np.float64)
        if out.size and float(np.max(np.abs(out))) > 1.0:
            raise DecodeError("float PCM samples exceed full scale (clipped decode)")
        return out
    raise DecodeError(f"unsupported WAV sample format: {data.dtype}")


def _resample(samples: np.ndarray, rate_in: int, rate_out: int) -> np.ndarray:
    """Polyphase windowed-sinc resampling (Kaiser-windowed, 64 taps/phase)."""
    if rate_in == rate_out:
        return samples
    g = gcd(rate_in, rate_out)
    up, down = rate_out // g, rate_in // g
    taps = RESAMPLE_TAPS_PER_PHASE * up
    m = np.arange(taps) - (taps - 1) / 2.0
    cutoff = min(1.0 / up, 1.0 / down)
    h = cutoff * np.sinc(cutoff * m) * np.kaiser(taps, RESAMPLE_KAISER_BETA)
    out = resample_poly(samples, up, down, window=h)
    # bandlimited interpolation can overshoot full scale slightly
    return np.clip(out, -1.0, 1.0)


def load_clip(path: str | Path, target_rate: int = DEFAULT_SAMPLE_RATE) -> AudioClip:
    """Decode a PCM WAV file to a mono clip at ``target_rate``.

    Channels are averaged to mono and the signal is resampled with a
    polyphase windowed-sinc interpolator. Duration is preserved within
    one output sample.

    Raises DecodeError for unreadable files, unsupported encodings, or
    zero-length streams.
    """
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    try:
        rate, data = wavfile.read(str(path))
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise DecodeError(f"cannot decode WAV file {path}: {exc}") from exc
    if data.size == 0:
        raise DecodeError(f"zero-length audio stream: {path}")
    samples = _decode_to_float(data)
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    elif samples.ndim != 1:
        raise DecodeError(f"unsupported channel layout in {path}")
    samples = _resample(samples, int(rate), int(target_rate))
    if samples.size == 0:
        raise DecodeError(f"resampling produced an empty stream: {path}")
    return AudioClip(samples, target_rate, source_id=str(path))


def save_clip(clip: AudioClip, path: str | Path) -> None:
    """Write a clip back as 16-bit mono PCM WAV at its sample rate."""
    pcm = np.clip(clip.samples, -1.0, 1.0)
    pcm16 = np.round(pcm * 32767.0).astype(np.int16)
    with wave.open(str(path), "wb") as out:
        out.setnchannels(1)
        out.setsampwidth(2)
        out.setframerate(clip.sample_rate)
        out.writeframes(pcm16.tobytes())


def frame_signal(
    clip: AudioClip, frame_length: float, hop: float, window: str = "rectangular"
) -> FrameSeries:
    """Slice a clip into hop-spaced windowed frames covering every sample.

    Raises ValueError if the clip is shorter than one frame.
    """
    if frame_length <= 0 or hop <= 0:
        raise ValueError("frame_length and hop must be positive")
    fs = clip.sample_rate
    n = clip.samples.size
    flen = int(round(frame_length * fs))
    fhop = int(round(hop * fs))
    if flen < 1 or fhop < 1:
        raise ValueError("frame_length and hop must span at least one sample")
    if n < flen:
        raise ValueError("clip is shorter than one frame")
    n_frames = max(1, math.ceil((n - flen) / fhop) + 1)
    padded_len = (n_frames - 1) * fhop + flen
    x = np.zeros(padded_len)
    x[:n] = clip.samples
    idx = np.arange(flen)[None, :] + (np.arange(n_frames) * fhop)[:, None]
    frames = x[idx] * window_coefficients(window, flen)[None, :]
    starts = np.arange(n_frames) * fhop / fs
    return FrameSeries(starts, frames, frame_length, hop, window)


def magnitude_spectrum(frame: np.ndarray, sample_rate: int) -> Spectrum:
    """Magnitudes of the DFT of one windowed block, bins 0..N/2."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.size == 0:
        raise ValueError("cannot take the spectrum of an empty block")
    mags = np.abs(np.fft.rfft(frame))
    freqs = np.fft.rfftfreq(frame.size, d=1.0 / sample_rate)
    return Spectrum(freqs, mags)


def measure_dbfs(clip: AudioClip) -> float:
    """RMS level in dBFS, full-scale reference amplitude 1.0."""
    mean_square = float(np.mean(clip.samples * clip.samples))
    if mean_square == 0.0:
        raise SilentClipError("cannot measure the level of an all-zero clip")
    return 10.0 * math.log10(mean_square)


def apply_gain_to_dbfs(clip: AudioClip, target_dbfs: float) -> tuple[AudioClip, bool]:
    """Scale a clip so its RMS level hits ``target_dbfs``.

    Returns ``(clip, clipped)``. When the required gain would push a
    sample past full scale the output is peak-limited to 1.0 and the
    clipping flag is True (the RMS target is then not guaranteed).
    """
    current = measure_dbfs(clip)
    gain = 10.0 ** ((target_dbfs - current) / 20.0)
    scaled = clip.samples * gain
    clipped = bool(np.max(np.abs(scaled)) > 1.0)
    if clipped:
        scaled = np.clip(scaled, -1.0, 1.0)
    return clip.with_samples(scaled), clipped
