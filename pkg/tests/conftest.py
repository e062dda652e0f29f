"""Shared synthesis helpers for the test suite.

All fixtures are deterministic: seeded RNGs, exact sample counts.
"""

from __future__ import annotations

import struct
import wave
from pathlib import Path

import numpy as np
import pytest

from voiceadapt.audio import AudioClip

FS = 24000


def sine(freq: float, duration: float, amp: float = 0.5, fs: int = FS) -> np.ndarray:
    t = np.arange(int(round(duration * fs))) / fs
    return amp * np.sin(2.0 * np.pi * freq * t)


def sawtooth(f0: float, duration: float, amp: float = 0.4, fs: int = FS) -> np.ndarray:
    t = np.arange(int(round(duration * fs))) / fs
    return amp * (2.0 * ((f0 * t) % 1.0) - 1.0)


def silence(duration: float, fs: int = FS) -> np.ndarray:
    return np.zeros(int(round(duration * fs)))


def harmonic_comb(f0: float, duration: float, top_hz: float = 8000.0, fs: int = FS) -> np.ndarray:
    """Harmonics of f0 with amplitude 1/k: a -6.02 dB/octave line spectrum."""
    t = np.arange(int(round(duration * fs))) / fs
    x = np.zeros_like(t)
    k = 1
    while k * f0 <= top_hz:
        x += np.sin(2.0 * np.pi * k * f0 * t) / k
        k += 1
    return 0.8 * x / np.max(np.abs(x))


def burst_fixture(fs: int = FS) -> AudioClip:
    """Speech-like clip: three 180 Hz sawtooth bursts, one 100 ms gap
    (a pause) and one 30 ms gap (too short to count)."""
    parts = [
        sawtooth(180.0, 0.4, fs=fs),
        silence(0.10, fs=fs),
        sawtooth(180.0, 0.35, fs=fs),
        silence(0.03, fs=fs),
        sawtooth(180.0, 0.4, fs=fs),
    ]
    return AudioClip(np.concatenate(parts), fs, source_id="burst-fixture")


def clip_of(samples: np.ndarray, fs: int = FS) -> AudioClip:
    return AudioClip(samples, fs)


def write_wav_int16(path: Path, rate: int, channels: np.ndarray) -> None:
    """channels: (n_samples,) or (n_samples, n_channels) float in [-1, 1]."""
    data = np.atleast_2d(channels.T).T
    pcm = np.round(np.clip(data, -1.0, 1.0) * 32767.0).astype(np.int16)
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(pcm.shape[1] if pcm.ndim == 2 else 1)
        fh.setsampwidth(2)
        fh.setframerate(rate)
        fh.writeframes(pcm.astype("<i2").tobytes())


def write_wav_float32(path: Path, rate: int, samples: np.ndarray) -> None:
    from scipy.io import wavfile

    wavfile.write(str(path), rate, samples.astype(np.float32))


def write_wav_int24(path: Path, rate: int, samples: np.ndarray) -> None:
    ints = np.clip(np.round(samples * (2**23)), -(2**23), 2**23 - 1).astype(np.int64)
    raw = b"".join(struct.pack("<i", int(v) << 8)[1:4] for v in ints)
    with open(path, "wb") as fh:
        fh.write(b"RIFF" + struct.pack("<I", 36 + len(raw)) + b"WAVE")
        fh.write(b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, rate, rate * 3, 3, 24))
        fh.write(b"data" + struct.pack("<I", len(raw)) + raw)


def write_wav_uint8(path: Path, rate: int, samples: np.ndarray) -> None:
    pcm = np.clip(np.round(samples * 127.0) + 128.0, 0, 255).astype(np.uint8)
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(1)
        fh.setframerate(rate)
        fh.writeframes(pcm.tobytes())


@pytest.fixture
def tone_clip() -> AudioClip:
    return clip_of(sine(220.0, 2.0))
