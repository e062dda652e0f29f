"""The eleven per-clip vocal features.

Three loudness features (mean intensity, energy, maximum intensity), five
spectral features (median pitch, pitch range, shimmer, jitter, spectral
slope), and three rate-of-speech features (voiced and overall syllables
per second, pause rate). Pitch-dependent features are explicitly absent
(None) when a clip has no usable voiced frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from voiceadapt.audio import AudioClip, SilentClipError, window_coefficients
from voiceadapt.prosody import (
    INTENSITY_REF_POWER,
    AnalysisConfig,
    IntensityContour,
    PitchTrack,
    SilenceMap,
    SyllableNuclei,
    detect_silences,
    detect_syllable_nuclei,
    intensity_contour,
    track_pitch,
)

#: Canonical feature order for tables and CSV columns.
FEATURE_NAMES = (
    "mean_intensity_db",
    "energy",
    "max_intensity_db",
    "median_pitch_hz",
    "pitch_range_hz",
    "shimmer_local",
    "jitter_local",
    "spectral_slope_db_per_octave",
    "voiced_syll_per_sec",
    "overall_syll_per_sec",
    "pause_rate",
)

#: Consecutive periods whose ratio exceeds this are treated as track
#: glitches and skipped by jitter/shimmer.
PERIOD_RATIO_LIMIT = 1.3

#: Spectral-slope regression band (Hz).
SLOPE_BAND_LOW_HZ = 50.0
SLOPE_BAND_HIGH_HZ = 8000.0


@dataclass(frozen=True)
class FeatureVector:
    """The eleven features for one clip; optional fields are None when the
    clip has no voiced frames (or no usable period pairs)."""

    mean_intensity_db: float
    energy: float
    max_intensity_db: float
    median_pitch_hz: float | None
    pitch_range_hz: float | None
    jitter_local: float | None
    shimmer_local: float | None
    spectral_slope_db_per_octave: float | None
    voiced_syll_per_sec: float
    overall_syll_per_sec: float
    pause_rate: float

    def __post_init__(self) -> None:
        for name in FEATURE_NAMES:
            value = getattr(self, name)
            if value is not None and not math.isfinite(value):
                raise ValueError(f"feature {name} must be finite, got {value!r}")
        if self.pitch_range_hz is not None and self.pitch_range_hz < 0:
            raise ValueError("pitch_range_hz must be >= 0")
        for name in ("jitter_local", "shimmer_local"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.pause_rate < 0:
            raise ValueError("pause_rate must be >= 0")
        if self.voiced_syll_per_sec < self.overall_syll_per_sec:
            raise ValueError("voiced rate cannot be below overall rate")

    def as_dict(self) -> dict[str, float | None]:
        return {name: getattr(self, name) for name in FEATURE_NAMES}


def loudness_features(
    clip: AudioClip, contour: IntensityContour, silences: SilenceMap
) -> tuple[float, float, float]:
    """(mean_intensity_db, energy, max_intensity_db).

    Mean intensity averages linear frame powers over non-silent frames;
    energy integrates squared samples over the whole clip.
    """
    level = contour.level_db
    finite = np.isfinite(level)
    if not np.any(finite):
        raise SilentClipError("loudness features are undefined for a silent clip")
    peak = float(level[finite].max())
    selected = level >= (peak - silences.threshold_db)
    powers = INTENSITY_REF_POWER * 10.0 ** (level[selected] / 10.0)
    mean_intensity = 10.0 * math.log10(float(np.mean(powers)) / INTENSITY_REF_POWER)
    energy = float(np.sum(clip.samples * clip.samples)) / clip.sample_rate
    return mean_intensity, energy, peak


def _voiced_runs(voiced: np.ndarray) -> list[tuple[int, int]]:
    runs = []
    i = 0
    n = voiced.size
    while i < n:
        if not voiced[i]:
            i += 1
            continue
        j = i
        while j < n and voiced[j]:
            j += 1
        runs.append((i, j))
        i = j
    return runs


def _perturbation(
    values: np.ndarray, periods: np.ndarray
) -> tuple[float, float, int] | None:
    """mean |consecutive difference| of ``values`` over mean value, pairing
    only where consecutive periods stay within PERIOD_RATIO_LIMIT.

    Returns (numerator, denominator, n_pairs) or None when no pair
    qualifies.
    """
    if values.size < 2:
        return None
    ratio = np.maximum(periods[1:], periods[:-1]) / np.minimum(periods[1:], periods[:-1])
    ok = ratio <= PERIOD_RATIO_LIMIT
    if not np.any(ok):
        return None
    diffs = np.abs(np.diff(values))[ok]
    used = np.zeros(values.size, dtype=bool)
    idx = np.nonzero(ok)[0]
    used[idx] = True
    used[idx + 1] = True
    return float(np.mean(diffs)), float(np.mean(values[used])), int(diffs.size)


def _frame_rms(clip: AudioClip, center: float, width: float) -> float:
    """Window-weighted RMS of the analysis frame at ``center``.

    The taper keeps partial fundamental periods at the frame edges from
    rippling the estimate on steady signals.
    """
    fs = clip.sample_rate
    lo = max(0, int(round((center - width / 2.0) * fs)))
    hi = min(clip.samples.size, lo + int(round(width * fs)))
    block = clip.samples[lo:hi]
    if block.size == 0:
        return 0.0
    w = window_coefficients("hann", block.size)
    wsq = float(np.dot(w, w))
    if wsq == 0.0:
        return 0.0
    xw = block * w
    return float(np.sqrt(np.dot(xw, xw) / wsq))


def _frame_slope(clip: AudioClip, center: float, width: float) -> float | None:
    """Least-squares slope of dB magnitude against log2 frequency for one
    analysis frame, over the 50 Hz - 8 kHz band."""
    fs = clip.sample_rate
    n = int(round(width * fs))
    lo = max(0, int(round((center - width / 2.0) * fs)))
    hi = min(clip.samples.size, lo + n)
    block = clip.samples[lo:hi]
    if block.size < 8:
        return None
    mags = np.abs(np.fft.rfft(block * window_coefficients("hann", block.size)))
    freqs = np.fft.rfftfreq(block.size, d=1.0 / fs)
    band = (freqs >= SLOPE_BAND_LOW_HZ) & (freqs <= min(SLOPE_BAND_HIGH_HZ, fs / 2.0))
    band &= mags > 0
    if np.count_nonzero(band) < 2:
        return None
    x = np.log2(freqs[band])
    y = 20.0 * np.log10(mags[band])
    x = x - x.mean()
    denom = float(np.dot(x, x))
    if denom == 0.0:
        return None
    return float(np.dot(x, y - y.mean()) / denom)


def spectral_features(
    clip: AudioClip, pitch: PitchTrack, silences: SilenceMap
) -> tuple[float | None, float | None, float | None, float | None, float | None]:
    """(median_pitch_hz, pitch_range_hz, jitter_local, shimmer_local,
    spectral_slope_db_per_octave); all None when nothing is voiced."""
    voiced = pitch.voiced
    if not np.any(voiced):
        return None, None, None, None, None

    outside = np.array(
        [v and not silences.contains(float(t)) for v, t in zip(voiced, pitch.times)]
    )
    median_pitch = pitch_range = None
    if np.any(outside):
        f0 = pitch.f0[outside]
        median_pitch = float(np.median(f0))
        pitch_range = float(f0.max() - f0.min())

    jitter_parts: list[tuple[float, float, int]] = []
    shimmer_parts: list[tuple[float, float, int]] = []
    slopes: list[float] = []
    for i, j in _voiced_runs(voiced):
        periods = 1.0 / pitch.f0[i:j]
        jp = _perturbation(periods, periods)
        if jp is not None:
            jitter_parts.append(jp)
        amps = np.array(
            [_frame_rms(clip, float(t), pitch.frame_length) for t in pitch.times[i:j]]
        )
        sp = _perturbation(amps, periods)
        if sp is not None:
            shimmer_parts.append(sp)
        for t in pitch.times[i:j]:
            slope = _frame_slope(clip, float(t), pitch.frame_length)
            if slope is not None:
                slopes.append(slope)

    def combine(parts: list[tuple[float, float, int]]) -> float | None:
        if not parts:
            return None
        total = sum(n for _, _, n in parts)
        num = sum(d * n for d, _, n in parts) / total
        den = sum(m * n for _, m, n in parts) / total
        return num / den if den > 0 else None

    jitter = combine(jitter_parts)
    shimmer = combine(shimmer_parts)
    slope = float(np.mean(slopes)) if slopes else None
    return median_pitch, pitch_range, jitter, shimmer, slope


def rate_features(
    contour: IntensityContour,
    silences: SilenceMap,
    nuclei: SyllableNuclei,
    clip_duration: float,
) -> tuple[float, float, float]:
    """(voiced_syll_per_sec, overall_syll_per_sec, pause_rate)."""
    if clip_duration <= 0:
        raise ValueError("clip_duration must be positive")
    voiced_duration = clip_duration - silences.total_pause_seconds()
    count = nuclei.count
    if count > 0 and voiced_duration <= 0:
        raise ValueError("nuclei reported inside a fully-silent clip")
    voiced_rate = count / voiced_duration if voiced_duration > 0 else 0.0
    overall_rate = count / clip_duration
    pause_rate = len(silences.pauses) / clip_duration
    return voiced_rate, overall_rate, pause_rate


def extract_features(clip: AudioClip, cfg: AnalysisConfig | None = None) -> FeatureVector:
    """Run the full per-clip analysis stack and assemble the feature vector.

    Deterministic for identical input samples and config. Raises
    SilentClipError for an all-zero clip and propagates the too-short
    error from pitch analysis.
    """
    cfg = cfg or AnalysisConfig()
    contour = intensity_contour(clip, cfg)
    silences = detect_silences(contour, cfg)
    mean_db, energy, max_db = loudness_features(clip, contour, silences)
    pitch = track_pitch(clip, cfg)
    nuclei = detect_syllable_nuclei(contour, pitch, silences, cfg)
    median_pitch, pitch_range, jitter, shimmer, slope = spectral_features(
        clip, pitch, silences
    )
    voiced_rate, overall_rate, pause_rate = rate_features(
        contour, silences, nuclei, clip.duration_seconds
    )
    return FeatureVector(
        mean_intensity_db=mean_db,
        energy=energy,
        max_intensity_db=max_db,
        median_pitch_hz=median_pitch,
        pitch_range_hz=pitch_range,
        jitter_local=jitter,
        shimmer_local=shimmer,
        spectral_slope_db_per_octave=slope,
        voiced_syll_per_sec=voiced_rate,
        overall_syll_per_sec=overall_rate,
        pause_rate=pause_rate,
    )
