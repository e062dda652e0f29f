"""Per-clip prosodic decompositions: pitch, intensity, pauses, nuclei.

Pitch tracking follows the classic normalized-autocorrelation design:
the windowed frame's autocorrelation is divided by the window's own
autocorrelation, candidate lags are refined by parabolic interpolation,
and a lowest-cost path over per-frame candidates removes octave jumps.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from voiceadapt.audio import AudioClip, frame_signal, window_coefficients

#: Intensity analysis window (s); also the effective floor on detectable pauses.
INTENSITY_FRAME_S = 0.05

#: dB offset mapping mean-square sample power to an SPL-like scale
#: (10*log10(1/1e-10) = 100 dB for a full-scale constant signal). Only
#: differences of dB matter downstream, so the reference is inert.
INTENSITY_REF_POWER = 1e-10

#: Pitch-path smoothing: cost per octave jumped between adjacent frames.
OCTAVE_JUMP_COST = 0.35

#: Slight preference for higher-frequency candidates, per octave above the
#: pitch floor. Breaks the tie between a period and its multiples, which
#: score identically on a perfectly periodic signal.
OCTAVE_BIAS = 0.01

#: Candidates kept per frame for the smoothing path.
MAX_CANDIDATES = 4


class GridMismatchError(ValueError):
    """Analyses passed together were computed on different time grids."""


@dataclass(frozen=True)
class AnalysisConfig:
    """Prosody analysis parameters; defaults follow common phonetics practice."""

    pitch_floor: float = 75.0
    pitch_ceiling: float = 600.0
    hop: float = 0.01
    voicing_threshold: float = 0.45
    silence_threshold_db: float = 25.0
    min_pause: float = 0.05
    nucleus_dip_db: float = 2.0

    def __post_init__(self) -> None:
        if not 0 < self.pitch_floor < self.pitch_ceiling:
            raise ValueError("need 0 < pitch_floor < pitch_ceiling")
        if self.hop <= 0:
            raise ValueError("hop must be positive")
        if self.min_pause <= 0:
            raise ValueError("min_pause must be positive")
        if self.silence_threshold_db <= 0:
            raise ValueError("silence_threshold_db must be positive")
        if self.nucleus_dip_db <= 0:
            raise ValueError("nucleus_dip_db must be positive")

    @property
    def pitch_frame_length(self) -> float:
        """Analysis window: three periods of the pitch floor."""
        return 3.0 / self.pitch_floor


@dataclass(frozen=True, eq=False)
class PitchTrack:
    """Frame-wise fundamental frequency estimates on a uniform hop grid.

    Unvoiced frames carry NaN in both ``f0`` and ``strength``.
    """

    times: np.ndarray
    f0: np.ndarray
    strength: np.ndarray
    hop: float
    frame_length: float

    def __post_init__(self) -> None:
        if self.times.size and np.any(np.diff(self.times) <= 0):
            raise ValueError("track times must be strictly increasing")
        if not (self.times.size == self.f0.size == self.strength.size):
            raise ValueError("times, f0, and strength must be the same length")

    @property
    def voiced(self) -> np.ndarray:
        return ~np.isnan(self.f0)

    @property
    def voiced_f0(self) -> np.ndarray:
        return self.f0[self.voiced]


@dataclass(frozen=True, eq=False)
class IntensityContour:
    """Frame-wise dB levels; zero-power frames carry -inf."""

    times: np.ndarray
    level_db: np.ndarray
    hop: float
    frame_length: float
    clip_duration: float

    def __post_init__(self) -> None:
        if self.times.size == 0:
            raise ValueError("contour must contain at least one frame")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("contour times must be strictly increasing")
        if self.times.size != self.level_db.size:
            raise ValueError("times and level_db must be the same length")

    @property
    def peak_level_db(self) -> float:
        finite = self.level_db[np.isfinite(self.level_db)]
        return float(finite.max()) if finite.size else -math.inf


@dataclass(frozen=True)
class SilenceMap:
    """Pauses (start, end) detected below a peak-relative level threshold."""

    pauses: tuple[tuple[float, float], ...]
    min_pause: float
    threshold_db: float

    def __post_init__(self) -> None:
        prev_end = -math.inf
        for start, end in self.pauses:
            if start < prev_end:
                raise ValueError("pauses must be ordered and non-overlapping")
            if end - start < self.min_pause:
                raise ValueError("every pause must last at least min_pause")
            prev_end = end

    def total_pause_seconds(self) -> float:
        return sum(end - start for start, end in self.pauses)

    def contains(self, t: float, eps: float = 1e-9) -> bool:
        """Interval membership with a nanosecond guard against the float
        rounding of frame-grid arithmetic."""
        return any(start - eps <= t <= end + eps for start, end in self.pauses)


@dataclass(frozen=True, eq=False)
class SyllableNuclei:
    """Times of detected syllable nuclei."""

    nucleus_times: np.ndarray

    @property
    def count(self) -> int:
        return int(self.nucleus_times.size)


def _next_pow2(n: int) -> int:
    return 1 << (n - 1).bit_length()


def _parabolic_refine(y: np.ndarray, i: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Refine integer peak positions by fitting a parabola to 3 points."""
    y0, ym, yp = y[i], y[i - 1], y[i + 1]
    denom = ym - 2.0 * y0 + yp
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.where(denom < 0, 0.5 * (ym - yp) / denom, 0.0)
    delta = np.clip(delta, -0.5, 0.5)
    height = y0 - 0.25 * (ym - yp) * delta
    return i + delta, height


def _frame_starts(n_samples: int, flen: int, fhop: int) -> np.ndarray:
    """Start indices of all full frames (no padding)."""
    if n_samples < flen:
        return np.empty(0, dtype=int)
    count = (n_samples - flen) // fhop + 1
    return np.arange(count) * fhop


def track_pitch(clip: AudioClip, cfg: AnalysisConfig) -> PitchTrack:
    """Autocorrelation pitch track with octave-jump path smoothing.

    A frame is voiced when its best normalized-autocorrelation peak is at
    least ``cfg.voicing_threshold`` and its level is within
    ``cfg.silence_threshold_db`` of the loudest frame. Among the top
    candidates per frame, the returned f0 follows the lowest-cost path
    with a jump cost of 0.35 per octave between adjacent frames.

    Raises ValueError when the clip is shorter than one analysis window.
    """
    fs = clip.sample_rate
    flen = int(round(cfg.pitch_frame_length * fs))
    fhop = max(1, int(round(cfg.hop * fs)))
    if clip.samples.size < flen:
        raise ValueError("clip too short for pitch analysis (needs 3/pitch_floor s)")

    starts = _frame_starts(clip.samples.size, flen, fhop)
    frames = np.lib.stride_tricks.sliding_window_view(clip.samples, flen)[::fhop]
    frames = np.ascontiguousarray(frames, dtype=np.float64)

    lag_min = max(2, int(math.floor(fs / cfg.pitch_ceiling)))
    lag_max = int(math.ceil(fs / cfg.pitch_floor))
    max_lag = lag_max + 1
    nfft = _next_pow2(int(math.ceil(flen * 1.5)))

    window = window_coefficients("hann", flen)
    wspec = np.fft.rfft(window, nfft)
    wacf = np.fft.irfft(wspec.real**2 + wspec.imag**2, nfft)[: max_lag + 1]
    wacf /= wacf[0]

    power = np.mean(frames * frames, axis=1)
    with np.errstate(divide="ignore"):
        level_db = 10.0 * np.log10(power / INTENSITY_REF_POWER)
    loud_enough = np.zeros(len(frames), dtype=bool)
    finite = np.isfinite(level_db)
    if np.any(finite):
        loud_enough = level_db >= (level_db[finite].max() - cfg.silence_threshold_db)

    windowed = (frames - frames.mean(axis=1, keepdims=True)) * window
    spec = np.fft.rfft(windowed, nfft, axis=1)
    acf = np.fft.irfft(spec.real**2 + spec.imag**2, nfft, axis=1)[:, : max_lag + 1]
    acf0 = acf[:, 0].copy()
    valid = acf0 > 0
    acf0[~valid] = 1.0
    r = acf / acf0[:, None] / wacf[None, :]

    # local maxima over the searchable lag range, per frame
    seg = r[:, lag_min : lag_max + 1]
    left = r[:, lag_min - 1 : lag_max]
    right = r[:, lag_min + 1 : lag_max + 2]
    is_peak = (seg > left) & (seg >= right) & (seg > 0)

    n_frames = len(frames)
    cand_freq: list[np.ndarray] = []
    cand_strength: list[np.ndarray] = []
    best_strength = np.zeros(n_frames)
    for i in range(n_frames):
        if not valid[i]:
            cand_freq.append(np.empty(0))
            cand_strength.append(np.empty(0))
            continue
        peaks = np.nonzero(is_peak[i])[0] + lag_min
        if peaks.size == 0:
            cand_freq.append(np.empty(0))
            cand_strength.append(np.empty(0))
            continue
        lags, heights = _parabolic_refine(r[i], peaks)
        heights = np.minimum(heights, 1.0)
        lags = np.clip(lags, fs / cfg.pitch_ceiling, fs / cfg.pitch_floor)
        freqs = fs / lags
        # rank by the octave-biased score so a period's exact multiples
        # (equal raw strength on periodic signals) cannot crowd out the
        # fundamental
        score = heights + OCTAVE_BIAS * np.log2(freqs / cfg.pitch_floor)
        order = np.argsort(score)[::-1][:MAX_CANDIDATES]
        cand_freq.append(freqs[order])
        cand_strength.append(heights[order])
        best_strength[i] = float(heights.max())

    voiced = loud_enough & (best_strength >= cfg.voicing_threshold)

    f0 = np.full(n_frames, np.nan)
    strength = np.full(n_frames, np.nan)
    i = 0
    while i < n_frames:
        if not voiced[i]:
            i += 1
            continue
        j = i
        while j < n_frames and voiced[j]:
            j += 1
        _fill_run(f0, strength, cand_freq, cand_strength, i, j, cfg)
        i = j

    times = starts / fs + cfg.pitch_frame_length / 2.0
    return PitchTrack(times, f0, strength, cfg.hop, cfg.pitch_frame_length)


def _fill_run(
    f0: np.ndarray,
    strength: np.ndarray,
    cand_freq: list[np.ndarray],
    cand_strength: list[np.ndarray],
    start: int,
    stop: int,
    cfg: AnalysisConfig,
) -> None:
    """Lowest-cost candidate path through one voiced run (in place)."""
    scored: list[np.ndarray] = []
    for i in range(start, stop):
        bias = OCTAVE_BIAS * np.log2(cand_freq[i] / cfg.pitch_floor)
        scored.append(cand_strength[i] + bias)

    cost = -scored[0]
    back: list[np.ndarray] = []
    for i in range(start + 1, stop):
        rel = i - start
        jump = OCTAVE_JUMP_COST * np.abs(
            np.log2(cand_freq[i][:, None] / cand_freq[i - 1][None, :])
        )
        total = cost[None, :] + jump
        choice = np.argmin(total, axis=1)
        back.append(choice)
        cost = total[np.arange(len(cand_freq[i])), choice] - scored[rel]

    k = int(np.argmin(cost))
    picks = [k]
    for choice in reversed(back):
        k = int(choice[k])
        picks.append(k)
    picks.reverse()
    for rel, k in enumerate(picks):
        i = start + rel
        f0[i] = cand_freq[i][k]
        strength[i] = min(max(cand_strength[i][k], 0.0), 1.0)


def intensity_contour(clip: AudioClip, cfg: AnalysisConfig) -> IntensityContour:
    """Frame-wise dB level: 10*log10(mean squared sample / 1e-10).

    Frames are 50 ms at the config hop; all-zero frames carry -inf.
    """
    duration = clip.duration_seconds
    frame_length = min(INTENSITY_FRAME_S, duration)
    series = frame_signal(clip, frame_length, min(cfg.hop, frame_length), "rectangular")
    power = np.mean(series.frames * series.frames, axis=1)
    with np.errstate(divide="ignore"):
        level = 10.0 * np.log10(power / INTENSITY_REF_POWER)
    times = series.starts + frame_length / 2.0
    return IntensityContour(times, level, series.hop, frame_length, duration)


def detect_silences(contour: IntensityContour, cfg: AnalysisConfig) -> SilenceMap:
    """Mark pauses: runs of frames quieter than peak level minus threshold.

    A frame is silent when its whole window sits below the threshold, so a
    silent run of frames is widened by half a window on both sides before
    the ``min_pause`` check. An all-silent contour yields one pause
    spanning the clip.
    """
    level = contour.level_db
    peak = contour.peak_level_db
    if math.isinf(peak):
        silent = np.ones(level.size, dtype=bool)
    else:
        silent = level < (peak - cfg.silence_threshold_db)

    half = contour.frame_length / 2.0
    pauses: list[tuple[float, float]] = []
    i = 0
    while i < silent.size:
        if not silent[i]:
            i += 1
            continue
        j = i
        while j < silent.size and silent[j]:
            j += 1
        start = max(0.0, contour.times[i] - half)
        end = min(contour.clip_duration, contour.times[j - 1] + half)
        if end - start >= cfg.min_pause:
            pauses.append((start, end))
        i = j
    return SilenceMap(tuple(pauses), cfg.min_pause, cfg.silence_threshold_db)


def _nearest_index(times: np.ndarray, t: float) -> int:
    i = int(np.searchsorted(times, t))
    if i <= 0:
        return 0
    if i >= times.size:
        return times.size - 1
    return i if times[i] - t < t - times[i - 1] else i - 1


def _plateau_maxima(level: np.ndarray, candidates: np.ndarray) -> list[int]:
    """Indices of local maxima among candidate frames; plateaus keep the
    earliest frame."""
    maxima = []
    n = level.size
    for i in candidates:
        left = level[i - 1] if i > 0 else -math.inf
        if not level[i] > left:
            continue
        j = i
        while j + 1 < n and level[j + 1] == level[i]:
            j += 1
        right = level[j + 1] if j + 1 < n else -math.inf
        if level[i] > right:
            maxima.append(int(i))
    return maxima


def detect_syllable_nuclei(
    contour: IntensityContour,
    pitch: PitchTrack,
    silences: SilenceMap,
    cfg: AnalysisConfig,
) -> SyllableNuclei:
    """Count syllable nuclei: voiced intensity peaks above the median level
    of non-silent frames, separated from accepted neighbors by a dip of at
    least ``cfg.nucleus_dip_db``.
    """
    if not math.isclose(contour.hop, pitch.hop, rel_tol=1e-9):
        raise GridMismatchError("contour and pitch track use different hops")

    level = contour.level_db
    peak = contour.peak_level_db
    if math.isinf(peak):
        return SyllableNuclei(np.empty(0))
    non_silent = level >= (peak - silences.threshold_db)
    if not np.any(non_silent):
        return SyllableNuclei(np.empty(0))
    median_level = float(np.median(level[non_silent]))

    # ties with the median qualify: a steady tone's plateau IS the median
    candidates = np.nonzero(non_silent & (level >= median_level))[0]
    peaks = _plateau_maxima(level, candidates)

    accepted: list[int] = []
    for idx in peaks:
        if not accepted:
            accepted.append(idx)
            continue
        prev = accepted[-1]
        valley = float(level[prev : idx + 1].min())
        if level[idx] - valley >= cfg.nucleus_dip_db and level[prev] - valley >= cfg.nucleus_dip_db:
            accepted.append(idx)
        elif level[idx] > level[prev]:
            accepted[-1] = idx

    times = []
    for idx in accepted:
        t = float(contour.times[idx])
        if silences.contains(t):
            continue
        if pitch.times.size == 0:
            continue
        near = _nearest_index(pitch.times, t)
        if abs(pitch.times[near] - t) > contour.hop:
            continue
        if not pitch.voiced[near]:
            continue
        times.append(t)
    return SyllableNuclei(np.asarray(times))


def write_track_csv(
    pitch: PitchTrack, contour: IntensityContour, path: str | Path
) -> None:
    """Debug dump: time, f0, strength, level_db rows on the pitch grid."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "f0", "strength", "level_db"])
        for i, t in enumerate(pitch.times):
            near = _nearest_index(contour.times, float(t))
            f0 = "" if math.isnan(pitch.f0[i]) else repr(float(pitch.f0[i]))
            st = "" if math.isnan(pitch.strength[i]) else repr(float(pitch.strength[i]))
            writer.writerow([repr(float(t)), f0, st, repr(float(contour.level_db[near]))])
