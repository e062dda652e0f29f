"""feature-extraction: the eleven per-clip features and their laws."""

import math

import numpy as np
import pytest

from voiceadapt.audio import SilentClipError
from voiceadapt.features import (
    FEATURE_NAMES,
    FeatureVector,
    extract_features,
    loudness_features,
    rate_features,
    spectral_features,
)
from voiceadapt.prosody import (
    AnalysisConfig,
    PitchTrack,
    SilenceMap,
    SyllableNuclei,
    detect_silences,
    intensity_contour,
    track_pitch,
)

from conftest import FS, burst_fixture, clip_of, harmonic_comb, sawtooth, silence, sine

CFG = AnalysisConfig()

GAIN_STABLE = (
    "median_pitch_hz",
    "pitch_range_hz",
    "jitter_local",
    "shimmer_local",
    "spectral_slope_db_per_octave",
    "voiced_syll_per_sec",
    "overall_syll_per_sec",
    "pause_rate",
)


def loudness_of(clip):
    contour = intensity_contour(clip, CFG)
    silences = detect_silences(contour, CFG)
    return loudness_features(clip, contour, silences)


class TestLoudness:
    def test_constant_signal_energy(self):
        clip = clip_of(np.ones(FS))
        mean_db, energy, max_db = loudness_of(clip)
        assert energy == pytest.approx(1.0, abs=1e-6)
        assert mean_db == pytest.approx(100.0, abs=0.01)
        assert max_db == pytest.approx(100.0, abs=0.01)

    def test_gain_laws(self):
        clip = clip_of(sine(220.0, 1.0, amp=0.3))
        mean_db, energy, max_db = loudness_of(clip)
        doubled = clip.with_samples(clip.samples * 2.0)
        mean2, energy2, max2 = loudness_of(doubled)
        assert energy2 == pytest.approx(4.0 * energy, rel=1e-6)
        assert mean2 - mean_db == pytest.approx(6.0206, abs=0.001)
        assert max2 - max_db == pytest.approx(6.0206, abs=0.001)

    def test_silence_excluded_from_mean(self):
        tone = sine(220.0, 1.0)
        alone = loudness_of(clip_of(tone))
        padded = loudness_of(clip_of(np.concatenate([tone, silence(1.0)])))
        assert abs(alone[0] - padded[0]) < 0.1
        assert padded[1] == pytest.approx(alone[1], rel=1e-9)

    def test_silent_clip_error(self):
        with pytest.raises(SilentClipError):
            loudness_of(clip_of(silence(1.0)))


class TestSpectral:
    def test_steady_sine(self, tone_clip):
        contour = intensity_contour(tone_clip, CFG)
        silences = detect_silences(contour, CFG)
        pitch = track_pitch(tone_clip, CFG)
        median, rng, jitter, shimmer, slope = spectral_features(tone_clip, pitch, silences)
        assert median == pytest.approx(220.0, rel=0.01)
        assert rng <= 4.0
        assert jitter < 0.005
        assert shimmer < 0.01
        assert slope is not None and math.isfinite(slope)

    def test_two_tone_pitch_range(self):
        gap = silence(0.1)
        x = np.concatenate([gap, sine(150.0, 1.0), gap, sine(300.0, 1.0), gap])
        clip = clip_of(x)
        contour = intensity_contour(clip, CFG)
        silences = detect_silences(contour, CFG)
        pitch = track_pitch(clip, CFG)
        median, rng, *_ = spectral_features(clip, pitch, silences)
        assert rng == pytest.approx(150.0, rel=0.05)
        assert median == pytest.approx(225.0, rel=0.05)

    def test_jitter_closed_form_alternating_periods(self):
        # pulse train with periods alternating 5.0 / 5.25 ms, described by
        # its period sequence; oracle: mean|dT| / mean T = 0.25 / 5.125
        expected = 0.25 / 5.125
        periods_ms = np.tile([5.0, 5.25], 50)
        f0 = 1000.0 / periods_ms
        n = f0.size
        times = 0.02 + np.arange(n) * CFG.hop
        track = PitchTrack(times, f0, np.full(n, 0.9), CFG.hop, CFG.pitch_frame_length)
        clip = clip_of(sine(190.0, float(times[-1] + 0.05)))
        silences = SilenceMap((), CFG.min_pause, CFG.silence_threshold_db)
        _, _, jitter, _, _ = spectral_features(clip, track, silences)
        assert jitter == pytest.approx(expected, rel=0.10)

    def test_glitch_pairs_skipped(self):
        # one octave glitch (ratio 2 > 1.3) must not enter the jitter mean
        f0 = np.array([200.0, 200.0, 400.0, 200.0, 200.0])
        times = 0.02 + np.arange(5) * CFG.hop
        track = PitchTrack(times, f0, np.full(5, 0.9), CFG.hop, CFG.pitch_frame_length)
        clip = clip_of(sine(200.0, 0.2))
        silences = SilenceMap((), CFG.min_pause, CFG.silence_threshold_db)
        _, _, jitter, _, _ = spectral_features(clip, track, silences)
        assert jitter == pytest.approx(0.0, abs=1e-12)

    def test_harmonic_comb_slope(self):
        # amplitude ~ 1/f line spectrum; regression over the exact line
        # spectrum gives 20*log10(1/2) = -6.0206 dB per octave
        clip = clip_of(harmonic_comb(80.0, 1.0))
        contour = intensity_contour(clip, CFG)
        silences = detect_silences(contour, CFG)
        pitch = track_pitch(clip, CFG)
        *_, slope = spectral_features(clip, pitch, silences)
        assert slope == pytest.approx(-6.0206, abs=0.5)

    def test_unvoiced_clip_reports_absent(self):
        rng = np.random.default_rng(5)
        noise = np.clip(rng.standard_normal(FS) * 0.05, -1, 1)
        clip = clip_of(noise)
        contour = intensity_contour(clip, CFG)
        silences = detect_silences(contour, CFG)
        pitch = track_pitch(clip, CFG)
        if np.any(pitch.voiced):
            pytest.skip("seeded noise unexpectedly voiced")
        assert spectral_features(clip, pitch, silences) == (None,) * 5


class TestRates:
    def test_arithmetic(self):
        contour = intensity_contour(clip_of(sine(220.0, 2.0)), CFG)
        silences = SilenceMap(((0.5, 1.0),), CFG.min_pause, CFG.silence_threshold_db)
        nuclei = SyllableNuclei(np.array([0.2, 0.3, 1.5]))
        voiced, overall, pauses = rate_features(contour, silences, nuclei, 2.0)
        assert voiced == pytest.approx(3.0 / 1.5)
        assert overall == pytest.approx(1.5)
        assert pauses == pytest.approx(0.5)

    def test_no_pauses_rates_equal(self):
        contour = intensity_contour(clip_of(sine(220.0, 1.0)), CFG)
        silences = SilenceMap((), CFG.min_pause, CFG.silence_threshold_db)
        nuclei = SyllableNuclei(np.array([0.5]))
        voiced, overall, _ = rate_features(contour, silences, nuclei, 1.0)
        assert voiced == overall

    def test_zero_nuclei(self):
        contour = intensity_contour(clip_of(sine(220.0, 1.0)), CFG)
        silences = SilenceMap(((0.0, 0.25),), CFG.min_pause, CFG.silence_threshold_db)
        nuclei = SyllableNuclei(np.empty(0))
        voiced, overall, pauses = rate_features(contour, silences, nuclei, 1.0)
        assert voiced == 0.0 and overall == 0.0
        assert pauses == pytest.approx(1.0)

    def test_inconsistent_inputs_rejected(self):
        contour = intensity_contour(clip_of(sine(220.0, 1.0)), CFG)
        silences = SilenceMap(((0.0, 1.0),), CFG.min_pause, CFG.silence_threshold_db)
        nuclei = SyllableNuclei(np.array([0.5]))
        with pytest.raises(ValueError):
            rate_features(contour, silences, nuclei, 1.0)


# golden values for the burst fixture, frozen from this pipeline and
# cross-checked: counts are exact by construction, energy by direct sum,
# pitch against the 180 Hz synthesis frequency
GOLDEN_BURST = {
    "median_pitch_hz": (180.0, 0.01),
    "voiced_syll_per_sec": (3.0 / (1.28 - 0.10), 0.02),
    "overall_syll_per_sec": (3.0 / 1.28, 0.02),
    "pause_rate": (1.0 / 1.28, 0.02),
}


class TestExtract:
    def test_burst_fixture_golden(self):
        clip = burst_fixture()
        vector = extract_features(clip, CFG)
        energy_direct = float(np.sum(clip.samples**2)) / FS
        assert vector.energy == pytest.approx(energy_direct, rel=1e-9)
        for name, (expected, rel) in GOLDEN_BURST.items():
            assert getattr(vector, name) == pytest.approx(expected, rel=rel), name
        assert vector.jitter_local < 0.01
        assert vector.shimmer_local < 0.02

    def test_gain_covariance(self):
        clip = burst_fixture()
        base = extract_features(clip, CFG)
        for g in (0.25, 0.5, 2.0):
            scaled = extract_features(clip.with_samples(clip.samples * g), CFG)
            assert scaled.energy == pytest.approx(base.energy * g * g, rel=1e-6)
            shift = 20.0 * math.log10(g)
            assert scaled.mean_intensity_db - base.mean_intensity_db == pytest.approx(shift, abs=0.01)
            assert scaled.max_intensity_db - base.max_intensity_db == pytest.approx(shift, abs=0.01)
            for name in GAIN_STABLE:
                a, b = getattr(base, name), getattr(scaled, name)
                if a is None:
                    assert b is None
                elif a == 0.0:
                    assert b == 0.0
                else:
                    assert b == pytest.approx(a, rel=1e-6), name

    def test_silence_padding_invariance(self):
        clip = burst_fixture()
        base = extract_features(clip, CFG)
        padded_clip = clip.with_samples(np.concatenate([clip.samples, silence(1.0)]))
        padded = extract_features(padded_clip, CFG)
        assert abs(padded.mean_intensity_db - base.mean_intensity_db) < 0.1
        assert padded.voiced_syll_per_sec == pytest.approx(base.voiced_syll_per_sec, rel=0.01)
        assert padded.overall_syll_per_sec < base.overall_syll_per_sec
        assert padded.pause_rate == pytest.approx(
            (base.pause_rate * clip.duration_seconds + 1) / padded_clip.duration_seconds,
            rel=1e-6,
        )

    def test_voiced_rate_dominates_overall(self):
        rng = np.random.default_rng(9)
        for _ in range(5):
            n = rng.integers(2, 5)
            parts = []
            for k in range(n):
                parts.append(sawtooth(float(rng.uniform(120, 260)), float(rng.uniform(0.2, 0.5))))
                parts.append(silence(float(rng.uniform(0.06, 0.2))))
            vector = extract_features(clip_of(np.concatenate(parts)), CFG)
            assert vector.voiced_syll_per_sec >= vector.overall_syll_per_sec

    def test_determinism(self):
        clip = burst_fixture()
        a = extract_features(clip, CFG)
        b = extract_features(clip, CFG)
        assert a.as_dict() == b.as_dict()

    def test_silent_clip_raises(self):
        with pytest.raises(SilentClipError):
            extract_features(clip_of(silence(1.0)), CFG)

    def test_periodic_signals_low_jitter_shimmer(self):
        for f0 in (120.0, 220.0, 330.0):
            vector = extract_features(clip_of(sine(f0, 1.0)), CFG)
            assert vector.jitter_local < 0.01
            assert vector.shimmer_local < 0.01


class TestVectorInvariants:
    def test_rejects_negative_jitter(self):
        with pytest.raises(ValueError):
            FeatureVector(
                mean_intensity_db=80.0, energy=1.0, max_intensity_db=85.0,
                median_pitch_hz=200.0, pitch_range_hz=10.0,
                jitter_local=-0.1, shimmer_local=0.0,
                spectral_slope_db_per_octave=-6.0,
                voiced_syll_per_sec=2.0, overall_syll_per_sec=1.5, pause_rate=0.5,
            )

    def test_rejects_voiced_below_overall(self):
        with pytest.raises(ValueError):
            FeatureVector(
                mean_intensity_db=80.0, energy=1.0, max_intensity_db=85.0,
                median_pitch_hz=None, pitch_range_hz=None,
                jitter_local=None, shimmer_local=None,
                spectral_slope_db_per_octave=None,
                voiced_syll_per_sec=1.0, overall_syll_per_sec=2.0, pause_rate=0.0,
            )

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            FeatureVector(
                mean_intensity_db=float("nan"), energy=1.0, max_intensity_db=85.0,
                median_pitch_hz=None, pitch_range_hz=None,
                jitter_local=None, shimmer_local=None,
                spectral_slope_db_per_octave=None,
                voiced_syll_per_sec=0.0, overall_syll_per_sec=0.0, pause_rate=0.0,
            )

    def test_feature_listing_order(self):
        assert FEATURE_NAMES == (
            "mean_intensity_db", "energy", "max_intensity_db",
            "median_pitch_hz", "pitch_range_hz", "shimmer_local", "jitter_local",
            "spectral_slope_db_per_octave",
            "voiced_syll_per_sec", "overall_syll_per_sec", "pause_rate",
        )
