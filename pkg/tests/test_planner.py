"""adaptation-planner: profiles, pitch variants, plans, prosody markup."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from voiceadapt.corpus import ClipRecord, FeatureTable
from voiceadapt.features import FeatureVector
from voiceadapt.planner import (
    AmbienceProfile,
    BaselineVoiceDescriptor,
    FeatureAggregate,
    PlannerError,
    ProsodyPlan,
    build_profile,
    emit_ssml,
    parse_ssml,
    pitch_shift_semitones,
    pitch_variants,
    plan_prosody,
)


def vector(**overrides):
    values = dict(
        mean_intensity_db=80.0,
        energy=1.0,
        max_intensity_db=85.0,
        median_pitch_hz=200.0,
        pitch_range_hz=50.0,
        jitter_local=0.01,
        shimmer_local=0.05,
        spectral_slope_db_per_octave=-6.0,
        voiced_syll_per_sec=4.0,
        overall_syll_per_sec=3.0,
        pause_rate=0.5,
    )
    values.update(overrides)
    return FeatureVector(**values)


def record(ambience="cafe", speaker="714", gender="female", condition="scripted"):
    return ClipRecord(
        clip_path=Path(f"/tmp/{speaker}_{ambience}.wav"),
        speaker_id=speaker,
        gender=gender,
        ambience=ambience,
        condition=condition,
        role="waiter",
    )


def table_of(*pairs):
    return FeatureTable(list(pairs), [])


def profile_from_values(ambience="cafe", pitch=200.0, rate=4.0, intensity=80.0):
    features = {
        "median_pitch_hz": FeatureAggregate(pitch, pitch, 2),
        "voiced_syll_per_sec": FeatureAggregate(rate, rate, 2),
        "mean_intensity_db": FeatureAggregate(intensity, intensity, 2),
    }
    return AmbienceProfile(ambience, 2, features)


BASELINE = BaselineVoiceDescriptor(
    median_pitch_hz=200.0, syll_per_sec=4.0, mean_intensity_db=80.0
)


class TestBuildProfile:
    def test_mean_of_two_rows(self):
        table = table_of(
            (record(), vector(median_pitch_hz=200.0)),
            (record(speaker="715"), vector(median_pitch_hz=240.0)),
        )
        profile = build_profile(table, "cafe")
        assert profile.features["median_pitch_hz"].mean == pytest.approx(220.0)
        assert profile.features["median_pitch_hz"].median == pytest.approx(220.0)
        assert profile.n_clips == 2

    def test_speaker_filter(self):
        table = table_of(
            (record(speaker="714"), vector(median_pitch_hz=210.0)),
            (record(speaker="715"), vector(median_pitch_hz=300.0)),
        )
        profile = build_profile(table, "cafe", speaker="714")
        assert profile.features["median_pitch_hz"].mean == pytest.approx(210.0)
        assert profile.filters == {"speaker": "714"}
        assert profile.n_clips == 1

    def test_absent_values_skipped_with_counts(self):
        table = table_of(
            (record(speaker="714"), vector(median_pitch_hz=None, pitch_range_hz=None,
                                           jitter_local=None, shimmer_local=None,
                                           spectral_slope_db_per_octave=None)),
            (record(speaker="715"), vector(median_pitch_hz=250.0)),
        )
        profile = build_profile(table, "cafe")
        agg = profile.features["median_pitch_hz"]
        assert agg.mean == pytest.approx(250.0)
        assert agg.n == 1
        assert profile.n_clips == 2

    def test_no_matching_rows(self):
        table = table_of((record(ambience="cafe"), vector()))
        with pytest.raises(PlannerError):
            build_profile(table, "night_club")

    def test_json_roundtrip(self):
        table = table_of((record(), vector()))
        profile = build_profile(table, "cafe", gender="female")
        back = AmbienceProfile.from_json(profile.to_json())
        assert back == profile


class TestPitchVariants:
    def test_paper_example(self):
        v = pitch_variants(200.0, 220.0)
        assert v.high_hz == 240.0

    def test_degenerate_identity(self):
        v = pitch_variants(210.0, 210.0)
        assert v.high_hz == 210.0

    def test_negative_extrapolation_rejected(self):
        with pytest.raises(ValueError):
            pitch_variants(300.0, 140.0)

    def test_non_positive_inputs_rejected(self):
        with pytest.raises(ValueError):
            pitch_variants(0.0, 100.0)

    def test_exactness_1000_random(self):
        rng = np.random.default_rng(1234)
        for _ in range(1000):
            avg = float(rng.uniform(80.0, 400.0))
            low = float(rng.uniform(60.0, avg + 40.0))
            high = 2.0 * avg - low
            if high <= 0:
                continue
            v = pitch_variants(low, avg)
            assert v.high_hz == high  # bit-exact
            assert math.isclose(v.high_hz - v.avg_hz, v.avg_hz - v.low_hz, rel_tol=1e-12, abs_tol=1e-9)


class TestPlan:
    def test_identity_plan(self):
        plan = plan_prosody(profile_from_values(), BASELINE)
        assert plan.pitch_shift_semitones == 0.0
        assert plan.rate_percent == 100
        assert plan.volume_shift_db == 0.0
        assert plan.target_dbfs == -10.0

    def test_octave_up(self):
        plan = plan_prosody(profile_from_values(pitch=400.0), BASELINE)
        assert plan.pitch_shift_semitones == pytest.approx(12.0)

    def test_rate_and_volume_arithmetic(self):
        plan = plan_prosody(profile_from_values(rate=3.0, intensity=85.0), BASELINE)
        assert plan.rate_percent == 75
        assert plan.volume_shift_db == pytest.approx(5.0)

    def test_clamping_recorded(self):
        plan = plan_prosody(profile_from_values(rate=16.0, intensity=110.0), BASELINE)
        assert plan.rate_percent == 200
        assert plan.volume_shift_db == 12.0
        assert set(plan.provenance["clamped"]) == {"rate_percent", "volume_shift_db"}

    def test_missing_aggregate_rejected(self):
        profile = AmbienceProfile("cafe", 1, {"energy": FeatureAggregate(1.0, 1.0, 1)})
        with pytest.raises(PlannerError):
            plan_prosody(profile, BASELINE)

    def test_monotone_in_profile_pitch(self):
        shifts = [
            pitch_shift_semitones(hz, BASELINE.median_pitch_hz)
            for hz in np.linspace(100.0, 400.0, 25)
        ]
        assert all(a < b for a, b in zip(shifts, shifts[1:]))

    def test_determinism(self):
        a = plan_prosody(profile_from_values(pitch=233.0), BASELINE)
        b = plan_prosody(profile_from_values(pitch=233.0), BASELINE)
        assert a == b

    def test_plan_json(self):
        plan = plan_prosody(profile_from_values(pitch=233.0), BASELINE, target_dbfs=-12.0)
        payload = json.loads(plan.to_json())
        assert payload["target_dbfs"] == -12.0
        assert payload["ambience"] == "cafe"
        assert payload["provenance"]["baseline"]["median_pitch_hz"] == 200.0


class TestMarkup:
    def test_identity_plan_exact_string(self):
        plan = plan_prosody(profile_from_values(), BASELINE)
        markup = emit_ssml(plan, "Hi there, I hope you are doing well")
        assert markup == (
            '<speak><prosody pitch="+0.00st" rate="100%" volume="+0.0dB">'
            "Hi there, I hope you are doing well</prosody></speak>"
        )

    def test_formatting_of_offsets(self):
        plan = ProsodyPlan(
            pitch_shift_semitones=12.0, rate_percent=75, volume_shift_db=5.0,
            ambience="cafe",
        )
        markup = emit_ssml(plan, "hello")
        assert 'pitch="+12.00st"' in markup
        assert 'rate="75%"' in markup
        assert 'volume="+5.0dB"' in markup

    def test_negative_offsets_signed(self):
        plan = ProsodyPlan(
            pitch_shift_semitones=-3.21, rate_percent=80, volume_shift_db=-2.5,
            ambience="cafe",
        )
        markup = emit_ssml(plan, "x")
        assert 'pitch="-3.21st"' in markup and 'volume="-2.5dB"' in markup

    def test_ampersand_escaped(self):
        plan = plan_prosody(profile_from_values(), BASELINE)
        markup = emit_ssml(plan, "fish & chips")
        assert "&amp;" in markup
        assert parse_ssml(markup)[3] == "fish & chips"

    def test_roundtrip_exact(self):
        rng = np.random.default_rng(77)
        for _ in range(50):
            plan = plan_prosody(
                profile_from_values(
                    pitch=float(rng.uniform(120.0, 350.0)),
                    rate=float(rng.uniform(2.0, 7.0)),
                    intensity=float(rng.uniform(72.0, 88.0)),
                ),
                BASELINE,
            )
            markup = emit_ssml(plan, "Hi there, I hope you are doing well")
            pitch, rate, volume, text = parse_ssml(markup)
            assert pitch == plan.pitch_shift_semitones
            assert rate == plan.rate_percent
            assert volume == plan.volume_shift_db
            assert text == "Hi there, I hope you are doing well"

    def test_empty_text_rejected(self):
        plan = plan_prosody(profile_from_values(), BASELINE)
        with pytest.raises(ValueError):
            emit_ssml(plan, "")

    def test_xml_metacharacters_escaped(self):
        plan = plan_prosody(profile_from_values(), BASELINE)
        markup = emit_ssml(plan, "a < b > c")
        assert "&lt;" in markup and "&gt;" in markup

    def test_plan_invariant_enforced(self):
        with pytest.raises(ValueError):
            ProsodyPlan(
                pitch_shift_semitones=30.0, rate_percent=100, volume_shift_db=0.0,
                ambience="cafe",
            )
        with pytest.raises(ValueError):
            ProsodyPlan(
                pitch_shift_semitones=0.0, rate_percent=300, volume_shift_db=0.0,
                ambience="cafe",
            )


class TestBaseline:
    def test_positive_required(self):
        with pytest.raises(ValueError):
            BaselineVoiceDescriptor(median_pitch_hz=-1.0, syll_per_sec=4.0, mean_intensity_db=80.0)

    def test_json(self):
        text = json.dumps(
            {"median_pitch_hz": 210.0, "syll_per_sec": 4.2, "mean_intensity_db": 78.0}
        )
        descriptor = BaselineVoiceDescriptor.from_json(text)
        assert descriptor.median_pitch_hz == 210.0
