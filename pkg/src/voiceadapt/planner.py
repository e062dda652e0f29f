"""Turn aggregated ambience features into synthesis-ready prosody plans.

A plan expresses an ambience profile relative to a baseline voice as a
semitone pitch shift, an integer rate percentage, and a dB volume shift,
plus a loudness-normalization target. Plans render to prosody markup of
the exact form::

    <speak><prosody pitch="+N.NNst" rate="P%" volume="+V.VdB">TEXT</prosody></speak>
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape, unescape

import numpy as np

from voiceadapt.corpus import AMBIENCES, ClipRecord, FeatureTable
from voiceadapt.features import FEATURE_NAMES, FeatureVector

RATE_PERCENT_RANGE = (25, 200)
PITCH_SHIFT_RANGE_ST = (-24.0, 24.0)
VOLUME_SHIFT_RANGE_DB = (-12.0, 12.0)
DEFAULT_TARGET_DBFS = -10.0


class PlannerError(ValueError):
    """Profile or plan cannot be built from the given inputs."""


@dataclass(frozen=True)
class FeatureAggregate:
    mean: float
    median: float
    n: int


@dataclass(frozen=True)
class AmbienceProfile:
    """Per-ambience aggregates (mean and median over contributing clips)
    for every feature that had at least one present value."""

    ambience: str
    n_clips: int
    features: dict[str, FeatureAggregate]
    filters: dict[str, str] = field(default_factory=dict)

    def require(self, name: str) -> FeatureAggregate:
        if name not in self.features:
            raise PlannerError(f"profile for {self.ambience!r} lacks {name}")
        return self.features[name]

    def to_json(self) -> str:
        payload = {
            "ambience": self.ambience,
            "n_clips": self.n_clips,
            "filters": dict(sorted(self.filters.items())),
            "features": {
                name: {"mean": agg.mean, "median": agg.median, "n": agg.n}
                for name, agg in self.features.items()
            },
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "AmbienceProfile":
        payload = json.loads(text)
        features = {
            name: FeatureAggregate(entry["mean"], entry["median"], int(entry["n"]))
            for name, entry in payload["features"].items()
        }
        return cls(
            ambience=payload["ambience"],
            n_clips=int(payload["n_clips"]),
            features=features,
            filters=dict(payload.get("filters", {})),
        )


@dataclass(frozen=True)
class BaselineVoiceDescriptor:
    """The synthesis engine's unmodified voice, supplied by configuration."""

    median_pitch_hz: float
    syll_per_sec: float
    mean_intensity_db: float

    def __post_init__(self) -> None:
        if self.median_pitch_hz <= 0 or self.syll_per_sec <= 0 or self.mean_intensity_db <= 0:
            raise ValueError("baseline descriptor values must be positive")

    @classmethod
    def from_json(cls, text: str) -> "BaselineVoiceDescriptor":
        payload = json.loads(text)
        return cls(
            median_pitch_hz=float(payload["median_pitch_hz"]),
            syll_per_sec=float(payload["syll_per_sec"]),
            mean_intensity_db=float(payload["mean_intensity_db"]),
        )


@dataclass(frozen=True)
class PitchVariants:
    """Low/average pitch pair extended by the mirrored high variant."""

    low_hz: float
    avg_hz: float
    high_hz: float


@dataclass(frozen=True)
class ProsodyPlan:
    pitch_shift_semitones: float
    rate_percent: int
    volume_shift_db: float
    ambience: str
    target_dbfs: float = DEFAULT_TARGET_DBFS
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        lo, hi = RATE_PERCENT_RANGE
        if not lo <= self.rate_percent <= hi:
            raise ValueError(f"rate_percent outside [{lo}, {hi}]")
        lo, hi = PITCH_SHIFT_RANGE_ST
        if not lo <= self.pitch_shift_semitones <= hi:
            raise ValueError(f"pitch shift outside [{lo}, {hi}] st")
        lo, hi = VOLUME_SHIFT_RANGE_DB
        if not lo <= self.volume_shift_db <= hi:
            raise ValueError(f"volume shift outside [{lo}, {hi}] dB")

    def to_json(self) -> str:
        payload = {
            "ambience": self.ambience,
            "pitch_shift_semitones": self.pitch_shift_semitones,
            "rate_percent": self.rate_percent,
            "volume_shift_db": self.volume_shift_db,
            "target_dbfs": self.target_dbfs,
            "provenance": self.provenance,
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def build_profile(
    table: FeatureTable,
    ambience: str,
    speaker: str | None = None,
    gender: str | None = None,
    condition: str | None = None,
) -> AmbienceProfile:
    """Aggregate a feature table's rows for one ambience (optionally
    filtered by speaker, gender, or recording condition).

    Absent feature values are skipped; each aggregate carries its own
    contributing count.
    """
    if ambience not in AMBIENCES:
        raise PlannerError(f"unknown ambience {ambience!r}")

    def keep(record: ClipRecord) -> bool:
        if record.ambience != ambience:
            return False
        if speaker is not None and record.speaker_id != speaker:
            return False
        if gender is not None and record.gender != gender:
            return False
        if condition is not None and record.condition != condition:
            return False
        return True

    rows: list[FeatureVector] = [v for rec, v in table.rows if keep(rec)]
    if not rows:
        raise PlannerError(f"no rows match ambience {ambience!r} with given filters")
    features: dict[str, FeatureAggregate] = {}
    for name in FEATURE_NAMES:
        values = [getattr(v, name) for v in rows if getattr(v, name) is not None]
        if not values:
            continue
        arr = np.asarray(values, dtype=np.float64)
        features[name] = FeatureAggregate(
            mean=float(arr.mean()), median=float(np.median(arr)), n=len(values)
        )
    filters = {}
    if speaker is not None:
        filters["speaker"] = speaker
    if gender is not None:
        filters["gender"] = gender
    if condition is not None:
        filters["condition"] = condition
    return AmbienceProfile(ambience, len(rows), features, filters)


def pitch_variants(low_hz: float, avg_hz: float) -> PitchVariants:
    """Mirror the low/average pitch gap upward: high = 2*avg - low."""
    if low_hz <= 0 or avg_hz <= 0:
        raise ValueError("pitch values must be positive")
    high = 2.0 * avg_hz - low_hz
    if high <= 0:
        raise ValueError(
            f"extrapolated high pitch is not positive ({high:g} Hz)"
        )
    return PitchVariants(low_hz, avg_hz, high)


def pitch_shift_semitones(profile_hz: float, baseline_hz: float) -> float:
    """Unclamped, unrounded semitone offset between two pitches."""
    if profile_hz <= 0 or baseline_hz <= 0:
        raise ValueError("pitch values must be positive")
    return 12.0 * math.log2(profile_hz / baseline_hz)


def _clamp(value: float, lo: float, hi: float) -> tuple[float, bool]:
    if value < lo:
        return lo, True
    if value > hi:
        return hi, True
    return value, False


def plan_prosody(
    profile: AmbienceProfile,
    baseline: BaselineVoiceDescriptor,
    target_dbfs: float = DEFAULT_TARGET_DBFS,
) -> ProsodyPlan:
    """Derive the pitch/rate/volume offsets that move the baseline voice
    toward the profile's mean aggregates.

    Offsets are quantized to the markup precision (0.01 st, 1%, 0.1 dB)
    and clamped to engine-safe ranges; any clamping is recorded in the
    plan's provenance.
    """
    pitch_agg = profile.require("median_pitch_hz")
    rate_agg = profile.require("voiced_syll_per_sec")
    intensity_agg = profile.require("mean_intensity_db")

    raw_pitch = pitch_shift_semitones(pitch_agg.mean, baseline.median_pitch_hz)
    raw_rate = 100.0 * rate_agg.mean / baseline.syll_per_sec
    raw_volume = intensity_agg.mean - baseline.mean_intensity_db

    pitch, pitch_clamped = _clamp(round(raw_pitch, 2), *PITCH_SHIFT_RANGE_ST)
    rate_value, rate_clamped = _clamp(
        int(round(raw_rate)), RATE_PERCENT_RANGE[0], RATE_PERCENT_RANGE[1]
    )
    volume, volume_clamped = _clamp(round(raw_volume, 1), *VOLUME_SHIFT_RANGE_DB)
    clamped = tuple(
        name
        for name, hit in (
            ("pitch_shift_semitones", pitch_clamped),
            ("rate_percent", rate_clamped),
            ("volume_shift_db", volume_clamped),
        )
        if hit
    )
    provenance = {
        "profile": {
            "ambience": profile.ambience,
            "n_clips": profile.n_clips,
            "filters": dict(sorted(profile.filters.items())),
            "median_pitch_hz_mean": pitch_agg.mean,
            "voiced_syll_per_sec_mean": rate_agg.mean,
            "mean_intensity_db_mean": intensity_agg.mean,
        },
        "baseline": {
            "median_pitch_hz": baseline.median_pitch_hz,
            "syll_per_sec": baseline.syll_per_sec,
            "mean_intensity_db": baseline.mean_intensity_db,
        },
        "raw": {
            "pitch_shift_semitones": raw_pitch,
            "rate_percent": raw_rate,
            "volume_shift_db": raw_volume,
        },
        "clamped": list(clamped),
    }
    return ProsodyPlan(
        pitch_shift_semitones=pitch + 0.0,
        rate_percent=int(rate_value),
        volume_shift_db=volume + 0.0,
        ambience=profile.ambience,
        target_dbfs=target_dbfs,
        provenance=provenance,
    )


_SSML_RE = re.compile(
    r'^<speak><prosody pitch="([+-]\d+\.\d\d)st" rate="(\d+)%"'
    r' volume="([+-]\d+\.\d)dB">(.*)</prosody></speak>$',
    re.DOTALL,
)


def emit_ssml(plan: ProsodyPlan, text: str) -> str:
    """Render the plan as a single prosody element around escaped text."""
    if not text:
        raise ValueError("utterance text must be non-empty")
    pitch = plan.pitch_shift_semitones + 0.0
    volume = plan.volume_shift_db + 0.0
    return (
        f'<speak><prosody pitch="{pitch:+.2f}st" rate="{plan.rate_percent}%"'
        f' volume="{volume:+.1f}dB">{escape(text)}</prosody></speak>'
    )


def parse_ssml(markup: str) -> tuple[float, int, float, str]:
    """Inverse of emit_ssml: (pitch_st, rate_percent, volume_db, text)."""
    match = _SSML_RE.match(markup)
    if match is None:
        raise ValueError("markup does not match the emitted prosody grammar")
    pitch, rate, volume, text = match.groups()
    return float(pitch), int(rate), float(volume), unescape(text)


def load_profile(path: str | Path) -> AmbienceProfile:
    return AmbienceProfile.from_json(Path(path).read_text())


def load_baseline(path: str | Path) -> BaselineVoiceDescriptor:
    return BaselineVoiceDescriptor.from_json(Path(path).read_text())
