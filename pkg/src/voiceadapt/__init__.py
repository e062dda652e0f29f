"""Vocal feature extraction and ambience-adaptive prosody planning.

The toolkit decodes speech clips to a canonical mono format, derives
per-clip prosodic analyses (pitch, intensity, pauses, syllable nuclei),
computes an eleven-feature vocal profile per clip, characterizes how the
features vary across ambient conditions with repeated-measures statistics,
and turns aggregated ambience profiles into synthesis-ready prosody plans.
"""

from voiceadapt.audio import (
    AudioClip,
    AudioError,
    DecodeError,
    FrameSeries,
    SilentClipError,
    Spectrum,
    apply_gain_to_dbfs,
    frame_signal,
    load_clip,
    magnitude_spectrum,
    measure_dbfs,
    save_clip,
)
from voiceadapt.prosody import (
    AnalysisConfig,
    GridMismatchError,
    IntensityContour,
    PitchTrack,
    SilenceMap,
    SyllableNuclei,
    detect_silences,
    detect_syllable_nuclei,
    intensity_contour,
    track_pitch,
)
from voiceadapt.features import (
    FEATURE_NAMES,
    FeatureVector,
    extract_features,
    loudness_features,
    rate_features,
    spectral_features,
)
from voiceadapt.corpus import (
    AMBIENCES,
    ClipRecord,
    CorpusManifest,
    FeatureTable,
    ManifestError,
    SpeakerAmbienceBatch,
    extract_corpus,
    load_manifest,
    partition_batches,
    validate_corpus,
)
from voiceadapt.stats import (
    AnovaResult,
    DesignError,
    RatingRecord,
    RepeatedMeasuresDesign,
    StatConfig,
    TukeyResult,
    q_critical,
    ranova,
    studentized_range_cdf,
    studentized_range_sf,
    summarize_ratings,
    tukey_hsd,
)
from voiceadapt.planner import (
    AmbienceProfile,
    BaselineVoiceDescriptor,
    PitchVariants,
    PlannerError,
    ProsodyPlan,
    build_profile,
    emit_ssml,
    parse_ssml,
    pitch_variants,
    plan_prosody,
)
from voiceadapt.radar import RadarError, RadarSpec, radar_svg

__version__ = "0.1.0"
