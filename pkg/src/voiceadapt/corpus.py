"""Manifest-driven corpus ingestion, validation, batching, and bulk
feature extraction.

A corpus is described by a UTF-8 CSV manifest with the header
``clip_path,speaker_id,gender,ambience,condition,role``; clip paths are
resolved against the manifest's directory.
"""

from __future__ import annotations

import csv
import io
import os.path
import wave
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from voiceadapt.audio import DEFAULT_SAMPLE_RATE, load_clip
from voiceadapt.features import FEATURE_NAMES, FeatureVector, extract_features
from voiceadapt.prosody import AnalysisConfig

AMBIENCES = (
    "bakery_baseline",
    "fine_dining",
    "cafe",
    "lively_restaurant",
    "quiet_bar",
    "noisy_bar",
    "night_club",
)
GENDERS = ("female", "male", "other")
CONDITIONS = ("scripted", "unscripted")
ROLES = ("waiter", "customer")

MANIFEST_COLUMNS = ("clip_path", "speaker_id", "gender", "ambience", "condition", "role")

#: Observed speaker-ambience batch size range; outside it is a warning.
BATCH_SIZE_RANGE = (16, 41)

#: Expected clip duration range in seconds; outside it is a warning.
DURATION_RANGE_S = (1.0, 7.0)


class ManifestError(ValueError):
    """Malformed manifest: bad header, bad token, duplicate, missing file."""


@dataclass(frozen=True)
class ClipRecord:
    clip_path: Path
    speaker_id: str
    gender: str
    ambience: str
    condition: str
    role: str

    def metadata_row(self) -> list[str]:
        return [
            str(self.clip_path),
            self.speaker_id,
            self.gender,
            self.ambience,
            self.condition,
            self.role,
        ]


@dataclass(frozen=True)
class CorpusManifest:
    records: tuple[ClipRecord, ...]
    root: Path


@dataclass(frozen=True)
class SpeakerAmbienceBatch:
    speaker_id: str
    ambience: str
    clips: tuple[ClipRecord, ...]

    @property
    def size_ok(self) -> bool:
        lo, hi = BATCH_SIZE_RANGE
        return lo <= len(self.clips) <= hi


@dataclass
class ValidationReport:
    total_utterances: int
    gender_counts: dict[str, int]
    batch_sizes: dict[tuple[str, str], int]
    duration_histogram: list[tuple[str, int]]
    warnings: list[str]

    def to_text(self) -> str:
        out = io.StringIO()
        out.write(f"total utterances: {self.total_utterances}\n")
        for gender in GENDERS:
            out.write(f"  {gender}: {self.gender_counts.get(gender, 0)}\n")
        out.write("speaker-ambience batch sizes:\n")
        for (speaker, ambience), n in sorted(
            self.batch_sizes.items(), key=lambda kv: (kv[0][0], AMBIENCES.index(kv[0][1]))
        ):
            out.write(f"  {speaker} / {ambience}: {n}\n")
        out.write("clip duration histogram (s):\n")
        for label, n in self.duration_histogram:
            out.write(f"  {label}: {n}\n")
        if self.warnings:
            out.write("warnings:\n")
            for w in self.warnings:
                out.write(f"  - {w}\n")
        else:
            out.write("no warnings\n")
        return out.getvalue()


@dataclass
class FeatureTable:
    """One row per successfully processed clip, plus isolated failures."""

    rows: list[tuple[ClipRecord, FeatureVector]]
    failures: list[tuple[ClipRecord, str]]
    extraction_config: AnalysisConfig = field(default_factory=AnalysisConfig)

    COLUMNS = MANIFEST_COLUMNS + FEATURE_NAMES

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            self.write_csv(fh)

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh)
        writer.writerow(self.COLUMNS)
        for record, vector in self.rows:
            values = [
                "" if v is None else repr(float(v))
                for v in (getattr(vector, name) for name in FEATURE_NAMES)
            ]
            writer.writerow(record.metadata_row() + values)

    def failure_log(self) -> str:
        return "".join(f"{rec.clip_path}\t{reason}\n" for rec, reason in self.failures)


def load_manifest(path: str | Path) -> CorpusManifest:
    """Parse and validate a manifest CSV; errors carry the line number."""
    path = Path(path)
    root = path.parent
    records: list[ClipRecord] = []
    seen: dict[Path, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ManifestError(f"{path}: empty manifest (no header)")
        missing = [c for c in MANIFEST_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise ManifestError(f"{path}: missing columns: {', '.join(missing)}")
        for row in reader:
            line = reader.line_num
            raw = (row.get("clip_path") or "").strip()
            if not raw:
                raise ManifestError(f"{path}:{line}: empty clip_path")
            for column, allowed in (
                ("gender", GENDERS),
                ("ambience", AMBIENCES),
                ("condition", CONDITIONS),
                ("role", ROLES),
            ):
                token = (row.get(column) or "").strip()
                if token not in allowed:
                    raise ManifestError(
                        f"{path}:{line}: unknown {column} token {token!r}"
                    )
            # lexical normalization only: symlinked clips stay distinct paths
            clip_path = Path(os.path.normpath(root / raw))
            if clip_path in seen:
                raise ManifestError(
                    f"{path}:{line}: duplicate clip_path {raw!r}"
                    f" (first seen on line {seen[clip_path]})"
                )
            seen[clip_path] = line
            if not clip_path.is_file():
                raise ManifestError(f"{path}:{line}: clip file not found: {clip_path}")
            records.append(
                ClipRecord(
                    clip_path=clip_path,
                    speaker_id=row["speaker_id"].strip(),
                    gender=row["gender"].strip(),
                    ambience=row["ambience"].strip(),
                    condition=row["condition"].strip(),
                    role=row["role"].strip(),
                )
            )
    return CorpusManifest(tuple(records), root)


def _wav_duration_seconds(path: Path) -> float | None:
    try:
        with wave.open(str(path), "rb") as fh:
            rate = fh.getframerate()
            return fh.getnframes() / rate if rate > 0 else None
    except Exception:
        return None


def validate_corpus(manifest: CorpusManifest) -> ValidationReport:
    """Report-only structural checks: counts, batch sizes, durations."""
    warnings: list[str] = []
    gender_counts: dict[str, int] = {}
    for record in manifest.records:
        gender_counts[record.gender] = gender_counts.get(record.gender, 0) + 1

    batch_sizes: dict[tuple[str, str], int] = {}
    for record in manifest.records:
        key = (record.speaker_id, record.ambience)
        batch_sizes[key] = batch_sizes.get(key, 0) + 1
    lo, hi = BATCH_SIZE_RANGE
    for (speaker, ambience), n in sorted(batch_sizes.items()):
        if not lo <= n <= hi:
            warnings.append(
                f"batch {speaker}/{ambience} has {n} clips,"
                f" outside the observed [{lo}, {hi}] range"
            )

    bins = [0] * 9  # [0,1) [1,2) ... [7,8) [8,inf)
    unreadable = 0
    dlo, dhi = DURATION_RANGE_S
    for record in manifest.records:
        duration = _wav_duration_seconds(record.clip_path)
        if duration is None:
            unreadable += 1
            warnings.append(f"cannot read duration of {record.clip_path}")
            continue
        bins[min(int(duration), 8)] += 1
        if not dlo <= duration <= dhi:
            warnings.append(
                f"{record.clip_path} lasts {duration:.2f} s,"
                f" outside the expected [{dlo:g}, {dhi:g}] s range"
            )
    labels = [f"[{i},{i + 1})" for i in range(8)] + ["[8,inf)"]
    histogram = list(zip(labels, bins))

    if not manifest.records:
        warnings.append("manifest contains no records")
    return ValidationReport(
        total_utterances=len(manifest.records),
        gender_counts=gender_counts,
        batch_sizes=batch_sizes,
        duration_histogram=histogram,
        warnings=warnings,
    )


def partition_batches(manifest: CorpusManifest) -> list[SpeakerAmbienceBatch]:
    """Split records into per-(speaker, ambience) batches, deterministically
    ordered by speaker id then ambience listing order."""
    groups: dict[tuple[str, str], list[ClipRecord]] = {}
    for record in manifest.records:
        groups.setdefault((record.speaker_id, record.ambience), []).append(record)
    keys = sorted(groups, key=lambda k: (k[0], AMBIENCES.index(k[1])))
    return [
        SpeakerAmbienceBatch(speaker, ambience, tuple(groups[(speaker, ambience)]))
        for speaker, ambience in keys
    ]


def _extract_one(args: tuple[ClipRecord, AnalysisConfig]) -> tuple[FeatureVector | None, str]:
    record, cfg = args
    try:
        clip = load_clip(record.clip_path, DEFAULT_SAMPLE_RATE)
        return extract_features(clip, cfg), ""
    except Exception as exc:
        return None, f"{type(exc).__name__}: {exc}"


def extract_corpus(
    manifest: CorpusManifest,
    cfg: AnalysisConfig | None = None,
    workers: int = 1,
) -> FeatureTable:
    """Featurize every clip; per-clip failures are recorded, never fatal.

    Output order follows the manifest and is independent of ``workers``.
    """
    cfg = cfg or AnalysisConfig()
    if workers < 1:
        raise ValueError("workers must be a positive integer")
    jobs = [(record, cfg) for record in manifest.records]
    if workers == 1 or len(jobs) < 2:
        results = [_extract_one(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_extract_one, jobs, chunksize=4))
    rows: list[tuple[ClipRecord, FeatureVector]] = []
    failures: list[tuple[ClipRecord, str]] = []
    for record, (vector, reason) in zip(manifest.records, results):
        if vector is None:
            failures.append((record, reason))
        else:
            rows.append((record, vector))
    return FeatureTable(rows, failures, cfg)


def read_feature_table_csv(path: str | Path) -> list[dict[str, object]]:
    """Read back a FeatureTable CSV: metadata strings plus float-or-None
    feature values."""
    out: list[dict[str, object]] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ManifestError(f"{path}: empty feature table")
        missing = [c for c in FeatureTable.COLUMNS if c not in reader.fieldnames]
        if missing:
            raise ManifestError(f"{path}: missing columns: {', '.join(missing)}")
        for row in reader:
            parsed: dict[str, object] = {c: row[c] for c in MANIFEST_COLUMNS}
            for name in FEATURE_NAMES:
                raw = row[name]
                parsed[name] = float(raw) if raw not in ("", None) else None
            out.append(parsed)
    return out
