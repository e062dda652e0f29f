"""Command-line front door.

Exit codes: 0 success, 1 data error (bad file contents, failed analysis),
2 usage error (unknown flags, missing arguments).

Stdout carries human-readable tables; ``--out`` files are CSV.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

import voiceadapt
from voiceadapt.audio import (
    DEFAULT_SAMPLE_RATE,
    AudioError,
    apply_gain_to_dbfs,
    load_clip,
    measure_dbfs,
    save_clip,
)
from voiceadapt.corpus import (
    AMBIENCES,
    ManifestError,
    extract_corpus,
    load_manifest,
    partition_batches,
    read_feature_table_csv,
    validate_corpus,
)
from voiceadapt.features import FEATURE_NAMES
from voiceadapt.planner import (
    DEFAULT_TARGET_DBFS,
    PlannerError,
    emit_ssml,
    load_baseline,
    load_profile,
    plan_prosody,
)
from voiceadapt.prosody import AnalysisConfig
from voiceadapt.radar import RadarError, radar_svg
from voiceadapt.stats import (
    DesignError,
    RatingRecord,
    RepeatedMeasuresDesign,
    StatConfig,
    ranova,
    summarize_ratings,
    tukey_hsd,
)

DATA_ERRORS = (
    AudioError,
    ManifestError,
    PlannerError,
    RadarError,
    DesignError,
    ValueError,
    OSError,
)


def _design_from_table(
    rows: list[dict], feature: str, condition: str | None = None
) -> RepeatedMeasuresDesign:
    """Per-(speaker, ambience) cell means for one feature, as a complete
    within-subjects design. ``condition`` optionally restricts the rows
    (scripted/unscripted)."""
    cells: dict[tuple[str, str], list[float]] = {}
    speakers: list[str] = []
    ambiences: list[str] = []
    for row in rows:
        if condition is not None and row["condition"] != condition:
            continue
        speaker = str(row["speaker_id"])
        ambience = str(row["ambience"])
        if speaker not in speakers:
            speakers.append(speaker)
        if ambience not in ambiences:
            ambiences.append(ambience)
        value = row[feature]
        if value is not None:
            cells.setdefault((speaker, ambience), []).append(float(value))
    if not speakers:
        raise DesignError("no rows left after filtering")
    speakers.sort()
    ambiences.sort(key=AMBIENCES.index)
    matrix = np.full((len(speakers), len(ambiences)), np.nan)
    for i, speaker in enumerate(speakers):
        for j, ambience in enumerate(ambiences):
            values = cells.get((speaker, ambience))
            if values:
                matrix[i, j] = float(np.mean(values))
    if np.any(np.isnan(matrix)):
        raise DesignError(
            f"feature {feature!r}: incomplete speaker x ambience design"
        )
    return RepeatedMeasuresDesign(tuple(speakers), tuple(ambiences), matrix)


def _cmd_extract(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    cfg = AnalysisConfig()
    table = extract_corpus(manifest, cfg, workers=args.workers)
    table.to_csv(args.out)
    if args.failures:
        Path(args.failures).write_text(table.failure_log())
    if table.failures:
        print(f"{len(table.failures)} clip(s) failed; see failure log", file=sys.stderr)
        for record, reason in table.failures:
            print(f"  {record.clip_path}: {reason}", file=sys.stderr)
    print(f"wrote {len(table.rows)} feature rows to {args.out}")
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    report = validate_corpus(load_manifest(args.manifest))
    text = report.to_text()
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return 0


def _cmd_batches(args: argparse.Namespace) -> int:
    for batch in partition_batches(load_manifest(args.manifest)):
        flag = "ok" if batch.size_ok else "outside[16,41]"
        print(f"{batch.speaker_id}\t{batch.ambience}\t{len(batch.clips)}\t{flag}")
    return 0


def _stars(p: float, alpha: float) -> str:
    return "*" if p < alpha else ""


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _cmd_anova(args: argparse.Namespace) -> int:
    table_rows = read_feature_table_csv(args.features)
    config = StatConfig(alpha=args.alpha)
    names = [args.feature] if args.feature else list(FEATURE_NAMES)
    for name in names:
        if name not in FEATURE_NAMES:
            raise DesignError(f"unknown feature {name!r}")
    lines = ["feature\tF\tp\tdf_t\tdf_e\tsig"]
    csv_rows: list[list] = []
    computed = 0
    for name in names:
        try:
            design = _design_from_table(table_rows, name, args.condition)
            result = ranova(design)
        except DesignError as exc:
            lines.append(f"{name}\tskipped: {exc}")
            continue
        computed += 1
        stars = _stars(result.p_value, config.alpha)
        lines.append(
            f"{name}\t{result.f_stat:.6g}\t{result.p_value:.6g}"
            f"\t{result.df_treatment}\t{result.df_error}\t{stars}"
        )
        csv_rows.append(
            [name, repr(result.f_stat), repr(result.p_value),
             result.df_treatment, result.df_error, stars]
        )
    if args.out:
        _write_csv(args.out, ["feature", "f", "p", "df_treatment", "df_error", "sig"], csv_rows)
    print("\n".join(lines))
    if computed == 0:
        raise DesignError("no feature produced a complete design")
    return 0


def _cmd_tukey(args: argparse.Namespace) -> int:
    table_rows = read_feature_table_csv(args.features)
    design = _design_from_table(table_rows, args.feature, args.condition)
    result = tukey_hsd(design, ranova(design))
    config = StatConfig(alpha=args.alpha)
    lines = ["condition_a\tcondition_b\tmean_diff\tq\tp_adj\tsig"]
    csv_rows = []
    for pair in result.pairs:
        stars = _stars(pair.p_adjusted, config.alpha)
        lines.append(
            f"{pair.condition_a}\t{pair.condition_b}\t{pair.mean_difference:.6g}"
            f"\t{pair.q_stat:.6g}\t{pair.p_adjusted:.6g}\t{stars}"
        )
        csv_rows.append(
            [pair.condition_a, pair.condition_b, repr(pair.mean_difference),
             repr(pair.q_stat), repr(pair.p_adjusted), stars]
        )
    if args.out:
        _write_csv(args.out, ["condition_a", "condition_b", "mean_diff", "q", "p_adj", "sig"], csv_rows)
    print("\n".join(lines))
    return 0


def _read_ratings_csv(path: str) -> list[RatingRecord]:
    import csv

    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = ("rater_id", "voice_type", "ambience", "statement", "rating")
        if reader.fieldnames is None or any(c not in reader.fieldnames for c in required):
            raise ManifestError(f"{path}: ratings CSV needs columns {','.join(required)}")
        for row in reader:
            try:
                records.append(
                    RatingRecord(
                        rater_id=row["rater_id"].strip(),
                        voice_type=row["voice_type"].strip(),
                        ambience=row["ambience"].strip(),
                        statement=int(row["statement"]),
                        rating=int(row["rating"]),
                    )
                )
            except ValueError as exc:
                raise ManifestError(f"{path}:{reader.line_num}: {exc}") from exc
    return records


def _cmd_ratings(args: argparse.Namespace) -> int:
    records = _read_ratings_csv(args.ratings)
    group_by = tuple(args.group_by.split(","))
    summary = summarize_ratings(records, group_by, StatConfig(alpha=args.alpha))
    lines = ["statement\t" + "\t".join(group_by) + "\tmean\tmedian\tstd\tn"]
    csv_rows = []
    for row in summary.rows:
        std = "" if row.std is None else f"{row.std:.4g}"
        lines.append(
            f"{row.statement}\t" + "\t".join(row.group)
            + f"\t{row.mean:.4g}\t{row.median:.4g}\t{std}\t{row.n}"
        )
        csv_rows.append(
            [row.statement, *row.group, repr(row.mean), repr(row.median),
             "" if row.std is None else repr(row.std), row.n]
        )
    for statement, (anova, tukey) in sorted(summary.analyses.items()):
        lines.append(
            f"statement {statement} across voice types:"
            f" F={anova.f_stat:.4g} p={anova.p_value:.4g}"
            f"{' *' if anova.p_value < args.alpha else ''}"
        )
        if tukey is not None:
            for pair in tukey.pairs:
                lines.append(
                    f"  {pair.condition_a} vs {pair.condition_b}:"
                    f" diff={pair.mean_difference:.4g} q={pair.q_stat:.4g}"
                    f" p={pair.p_adjusted:.4g}"
                )
    for note in summary.notes:
        lines.append(f"note: {note}")
    if args.out:
        _write_csv(
            args.out,
            ["statement", *group_by, "mean", "median", "std", "n"],
            csv_rows,
        )
    print("\n".join(lines))
    return 0


def _cmd_profile(args: argparse.Namespace) -> int:
    rows = read_feature_table_csv(args.features)
    # rebuild a minimal in-memory table for the aggregation helper
    from voiceadapt.corpus import ClipRecord, FeatureTable
    from voiceadapt.features import FeatureVector

    table_rows = []
    for row in rows:
        record = ClipRecord(
            clip_path=Path(str(row["clip_path"])),
            speaker_id=str(row["speaker_id"]),
            gender=str(row["gender"]),
            ambience=str(row["ambience"]),
            condition=str(row["condition"]),
            role=str(row["role"]),
        )
        vector = FeatureVector(**{name: row[name] for name in FEATURE_NAMES})
        table_rows.append((record, vector))
    table = FeatureTable(table_rows, [])
    from voiceadapt.planner import build_profile

    profile = build_profile(
        table,
        args.ambience,
        speaker=args.speaker,
        gender=args.gender,
        condition=args.condition,
    )
    text = profile.to_json() + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return 0


def _cmd_plan(args: argparse.Namespace) -> int:
    profile = load_profile(args.profile)
    baseline = load_baseline(args.baseline)
    plan = plan_prosody(profile, baseline, target_dbfs=args.target_dbfs)
    text = plan.to_json() + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    if args.text:
        print(emit_ssml(plan, args.text))
    return 0


def _cmd_radar(args: argparse.Namespace) -> int:
    profiles = [load_profile(p) for p in args.profiles]
    baseline = load_profile(args.baseline)
    axes = tuple(args.axes.split(",")) if args.axes else FEATURE_NAMES
    svg = radar_svg(profiles, baseline, axes)
    Path(args.out).write_text(svg)
    print(f"wrote radar figure to {args.out}")
    return 0


def _cmd_normalize(args: argparse.Namespace) -> int:
    clip = load_clip(args.infile, target_rate=args.rate)
    normalized, clipped = apply_gain_to_dbfs(clip, args.target_dbfs)
    save_clip(normalized, args.out)
    if clipped:
        print("warning: normalization clipped peaks at full scale", file=sys.stderr)
    print(f"wrote {args.out} at {measure_dbfs(normalized):.2f} dBFS")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voiceadapt",
        description="Vocal feature extraction, ambience statistics, and prosody planning.",
    )
    parser.add_argument(
        "--verbose", action="store_true", help="print the version stamp to stderr"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="featurize every clip in a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--failures", help="write the per-clip failure log here")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("validate", help="structural report for a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("batches", help="list speaker-ambience batches")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=_cmd_batches)

    p = sub.add_parser("anova", help="repeated-measures ANOVA per feature")
    p.add_argument("--features", required=True)
    p.add_argument("--feature", help="restrict to one feature")
    p.add_argument("--condition", choices=("scripted", "unscripted"),
                   help="restrict to one recording condition")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--out", help="also write the table as CSV")
    p.set_defaults(func=_cmd_anova)

    p = sub.add_parser("tukey", help="Tukey HSD post-hoc for one feature")
    p.add_argument("--features", required=True)
    p.add_argument("--feature", required=True)
    p.add_argument("--condition", choices=("scripted", "unscripted"))
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out", help="also write the table as CSV")
    p.set_defaults(func=_cmd_tukey)

    p = sub.add_parser("ratings", help="summarize Likert rating records")
    p.add_argument("--ratings", required=True)
    p.add_argument("--group-by", default="voice_type")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_ratings)

    p = sub.add_parser("profile", help="aggregate features for one ambience")
    p.add_argument("--features", required=True)
    p.add_argument("--ambience", required=True)
    p.add_argument("--speaker")
    p.add_argument("--gender")
    p.add_argument("--condition")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_profile)

    p = sub.add_parser("plan", help="derive a prosody plan from a profile")
    p.add_argument("--profile", required=True)
    p.add_argument("--baseline", required=True)
    p.add_argument("--target-dbfs", type=float, default=DEFAULT_TARGET_DBFS)
    p.add_argument("--text", help="also emit prosody markup for this utterance")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("radar", help="baseline-normalized radar SVG")
    p.add_argument("--profiles", nargs="+", required=True)
    p.add_argument("--baseline", required=True)
    p.add_argument("--axes", help="comma-separated feature names (default: all)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_radar)

    p = sub.add_parser("normalize", help="rewrite a WAV at a target dBFS level")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--target-dbfs", type=float, default=DEFAULT_TARGET_DBFS)
    p.add_argument("--rate", type=int, default=DEFAULT_SAMPLE_RATE)
    p.set_defaults(func=_cmd_normalize)

    return parser


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.verbose:
        print(f"voiceadapt {voiceadapt.__version__}", file=sys.stderr)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))
