"""Baseline-normalized radar figures as standalone SVG documents.

Every profile value is divided by the baseline value on the same axis, so
the baseline itself is the dotted unit ring. Layout is fixed (800x800,
axes clockwise from 12 o'clock) and rendering is deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from voiceadapt.planner import AmbienceProfile

CANVAS = 800
CENTER = CANVAS / 2.0
UNIT_RADIUS = 160.0
LABEL_RADIUS_FACTOR = 1.08

PALETTE = ("#c0392b", "#2980b9", "#27ae60", "#8e44ad", "#d35400", "#16a085", "#7f8c8d")


class RadarError(ValueError):
    """Radar figure cannot be built from the given profiles."""


@dataclass(frozen=True)
class RadarSpec:
    """Axes plus per-series baseline-normalized values (baseline ring = 1)."""

    axes: tuple[str, ...]
    series: tuple[tuple[str, tuple[float, ...]], ...]
    baseline_ring: float = 1.0

    def __post_init__(self) -> None:
        if not self.axes:
            raise RadarError("radar needs at least one axis")
        for label, values in self.series:
            if len(values) != len(self.axes):
                raise RadarError(f"series {label!r} has wrong axis count")
            if any(not math.isfinite(v) or v <= 0 for v in values):
                raise RadarError(f"series {label!r} has non-positive axis values")


def build_radar_spec(
    profiles: list[AmbienceProfile],
    baseline: AmbienceProfile,
    axes: tuple[str, ...],
) -> RadarSpec:
    """Normalize each profile's mean aggregates by the baseline's."""
    base_values = []
    for axis in axes:
        if axis not in baseline.features:
            raise RadarError(f"baseline profile lacks axis {axis!r}")
        value = baseline.features[axis].mean
        if value == 0 or not math.isfinite(value):
            raise RadarError(f"baseline axis {axis!r} is zero or non-finite")
        base_values.append(value)
    series = []
    for profile in profiles:
        values = []
        for axis, base in zip(axes, base_values):
            if axis not in profile.features:
                raise RadarError(f"profile {profile.ambience!r} lacks axis {axis!r}")
            ratio = profile.features[axis].mean / base
            if not math.isfinite(ratio) or ratio <= 0:
                raise RadarError(
                    f"axis {axis!r} of {profile.ambience!r} does not normalize"
                    " to a positive ratio"
                )
            values.append(ratio)
        series.append((profile.ambience, tuple(values)))
    return RadarSpec(tuple(axes), tuple(series))


def _vertex(axis_index: int, n_axes: int, radius: float) -> tuple[float, float]:
    angle = 2.0 * math.pi * axis_index / n_axes  # clockwise from 12 o'clock
    return CENTER + radius * math.sin(angle), CENTER - radius * math.cos(angle)


def render_radar(spec: RadarSpec) -> str:
    n = len(spec.axes)
    max_ratio = max((v for _, vs in spec.series for v in vs), default=1.0)
    rim = UNIT_RADIUS * max(1.0, max_ratio) * LABEL_RADIUS_FACTOR

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS}" height="{CANVAS}"'
        f' viewBox="0 0 {CANVAS} {CANVAS}">\n'
        f'<rect width="{CANVAS}" height="{CANVAS}" fill="white"/>\n'
    ]
    for i, axis in enumerate(spec.axes):
        x, y = _vertex(i, n, rim)
        parts.append(
            f'<line x1="{CENTER:.2f}" y1="{CENTER:.2f}" x2="{x:.2f}" y2="{y:.2f}"'
            ' stroke="#cccccc" stroke-width="1"/>\n'
        )
        lx, ly = _vertex(i, n, rim + 18.0)
        parts.append(
            f'<text x="{lx:.2f}" y="{ly:.2f}" font-size="14" font-family="sans-serif"'
            f' text-anchor="middle" fill="#333333">{axis}</text>\n'
        )
    ring = UNIT_RADIUS * spec.baseline_ring
    parts.append(
        f'<circle cx="{CENTER:.2f}" cy="{CENTER:.2f}" r="{ring:.2f}"'
        ' fill="none" stroke="#555555" stroke-width="1.5" stroke-dasharray="5 5"/>\n'
    )
    for s, (label, values) in enumerate(spec.series):
        color = PALETTE[s % len(PALETTE)]
        points = " ".join(
            f"{x:.2f},{y:.2f}"
            for x, y in (
                _vertex(i, n, UNIT_RADIUS * v) for i, v in enumerate(values)
            )
        )
        parts.append(
            f'<polygon points="{points}" fill="{color}" fill-opacity="0.15"'
            f' stroke="{color}" stroke-width="2"/>\n'
        )
        parts.append(
            f'<text x="20" y="{30 + 20 * s}" font-size="14" font-family="sans-serif"'
            f' fill="{color}">{label}</text>\n'
        )
    parts.append("</svg>\n")
    return "".join(parts)


def radar_svg(
    profiles: list[AmbienceProfile],
    baseline: AmbienceProfile,
    axes: tuple[str, ...],
) -> str:
    """Baseline-normalized radar chart for the given profiles."""
    return render_radar(build_radar_spec(profiles, baseline, axes))
