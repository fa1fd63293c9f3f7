"""Minimal SVG/CSV emitters for AUC bar charts (grouped bars, 1.96-SE
error bars). Pure string generation, deterministic output."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class BarGroup:
    label: str
    # One (series label, value, standard error) triple per bar in the group.
    bars: tuple[tuple[str, float, float], ...]


_COLORS = ("#4878cf", "#ee854a", "#6acc64", "#d65f5f")


def bar_chart_svg(
    groups: Sequence[BarGroup],
    title: str = "",
    y_label: str = "AUC",
    y_min: float = 0.4,
    y_max: float = 1.0,
    width: int = 640,
    height: int = 400,
) -> str:
    margin_left, margin_right, margin_top, margin_bottom = 60, 20, 40, 60
    plot_w = width - margin_left - margin_right
    plot_h = height - margin_top - margin_bottom

    def y_px(value: float) -> float:
        clamped = min(max(value, y_min), y_max)
        return margin_top + plot_h * (1.0 - (clamped - y_min) / (y_max - y_min))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="15">{title}</text>'
        )
    parts.append(
        f'<text x="14" y="{margin_top + plot_h / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 14 {margin_top + plot_h / 2:.1f})">{y_label}</text>'
    )

    # Horizontal grid lines and axis ticks every 0.1.
    tick = y_min
    while tick <= y_max + 1e-9:
        py = y_px(tick)
        parts.append(
            f'<line x1="{margin_left}" y1="{py:.1f}" x2="{width - margin_right}" '
            f'y2="{py:.1f}" stroke="#dddddd"/>'
        )
        parts.append(
            f'<text x="{margin_left - 6}" y="{py + 4:.1f}" text-anchor="end">{tick:.1f}</text>'
        )
        tick = round(tick + 0.1, 10)

    n_groups = max(len(groups), 1)
    group_w = plot_w / n_groups
    series_labels: list[str] = []
    for gi, group in enumerate(groups):
        n_bars = max(len(group.bars), 1)
        bar_w = group_w * 0.7 / n_bars
        x0 = margin_left + gi * group_w + group_w * 0.15
        for bi, (series, value, se) in enumerate(group.bars):
            if series not in series_labels:
                series_labels.append(series)
            color = _COLORS[series_labels.index(series) % len(_COLORS)]
            x = x0 + bi * bar_w
            top = y_px(value)
            parts.append(
                f'<rect x="{x:.1f}" y="{top:.1f}" width="{bar_w * 0.9:.1f}" '
                f'height="{margin_top + plot_h - top:.1f}" fill="{color}"/>'
            )
            # 1.96-SE error bar.
            cx = x + bar_w * 0.45
            lo, hi = y_px(value - 1.96 * se), y_px(value + 1.96 * se)
            parts.append(
                f'<line x1="{cx:.1f}" y1="{lo:.1f}" x2="{cx:.1f}" y2="{hi:.1f}" '
                f'stroke="black" stroke-width="1.5"/>'
            )
            for ey in (lo, hi):
                parts.append(
                    f'<line x1="{cx - 4:.1f}" y1="{ey:.1f}" x2="{cx + 4:.1f}" '
                    f'y2="{ey:.1f}" stroke="black" stroke-width="1.5"/>'
                )
        parts.append(
            f'<text x="{margin_left + (gi + 0.5) * group_w:.1f}" '
            f'y="{height - margin_bottom + 18}" text-anchor="middle">{group.label}</text>'
        )

    for si, series in enumerate(series_labels):
        lx = margin_left + 10 + si * 140
        ly = height - 18
        parts.append(
            f'<rect x="{lx}" y="{ly - 10}" width="12" height="12" '
            f'fill="{_COLORS[si % len(_COLORS)]}"/>'
        )
        parts.append(f'<text x="{lx + 18}" y="{ly}">{series}</text>')

    parts.append("</svg>")
    return "\n".join(parts)


def bar_chart_csv(groups: Sequence[BarGroup]) -> str:
    lines = ["group,series,value,standard_error"]
    for group in groups:
        for series, value, se in group.bars:
            lines.append(f"{group.label},{series},{value!r},{se!r}")
    return "\n".join(lines) + "\n"
