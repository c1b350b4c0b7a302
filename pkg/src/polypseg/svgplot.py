"""Standalone SVG line charts, no plotting dependency.

One chart: the four detection metrics against the superpixel count, with
optional vertical error bars. Colors follow the usual convention here:
sensitivity red, specificity blue, accuracy green, precision purple.
"""

from __future__ import annotations

from pathlib import Path

SERIES_COLORS = {
    "sensitivity": "#d62728",
    "specificity": "#1f77b4",
    "accuracy": "#2ca02c",
    "precision": "#9467bd",
}

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 64, 24, 48, 56


def _x_positions(n: int) -> list[float]:
    span = WIDTH - MARGIN_L - MARGIN_R
    if n == 1:
        return [MARGIN_L + span / 2]
    return [MARGIN_L + i * span / (n - 1) for i in range(n)]


def _y_pos(v: float) -> float:
    return MARGIN_T + (1.0 - v) * (HEIGHT - MARGIN_T - MARGIN_B)


def metrics_chart(
    k_values: list[int],
    series: dict[str, list[float | None]],
    errors: dict[str, list[float | None]] | None = None,
    title: str = "",
) -> str:
    """Build the SVG document; None values leave gaps in their line."""
    xs = _x_positions(len(k_values))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="15">{title}</text>',
    ]

    # axes and horizontal gridlines every 0.2
    x0, x1 = MARGIN_L, WIDTH - MARGIN_R
    y0, y1 = _y_pos(0.0), _y_pos(1.0)
    for tick in range(6):
        v = tick / 5
        y = _y_pos(v)
        parts.append(f'<line x1="{x0}" y1="{y:.1f}" x2="{x1}" y2="{y:.1f}" stroke="#dddddd"/>')
        parts.append(f'<text x="{x0 - 8}" y="{y + 4:.1f}" text-anchor="end" font-size="11">{v:.1f}</text>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>')
    for x, k in zip(xs, k_values):
        parts.append(f'<text x="{x:.1f}" y="{y0 + 18:.1f}" text-anchor="middle" font-size="11">{k}</text>')
    parts.append(
        f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 14}" text-anchor="middle" font-size="12">superpixel count</text>'
    )

    for name, values in series.items():
        color = SERIES_COLORS.get(name, "#333333")
        err = (errors or {}).get(name)
        points = [(x, v) for x, v in zip(xs, values) if v is not None]
        if points:
            path = "M " + " L ".join(f"{x:.1f} {_y_pos(v):.1f}" for x, v in points)
            parts.append(f'<path d="{path}" fill="none" stroke="{color}" stroke-width="2"/>')
        for i, (x, v) in enumerate(zip(xs, values)):
            if v is None:
                continue
            parts.append(f'<circle cx="{x:.1f}" cy="{_y_pos(v):.1f}" r="3" fill="{color}"/>')
            if err and i < len(err) and err[i]:
                lo = _y_pos(max(0.0, v - err[i]))
                hi = _y_pos(min(1.0, v + err[i]))
                parts.append(f'<line x1="{x:.1f}" y1="{lo:.1f}" x2="{x:.1f}" y2="{hi:.1f}" stroke="{color}"/>')
                for yy in (lo, hi):
                    parts.append(
                        f'<line x1="{x - 4:.1f}" y1="{yy:.1f}" x2="{x + 4:.1f}" y2="{yy:.1f}" stroke="{color}"/>'
                    )

    for i, name in enumerate(series):
        color = SERIES_COLORS.get(name, "#333333")
        lx = x0 + 10 + i * 130
        parts.append(f'<line x1="{lx}" y1="{MARGIN_T - 10}" x2="{lx + 20}" y2="{MARGIN_T - 10}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 25}" y="{MARGIN_T - 6}" font-size="11">{name}</text>')

    parts.append("</svg>")
    return "\n".join(parts)


def write_metrics_chart(path: str | Path, k_values, series, errors=None, title="") -> None:
    Path(path).write_text(metrics_chart(list(k_values), series, errors, title) + "\n")
