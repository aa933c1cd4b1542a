"""Tiny deterministic SVG line plots (no timestamps, no external deps)."""

from __future__ import annotations

from pathlib import Path

_W, _H, _PAD = 640, 360, 46
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def write_line_plot(path: str | Path, series: dict[str, list[float]],
                    title: str, x_label: str = "epoch") -> None:
    values = [v for ys in series.values() for v in ys if v == v]
    if not values:
        return
    lo, hi = min(values), max(values)
    if hi - lo < 1e-12:
        hi = lo + 1.0
    n = max(len(ys) for ys in series.values())

    def sx(i: float) -> float:
        return _PAD + (i / max(1, n - 1)) * (_W - 2 * _PAD)

    def sy(v: float) -> float:
        return _H - _PAD - ((v - lo) / (hi - lo)) * (_H - 2 * _PAD)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.0f}" y="20" text-anchor="middle" '
        f'font-family="monospace" font-size="14">{title}</text>',
        f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" '
        f'stroke="black"/>',
        f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" stroke="black"/>',
        f'<text x="{_W / 2:.0f}" y="{_H - 10}" text-anchor="middle" '
        f'font-family="monospace" font-size="11">{x_label}</text>',
        f'<text x="12" y="{_PAD - 8}" font-family="monospace" font-size="11">'
        f'{hi:.4g}</text>',
        f'<text x="12" y="{_H - _PAD + 12}" font-family="monospace" font-size="11">'
        f'{lo:.4g}</text>',
    ]
    for ci, (name, ys) in enumerate(series.items()):
        color = _COLORS[ci % len(_COLORS)]
        pts = " ".join(f"{sx(i):.2f},{sy(v):.2f}" for i, v in enumerate(ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        parts.append(f'<text x="{_W - _PAD + 4}" y="{_PAD + 16 * ci + 10}" '
                     f'font-family="monospace" font-size="11" fill="{color}">'
                     f'{name}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
