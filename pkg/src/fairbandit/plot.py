"""Dependency-free SVG line charts for long-format result tables."""

from __future__ import annotations

from collections import defaultdict
from html import escape
from pathlib import Path

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f")
WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=170, top=30, bottom=50)


class PlotError(ValueError):
    pass


def _series(rows, metric: str) -> dict[str, list[tuple[int, float]]]:
    """Group rows of ``metric`` (or ``<prefix>.metric``) into labelled series.

    Aggregate tables contribute one series per prefix from their ``mean``
    rows; per-trial tables contribute one series per trial and prefix.
    """
    rows = list(rows)
    if not rows:
        raise PlotError("table is empty")
    available = sorted({r[3] for r in rows})
    matching = [m for m in available if m == metric or m.endswith("." + metric)]
    if not matching:
        raise PlotError(f"metric {metric!r} not found; available: {', '.join(available)}")
    has_mean = any(r[1] == "mean" for r in rows)
    out: dict[str, list[tuple[int, float]]] = defaultdict(list)
    for _, trial, t, name, value in rows:
        if name not in matching or trial == "stderr" or (has_mean and trial != "mean"):
            continue
        label = name[: -len(metric) - 1] if name != metric else metric
        if not has_mean:
            label = f"{label} #{trial}"
        out[label].append((int(t), float(value)))
    for pts in out.values():
        pts.sort()
    return dict(out)


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def render_svg(rows, metric: str, title: str | None = None) -> str:
    series = _series(rows, metric)
    xs = [t for pts in series.values() for t, _ in pts]
    ys = [v for pts in series.values() for _, v in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(0.0, min(ys)), max(ys)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(t):
        return MARGIN["left"] + (t - x0) / (x1 - x0) * pw

    def py(v):
        return MARGIN["top"] + (1 - (v - y0) / (y1 - y0)) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title or metric)}</text>',
        f'<line x1="{px(x0):.2f}" y1="{py(y0):.2f}" x2="{px(x1):.2f}" y2="{py(y0):.2f}" stroke="black"/>',
        f'<line x1="{px(x0):.2f}" y1="{py(y0):.2f}" x2="{px(x0):.2f}" y2="{py(y1):.2f}" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        parts.append(f'<text x="{px(t):.2f}" y="{py(y0) + 16:.2f}" text-anchor="middle">{t:.4g}</text>')
    for v in _ticks(y0, y1):
        parts.append(f'<text x="{px(x0) - 6:.2f}" y="{py(v) + 4:.2f}" text-anchor="end">{v:.4g}</text>')
    parts.append(f'<text x="{px((x0 + x1) / 2):.2f}" y="{HEIGHT - 12}" text-anchor="middle">t</text>')
    for i, (label, pts) in enumerate(sorted(series.items())):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{px(t):.2f},{py(v):.2f}" for t, v in pts)
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}">'
                     f"<title>{escape(label)}</title></polyline>")
        ly = MARGIN["top"] + 14 * i + 8
        lx = WIDTH - MARGIN["right"] + 10
        parts.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 24}" y="{ly + 4}">{escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_plot(rows, metric: str, out, title: str | None = None) -> Path:
    """Write an SVG line chart of ``metric`` against ``t`` to ``out``."""
    text = render_svg(rows, metric, title)
    out = Path(out)
    out.write_text(text)
    return out
