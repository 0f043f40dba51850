"""Minimal standalone SVG charts of observed vs. forecast WellBeing."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np
import pandas as pd

WIDTH, HEIGHT = 900, 320
PAD_L, PAD_R, PAD_T, PAD_B = 56, 16, 30, 36


def _fmt(v):
    return f"{v:.2f}"


def forecast_svg(frame: pd.DataFrame, marker=None, title: str = "") -> str:
    """Render a forecast table as SVG.

    `frame` is indexed by date with columns yhat, lower95, upper95 and
    observed (NaN allowed). Draws the band, the forecast line, the observed
    line and a dotted vertical line at `marker`.
    """
    idx = pd.DatetimeIndex(frame.index)
    x0, x1 = idx.min(), idx.max()
    span = max((x1 - x0) / pd.Timedelta(days=1), 1.0)
    cols = frame[["yhat", "lower95", "upper95", "observed"]].to_numpy(dtype=float)
    finite = cols[np.isfinite(cols)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    pw = WIDTH - PAD_L - PAD_R
    ph = HEIGHT - PAD_T - PAD_B

    def px(ts):
        return PAD_L + pw * ((ts - x0) / pd.Timedelta(days=1)) / span

    def py(v):
        return PAD_T + ph * (1.0 - (v - lo) / (hi - lo))

    xs = [px(t) for t in idx]

    def path(values):
        parts = []
        pen = "M"
        for x, v in zip(xs, values):
            if np.isfinite(v):
                parts.append(f"{pen}{_fmt(x)},{_fmt(py(v))}")
                pen = "L"
            else:
                pen = "M"
        return " ".join(parts)

    upper = frame["upper95"].to_numpy(dtype=float)
    lower = frame["lower95"].to_numpy(dtype=float)
    band = [f"{_fmt(x)},{_fmt(py(v))}" for x, v in zip(xs, upper)]
    band += [f"{_fmt(x)},{_fmt(py(v))}" for x, v in zip(reversed(xs), lower[::-1])]

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{PAD_L}" y="18" font-family="sans-serif" font-size="14">{escape(title)}</text>',
        f'<polygon class="band" points="{" ".join(band)}" fill="#9ecae1" fill-opacity="0.45" stroke="none"/>',
        f'<path class="forecast" d="{path(frame["yhat"].to_numpy(dtype=float))}" '
        'fill="none" stroke="#6baed6" stroke-width="1.2"/>',
        f'<path class="observed" d="{path(frame["observed"].to_numpy(dtype=float))}" '
        'fill="none" stroke="#08306b" stroke-width="1.2"/>',
    ]
    if marker is not None:
        mx = _fmt(px(pd.Timestamp(marker)))
        out.append(f'<line class="marker" x1="{mx}" x2="{mx}" y1="{PAD_T}" y2="{PAD_T + ph}" '
                   'stroke="black" stroke-dasharray="3,3"/>')
    # axes and a few labels
    out.append(f'<line x1="{PAD_L}" x2="{PAD_L}" y1="{PAD_T}" y2="{PAD_T + ph}" stroke="#444"/>')
    out.append(f'<line x1="{PAD_L}" x2="{PAD_L + pw}" y1="{PAD_T + ph}" y2="{PAD_T + ph}" stroke="#444"/>')
    for v in np.linspace(lo, hi, 5):
        out.append(f'<text x="{PAD_L - 6}" y="{_fmt(py(v) + 4)}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="10">{v:.1f}</text>')
    for year in range(x0.year, x1.year + 1):
        ts = pd.Timestamp(year=year, month=1, day=1)
        if x0 <= ts <= x1:
            out.append(f'<text x="{_fmt(px(ts))}" y="{HEIGHT - 12}" text-anchor="middle" '
                       f'font-family="sans-serif" font-size="10">{year}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
