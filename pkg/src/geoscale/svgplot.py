"""Standalone SVG scatter/fit plots with no display dependency.

Output is a plain SVG string with the plotted data embedded as a text
table inside a <desc> element, so a plot file is self-describing and
byte-identical across runs for identical inputs.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

_W, _H = 640, 440
_MARGIN = 60


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _ticks(lo: float, hi: float, log: bool) -> list[float]:
    if log:
        lo_e = math.floor(math.log10(lo))
        hi_e = math.ceil(math.log10(hi))
        return [10.0**e for e in range(lo_e, hi_e + 1)]
    span = hi - lo or 1.0
    step = 10 ** math.floor(math.log10(span / 4))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= 6:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    out = []
    t = start
    while t <= hi + 1e-12 * span:
        out.append(t)
        t += step
    return out


def scatter_fit_svg(
    x: Sequence[float],
    y: Sequence[float],
    fit_x: Sequence[float] | None = None,
    fit_y: Sequence[float] | None = None,
    *,
    excluded_x: Sequence[float] = (),
    excluded_y: Sequence[float] = (),
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    log_x: bool = False,
    log_y: bool = False,
) -> str:
    """Scatter plot with an optional fitted curve and excluded points."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    all_x = np.concatenate([x, np.asarray(excluded_x, dtype=np.float64)]) if len(excluded_x) else x
    all_y = np.concatenate([y, np.asarray(excluded_y, dtype=np.float64)]) if len(excluded_y) else y
    if fit_x is not None:
        all_x = np.concatenate([all_x, np.asarray(fit_x, dtype=np.float64)])
        all_y = np.concatenate([all_y, np.asarray(fit_y, dtype=np.float64)])

    def tx(v):
        return math.log10(v) if log_x else v

    def ty(v):
        return math.log10(v) if log_y else v

    x_lo, x_hi = float(all_x.min()), float(all_x.max())
    y_lo, y_hi = float(all_y.min()), float(all_y.max())
    sx_lo, sx_hi = tx(x_lo), tx(x_hi)
    sy_lo, sy_hi = ty(y_lo), ty(y_hi)
    pad_x = (sx_hi - sx_lo or 1.0) * 0.05
    pad_y = (sy_hi - sy_lo or 1.0) * 0.05
    sx_lo, sx_hi = sx_lo - pad_x, sx_hi + pad_x
    sy_lo, sy_hi = sy_lo - pad_y, sy_hi + pad_y

    def px(v):
        return _MARGIN + (tx(v) - sx_lo) / (sx_hi - sx_lo) * (_W - 2 * _MARGIN)

    def py(v):
        return _H - _MARGIN - (ty(v) - sy_lo) / (sy_hi - sy_lo) * (_H - 2 * _MARGIN)

    rows = ["x\ty"] + [f"{_fmt(a)}\t{_fmt(b)}" for a, b in zip(x, y)]
    if len(excluded_x):
        rows += ["excluded_x\texcluded_y"] + [
            f"{_fmt(a)}\t{_fmt(b)}" for a, b in zip(excluded_x, excluded_y)
        ]

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        "<desc>" + "&#10;".join(rows) + "</desc>",
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{_W - 2 * _MARGIN}" '
        f'height="{_H - 2 * _MARGIN}" fill="none" stroke="black"/>',
    ]
    if title:
        parts.append(
            f'<text x="{_W // 2}" y="24" text-anchor="middle" font-family="sans-serif" '
            f'font-size="14">{title}</text>'
        )
    for t in _ticks(x_lo, x_hi, log_x):
        if x_lo <= t <= x_hi:
            parts.append(
                f'<line x1="{_fmt(px(t))}" y1="{_H - _MARGIN}" x2="{_fmt(px(t))}" '
                f'y2="{_H - _MARGIN + 5}" stroke="black"/>'
                f'<text x="{_fmt(px(t))}" y="{_H - _MARGIN + 18}" text-anchor="middle" '
                f'font-family="sans-serif" font-size="10">{_fmt(t)}</text>'
            )
    for t in _ticks(y_lo, y_hi, log_y):
        if y_lo <= t <= y_hi:
            parts.append(
                f'<line x1="{_MARGIN - 5}" y1="{_fmt(py(t))}" x2="{_MARGIN}" '
                f'y2="{_fmt(py(t))}" stroke="black"/>'
                f'<text x="{_MARGIN - 8}" y="{_fmt(py(t) + 3)}" text-anchor="end" '
                f'font-family="sans-serif" font-size="10">{_fmt(t)}</text>'
            )
    if x_label:
        parts.append(
            f'<text x="{_W // 2}" y="{_H - 12}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">{x_label}</text>'
        )
    if y_label:
        parts.append(
            f'<text x="16" y="{_H // 2}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="12" transform="rotate(-90 16 {_H // 2})">{y_label}</text>'
        )
    if fit_x is not None and len(fit_x):
        path = " ".join(
            f"{'M' if i == 0 else 'L'}{_fmt(px(a))},{_fmt(py(b))}"
            for i, (a, b) in enumerate(zip(fit_x, fit_y))
        )
        parts.append(f'<path d="{path}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>')
    for a, b in zip(x, y):
        parts.append(f'<circle cx="{_fmt(px(a))}" cy="{_fmt(py(b))}" r="4" fill="#d62728"/>')
    for a, b in zip(excluded_x, excluded_y):
        parts.append(
            f'<circle cx="{_fmt(px(a))}" cy="{_fmt(py(b))}" r="4" fill="none" '
            f'stroke="#7f7f7f" stroke-width="1.5"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts)
