"""Self-contained SVG plots with deterministic output (no plotting dependency).

Numbers are formatted with a fixed precision and nothing time- or
environment-dependent is written, so the same data yields the same bytes.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import ParameterError

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_W, _H = 640, 420
_ML, _MR, _MT, _MB = 64, 16, 34, 46


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _ticks(lo: float, hi: float, n: int = 5):
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ParameterError("cannot build an axis over non-finite data")
    if hi <= lo:
        hi = lo + (abs(lo) if lo != 0 else 1.0)
    span = hi - lo
    step = 10.0 ** math.floor(math.log10(span / n))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= n:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * span:
        ticks.append(0.0 if abs(t) < 1e-12 * span else t)
        t += step
    return ticks


class _Canvas:
    def __init__(self, title, xlabel, ylabel):
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
            f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
            f'<rect width="{_W}" height="{_H}" fill="white"/>',
        ]
        if title:
            self.parts.append(
                f'<text x="{_W / 2}" y="20" text-anchor="middle" '
                f'font-size="14">{title}</text>')
        if xlabel:
            self.parts.append(
                f'<text x="{(_ML + _W - _MR) / 2}" y="{_H - 10}" '
                f'text-anchor="middle">{xlabel}</text>')
        if ylabel:
            y = (_MT + _H - _MB) / 2
            self.parts.append(
                f'<text x="14" y="{y}" text-anchor="middle" '
                f'transform="rotate(-90 14 {y})">{ylabel}</text>')

    def write(self, path):
        self.parts.append("</svg>")
        with open(path, "w") as fh:
            fh.write("\n".join(self.parts) + "\n")


def _scales(xlo, xhi, ylo, yhi):
    def sx(x):
        return _ML + (x - xlo) / (xhi - xlo) * (_W - _ML - _MR)

    def sy(y):
        return _H - _MB - (y - ylo) / (yhi - ylo) * (_H - _MT - _MB)

    return sx, sy


def _axes(canvas, sx, sy, xticks, yticks, xlo, xhi, ylo, yhi, y_fmt=_fmt):
    canvas.parts.append(
        f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" '
        f'height="{_H - _MT - _MB}" fill="none" stroke="#888"/>')
    for t in xticks:
        if not (xlo <= t <= xhi):
            continue
        x = _fmt(sx(t))
        canvas.parts.append(
            f'<line x1="{x}" y1="{_H - _MB}" x2="{x}" y2="{_H - _MB + 4}" stroke="#888"/>')
        canvas.parts.append(
            f'<text x="{x}" y="{_H - _MB + 16}" text-anchor="middle">{_fmt(t)}</text>')
    for t in yticks:
        if not (ylo <= t <= yhi):
            continue
        y = _fmt(sy(t))
        canvas.parts.append(
            f'<line x1="{_ML - 4}" y1="{y}" x2="{_ML}" y2="{y}" stroke="#888"/>')
        canvas.parts.append(
            f'<text x="{_ML - 7}" y="{y}" text-anchor="end" dy="4">{y_fmt(t)}</text>')


def line_plot(path, x, series: dict, title="", xlabel="", ylabel="",
              log_y: bool = False):
    """Plot one or more y-series over shared x values and write an SVG file."""
    x = np.asarray(x, dtype=float)
    if not series:
        raise ParameterError("no series to plot")
    ys = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    for k, v in ys.items():
        if v.shape != x.shape:
            raise ParameterError(f"series {k!r} does not match x")
        if log_y and np.any(v <= 0):
            raise ParameterError(f"series {k!r} not positive; cannot log-scale")
    if log_y:
        ys = {k: np.log10(v) for k, v in ys.items()}

    ylo = min(v.min() for v in ys.values())
    yhi = max(v.max() for v in ys.values())
    if yhi == ylo:
        ylo, yhi = ylo - 1, yhi + 1
    pad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad
    xlo, xhi = float(x.min()), float(x.max())
    if xhi == xlo:
        xlo, xhi = xlo - 1, xhi + 1
    sx, sy = _scales(xlo, xhi, ylo, yhi)

    canvas = _Canvas(title, xlabel, ylabel)
    y_fmt = (lambda t: _fmt(10.0 ** t)) if log_y else _fmt
    _axes(canvas, sx, sy, _ticks(xlo, xhi), _ticks(ylo, yhi),
          xlo, xhi, ylo, yhi, y_fmt)
    for i, (label, v) in enumerate(ys.items()):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(f"{_fmt(sx(xi))},{_fmt(sy(yi))}" for xi, yi in zip(x, v))
        canvas.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = _MT + 16 + 16 * i
        canvas.parts.append(
            f'<line x1="{_W - _MR - 130}" y1="{ly - 4}" x2="{_W - _MR - 106}" '
            f'y2="{ly - 4}" stroke="{color}" stroke-width="1.5"/>')
        canvas.parts.append(f'<text x="{_W - _MR - 100}" y="{ly}">{label}</text>')
    canvas.write(path)


def box_plot(path, positions, groups: dict, title="", xlabel="", ylabel="",
             marks: dict | None = None):
    """Grouped box plots: one box per (group, position) from raw samples.

    positions labels the x-axis; groups maps a group label to a list of
    sample arrays, one per position. Boxes span the quartiles with whiskers
    at the most extreme points within 1.5 IQR. marks optionally draws a
    horizontal reference tick per position (e.g. a known target value).
    """
    if not groups:
        raise ParameterError("no groups to plot")
    n_pos = len(positions)
    data = {}
    for label, arrays in groups.items():
        if len(arrays) != n_pos:
            raise ParameterError(f"group {label!r} does not match positions")
        data[label] = [np.asarray(a, dtype=float) for a in arrays]

    allv = np.concatenate([a for arrays in data.values() for a in arrays])
    ylo, yhi = float(allv.min()), float(allv.max())
    if marks:
        ylo = min(ylo, min(marks.values()))
        yhi = max(yhi, max(marks.values()))
    if yhi == ylo:
        ylo, yhi = ylo - 1, yhi + 1
    pad = 0.07 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad
    sx, sy = _scales(-0.5, n_pos - 0.5, ylo, yhi)

    canvas = _Canvas(title, xlabel, ylabel)
    _axes(canvas, sx, sy, [], _ticks(ylo, yhi), -0.5, n_pos - 0.5, ylo, yhi)
    for i, name in enumerate(positions):
        xpix = _fmt(sx(i))
        canvas.parts.append(
            f'<text x="{xpix}" y="{_H - _MB + 16}" text-anchor="middle">{name}</text>')

    n_groups = len(data)
    slot = 0.8 / n_groups
    for gi, (label, arrays) in enumerate(data.items()):
        color = _PALETTE[gi % len(_PALETTE)]
        for i, a in enumerate(arrays):
            q1, q2, q3 = np.percentile(a, [25, 50, 75])
            iqr = q3 - q1
            lo = float(a[a >= q1 - 1.5 * iqr].min())
            hi = float(a[a <= q3 + 1.5 * iqr].max())
            cx = i - 0.4 + slot * (gi + 0.5)
            x0, x1 = sx(cx - slot * 0.38), sx(cx + slot * 0.38)
            xm = sx(cx)
            canvas.parts.append(
                f'<line x1="{_fmt(xm)}" y1="{_fmt(sy(lo))}" x2="{_fmt(xm)}" '
                f'y2="{_fmt(sy(q1))}" stroke="{color}"/>')
            canvas.parts.append(
                f'<line x1="{_fmt(xm)}" y1="{_fmt(sy(q3))}" x2="{_fmt(xm)}" '
                f'y2="{_fmt(sy(hi))}" stroke="{color}"/>')
            canvas.parts.append(
                f'<rect x="{_fmt(x0)}" y="{_fmt(sy(q3))}" width="{_fmt(x1 - x0)}" '
                f'height="{_fmt(sy(q1) - sy(q3))}" fill="{color}" fill-opacity="0.25" '
                f'stroke="{color}"/>')
            canvas.parts.append(
                f'<line x1="{_fmt(x0)}" y1="{_fmt(sy(q2))}" x2="{_fmt(x1)}" '
                f'y2="{_fmt(sy(q2))}" stroke="{color}" stroke-width="1.5"/>')
        ly = _MT + 16 + 16 * gi
        canvas.parts.append(
            f'<rect x="{_W - _MR - 130}" y="{ly - 12}" width="22" height="10" '
            f'fill="{color}" fill-opacity="0.25" stroke="{color}"/>')
        canvas.parts.append(f'<text x="{_W - _MR - 100}" y="{ly - 2}">{label}</text>')

    if marks:
        for i, name in enumerate(positions):
            if name not in marks:
                continue
            y = _fmt(sy(marks[name]))
            x0, x1 = _fmt(sx(i - 0.45)), _fmt(sx(i + 0.45))
            canvas.parts.append(
                f'<line x1="{x0}" y1="{y}" x2="{x1}" y2="{y}" stroke="#333" '
                f'stroke-dasharray="4 3"/>')
    canvas.write(path)
