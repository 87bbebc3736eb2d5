"""CSV, SVG and manifest writers.  Numbers are written with repr(), which
is locale independent and round-trips doubles exactly."""
from __future__ import annotations

import csv
import json
import math
import os
import time
from xml.sax.saxutils import escape

import numpy as np


def fmt(v) -> str:
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if v is None:
        return ""
    return str(v)


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    return rows[0], rows[1:]


def write_manifest(out_dir, config: dict, seed: int, files, started: float) -> None:
    from . import __version__

    stamp = {
        "artifact": "kesten",
        "version": __version__,
        "seed": seed,
        "config": config,
        "files": sorted(files),
        "started_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(started)),
        "finished_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as f:
        json.dump(stamp, f, indent=2, sort_keys=True)
        f.write("\n")


# ---------------------------------------------------------------- svg

W, H, PAD = 640, 420, 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _ticks(lo, hi, log):
    if log:
        a, b = math.floor(lo), math.ceil(hi)
        return [float(k) for k in range(a, b + 1)]
    span = hi - lo or 1.0
    step = 10 ** math.floor(math.log10(span / 4))
    for m in (1, 2, 5, 10):
        if span / (m * step) <= 6:
            step *= m
            break
    k0 = math.ceil(lo / step)
    out = []
    v = k0 * step
    while v <= hi + 1e-12 * span:
        out.append(v)
        v += step
    return out


def _label(v, log):
    return f"1e{int(v)}" if log else f"{v:.4g}"


def line_chart(path, series, title="", xlabel="", ylabel="", logx=False, logy=False,
               hline=None) -> None:
    """series: list of (name, xs, ys).  Log axes use log10 coordinates."""
    tx = (lambda v: math.log10(v)) if logx else float
    ty = (lambda v: math.log10(v)) if logy else float
    pts = [(name, [(tx(x), ty(y)) for x, y in zip(xs, ys)
                   if (x > 0 or not logx) and (y > 0 or not logy) and math.isfinite(y)])
           for name, xs, ys in series]
    allx = [p[0] for _, s in pts for p in s] or [0.0, 1.0]
    ally = [p[1] for _, s in pts for p in s] or [0.0, 1.0]
    if hline is not None:
        ally.append(ty(hline))
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    sx = lambda v: PAD + (v - x0) / (x1 - x0) * (W - 2 * PAD)
    sy = lambda v: H - PAD - (v - y0) / (y1 - y0) * (H - 2 * PAD)
    el = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
          f'<rect width="{W}" height="{H}" fill="white"/>',
          f'<text x="{W / 2:.1f}" y="24" text-anchor="middle" font-size="15">{escape(title)}</text>',
          f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD}" y2="{H - PAD}" stroke="black"/>',
          f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{H - PAD}" stroke="black"/>']
    for v in _ticks(x0, x1, logx):
        if x0 - 1e-9 <= v <= x1 + 1e-9:
            el.append(f'<line x1="{sx(v):.1f}" y1="{H - PAD}" x2="{sx(v):.1f}" y2="{H - PAD + 5}" stroke="black"/>')
            el.append(f'<text x="{sx(v):.1f}" y="{H - PAD + 18}" text-anchor="middle" font-size="11">{_label(v, logx)}</text>')
    for v in _ticks(y0, y1, logy):
        if y0 - 1e-9 <= v <= y1 + 1e-9:
            el.append(f'<line x1="{PAD - 5}" y1="{sy(v):.1f}" x2="{PAD}" y2="{sy(v):.1f}" stroke="black"/>')
            el.append(f'<text x="{PAD - 8}" y="{sy(v) + 4:.1f}" text-anchor="end" font-size="11">{_label(v, logy)}</text>')
    el.append(f'<text x="{W / 2:.1f}" y="{H - 15}" text-anchor="middle" font-size="13">{escape(xlabel)}</text>')
    el.append(f'<text x="16" y="{H / 2:.1f}" text-anchor="middle" font-size="13" '
              f'transform="rotate(-90 16 {H / 2:.1f})">{escape(ylabel)}</text>')
    if hline is not None:
        y = sy(ty(hline))
        el.append(f'<line x1="{PAD}" y1="{y:.1f}" x2="{W - PAD}" y2="{y:.1f}" stroke="gray" stroke-dasharray="4 3"/>')
    for i, (name, s) in enumerate(pts):
        c = COLORS[i % len(COLORS)]
        if s:
            d = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in s)
            el.append(f'<polyline fill="none" stroke="{c}" stroke-width="2" points="{d}"/>')
            el += [f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{c}"/>' for x, y in s]
        el.append(f'<text x="{W - PAD - 4}" y="{PAD + 14 * (i + 1)}" text-anchor="end" font-size="12" fill="{c}">{escape(name)}</text>')
    el.append("</svg>")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(el) + "\n")
