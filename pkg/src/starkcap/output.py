"""CSV, JSON and SVG writers.

Outputs depend only on their inputs: no timestamps, fixed float
formatting, fixed ordering.  Every file carries the config hash.
"""
from __future__ import annotations

import io
import json
import math
import platform

import numpy as np

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def fmt(x):
    """A float with 17 significant digits (round-trips exactly)."""
    return "%.17g" % float(x)


def versions():
    import numba
    import scipy

    from . import __version__

    return {"starkcap": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "python": platform.python_version()}


def table_csv(header, rows, config_hash):
    buf = io.StringIO()
    buf.write(f"# config_sha256: {config_hash}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) if isinstance(v, (float, np.floating)) else str(v) for v in row) + "\n")
    return buf.getvalue()


def spectrum_csv(result, config_hash):
    rows = [(float(z.real), float(z.imag), float(r)) for z, r in zip(result.eigenvalues, result.residuals)]
    return table_csv(("re", "im", "residual"), rows, config_hash)


def trajectories_csv(trajectories, config_hash):
    rows = []
    for t in trajectories:
        speed = t.speed
        for j, (e, z) in enumerate(t.points):
            # speed is defined at interior points only
            s = float(speed[j - 1]) if 0 < j < len(t.points) - 1 else float("nan")
            rows.append((t.id, float(e), float(z.real), float(z.imag), s, t.status))
    return table_csv(("trajectory_id", "eps", "re", "im", "speed", "status"), rows, config_hash)


def _jsonable(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def run_json(config, results, residuals, config_hash, extra=None):
    doc = {"config": config, "results": results, "residuals": residuals,
           "versions": versions(), "config_sha256": config_hash}
    if extra:
        doc.update(extra)
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


# --------------------------------------------------------------------------
# SVG
# --------------------------------------------------------------------------

def trajectories_svg(trajectories, estimates, window, config_hash, size=(640, 480)):
    """Window scatter: one ``<g>`` per trajectory, estimates as crosses,
    the window outline, the axes and the ray ``arg z = -pi/4``."""
    W, H = size
    pad = 40
    dx = 0.1 * (window.re_max - window.re_min)
    dy = 0.1 * (window.im_max - window.im_min)
    x0, x1 = window.re_min - dx, window.re_max + dx
    y0, y1 = window.im_min - dy, window.im_max + dy

    def X(re):
        return pad + (re - x0) / (x1 - x0) * (W - 2 * pad)

    def Y(im):
        return H - pad - (im - y0) / (y1 - y0) * (H - 2 * pad)

    f = lambda v: "%.3f" % v
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f"<!-- config_sha256: {config_hash} -->",
        "<defs><clipPath id=\"plot\">"
        f'<rect x="{pad}" y="{pad}" width="{W - 2 * pad}" height="{H - 2 * pad}"/></clipPath></defs>',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        '<g id="axes" stroke="#999999" stroke-width="1" clip-path="url(#plot)">',
    ]
    if x0 <= 0 <= x1:
        out.append(f'<line x1="{f(X(0))}" y1="{f(Y(y0))}" x2="{f(X(0))}" y2="{f(Y(y1))}"/>')
    if y0 <= 0 <= y1:
        out.append(f'<line x1="{f(X(x0))}" y1="{f(Y(0))}" x2="{f(X(x1))}" y2="{f(Y(0))}"/>')
    r = max(abs(x0), abs(x1), abs(y0), abs(y1)) * 2
    out.append(f'<line id="ray" x1="{f(X(0))}" y1="{f(Y(0))}" x2="{f(X(r))}" y2="{f(Y(-r))}" '
               'stroke-dasharray="4,3"/>')
    out.append("</g>")
    out.append(f'<rect id="window" x="{f(X(window.re_min))}" y="{f(Y(window.im_max))}" '
               f'width="{f(X(window.re_max) - X(window.re_min))}" height="{f(Y(window.im_min) - Y(window.im_max))}" '
               'fill="none" stroke="black" stroke-width="1"/>')
    out.append(f'<text x="{pad}" y="{H - 10}" font-size="11" font-family="sans-serif">'
               f"Re [{fmt(x0)}, {fmt(x1)}]  Im [{fmt(y0)}, {fmt(y1)}]</text>")
    for t in trajectories:
        color = PALETTE[t.id % len(PALETTE)]
        out.append(f'<g id="trajectory-{t.id}" class="{t.status}" stroke="{color}" fill="{color}" '
                   'clip-path="url(#plot)">')
        pts = " ".join(f"{f(X(z.real))},{f(Y(z.imag))}" for _, z in t.points)
        if len(t.points) > 1:
            out.append(f'<polyline points="{pts}" fill="none" stroke-width="1"/>')
        for _, z in t.points:
            out.append(f'<circle cx="{f(X(z.real))}" cy="{f(Y(z.imag))}" r="2"/>')
        out.append("</g>")
    out.append('<g id="estimates" stroke="black" stroke-width="2">')
    for e in estimates:
        cx, cy = X(e.z.real), Y(e.z.imag)
        out.append(f'<path d="M{f(cx - 6)},{f(cy - 6)} L{f(cx + 6)},{f(cy + 6)} '
                   f'M{f(cx - 6)},{f(cy + 6)} L{f(cx + 6)},{f(cy - 6)}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
