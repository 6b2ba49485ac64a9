"""Static SVG panels: position-plane trajectories and three time-series panels."""

from __future__ import annotations

import math
from html import escape
from pathlib import Path

import numpy as np

from .export import SeriesBundle

WIDTH, HEIGHT = 960, 720
PANEL_W, PANEL_H = 400, 270
MARGIN_L, MARGIN_T = 70, 40
STYLE = """
.axis{stroke:#333;stroke-width:1;fill:none}
.tick{stroke:#333;stroke-width:0.8}
.grid{stroke:#ddd;stroke-width:0.5}
text{font-family:sans-serif;font-size:11px;fill:#222}
.title{font-size:13px;font-weight:bold}
.classical{stroke:#1f77b4;stroke-width:0.9;fill:none;stroke-opacity:0.7}
.bohmian{stroke:#d62728;stroke-width:0.9;fill:none;stroke-opacity:0.7}
.centre{stroke:#000;stroke-width:1.6;fill:none;stroke-dasharray:5,3}
.s-u{stroke:#2ca02c;stroke-width:1.2;fill:none}
.s-delta{stroke:#9467bd;stroke-width:1.2;fill:none}
.s-det{stroke:#8c564b;stroke-width:1.2;fill:none}
.s-qb{stroke:#ff7f0e;stroke-width:1.2;fill:none}
"""


def _n(x):
    s = f"{x:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def nice_ticks(lo, hi, count=5):
    span = hi - lo
    raw = span / max(count - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks


def _range(values):
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return 0.0, 1.0
    lo, hi = float(v.min()), float(v.max())
    if hi - lo <= 1e-12 * max(1.0, abs(lo), abs(hi)):
        pad = 0.5 * abs(lo) if lo != 0 else 0.5
        return lo - pad, hi + pad
    pad = 0.04 * (hi - lo)
    return lo - pad, hi + pad


class _Panel:
    def __init__(self, x0, y0, xr, yr, title, xlabel, ylabel):
        self.x0, self.y0 = x0, y0
        self.xr, self.yr = xr, yr
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel

    def sx(self, x):
        lo, hi = self.xr
        return self.x0 + (x - lo) / (hi - lo) * PANEL_W

    def sy(self, y):
        lo, hi = self.yr
        return self.y0 + PANEL_H - (y - lo) / (hi - lo) * PANEL_H

    def frame(self):
        out = [f'<g class="panel"><text class="title" x="{_n(self.x0)}" y="{_n(self.y0 - 10)}">{escape(self.title)}</text>',
               f'<rect class="axis" x="{_n(self.x0)}" y="{_n(self.y0)}" width="{PANEL_W}" height="{PANEL_H}"/>']
        for v in nice_ticks(*self.xr):
            x = self.sx(v)
            yb = self.y0 + PANEL_H
            out.append(f'<line class="tick" x1="{_n(x)}" y1="{_n(yb)}" x2="{_n(x)}" y2="{_n(yb + 4)}"/>')
            out.append(f'<text x="{_n(x)}" y="{_n(yb + 16)}" text-anchor="middle">{v:.4g}</text>')
        for v in nice_ticks(*self.yr):
            y = self.sy(v)
            out.append(f'<line class="tick" x1="{_n(self.x0 - 4)}" y1="{_n(y)}" x2="{_n(self.x0)}" y2="{_n(y)}"/>')
            out.append(f'<text x="{_n(self.x0 - 6)}" y="{_n(y + 4)}" text-anchor="end">{v:.4g}</text>')
        out.append(f'<text x="{_n(self.x0 + PANEL_W / 2)}" y="{_n(self.y0 + PANEL_H + 32)}" '
                   f'text-anchor="middle">{escape(self.xlabel)}</text>')
        out.append(f'<text x="{_n(self.x0 - 50)}" y="{_n(self.y0 + PANEL_H / 2)}" text-anchor="middle" '
                   f'transform="rotate(-90 {_n(self.x0 - 50)} {_n(self.y0 + PANEL_H / 2)})">{escape(self.ylabel)}</text>')
        out.append("</g>")
        return out

    def points(self, x, y):
        ok = np.isfinite(x) & np.isfinite(y)
        return " ".join(f"{_n(self.sx(a))},{_n(self.sy(b))}" for a, b in zip(x[ok], y[ok]))

    def path(self, x, y, cls):
        segs, pen = [], "M"
        for a, b in zip(x, y):
            if not (math.isfinite(a) and math.isfinite(b)):
                pen = "M"
                continue
            segs.append(f"{pen}{_n(self.sx(a))},{_n(self.sy(b))}")
            pen = "L"
        if not segs:
            return f'<text x="{_n(self.x0 + 10)}" y="{_n(self.y0 + 20)}">no data</text>'
        return f'<path class="{cls}" d="{" ".join(segs)}"/>'


def _bbox_attr(xy):
    ok = np.all(np.isfinite(xy), axis=1)
    if not ok.any():
        return ""
    lo, hi = xy[ok].min(axis=0), xy[ok].max(axis=0)
    return " ".join(f"{v:.9g}" for v in (lo[0], lo[1], hi[0], hi[1]))


def _mean_norm(tracks, cx, cy):
    rows = [np.hypot(tr.values[cx], tr.values[cy]) for tr in tracks if cx in tr.values]
    if not rows:
        return None
    n = min(len(r) for r in rows)
    return np.mean(np.stack([r[:n] for r in rows]), axis=0)


def _mean_col(tracks, name):
    rows = [tr.values[name] for tr in tracks if name in tr.values]
    if not rows:
        return None
    n = min(len(r) for r in rows)
    stack = np.stack([r[:n] for r in rows])
    out = np.full(n, np.nan)
    ok = np.isfinite(stack).any(axis=0)
    out[ok] = np.nanmean(stack[:, ok], axis=0)
    return out


def render_svg(bundle: SeriesBundle, title=""):
    """SVG text for ``bundle``; identical input gives identical bytes."""
    tracks = bundle.ordered()
    if not tracks or all(len(tr) == 0 for tr in tracks):
        raise ValueError("cannot plot an empty series bundle")
    spatial = [tr for tr in tracks if "qx" in tr.values and "qy" in tr.values]
    allxy = np.vstack([tr.xy() for tr in spatial]) if spatial else np.zeros((1, 2))
    boh = [tr for tr in tracks if tr.kind == "bohmian"]
    centre = [tr for tr in tracks if tr.kind == "centre"]
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f"<title>{escape(title)}</title>",
        "<metadata>projection: (x, y) position plane; panels: trajectories, mean |u| and |Delta|, "
        "det Lambda, mean Q_B</metadata>",
        f"<style>{STYLE}</style>",
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#fff"/>',
    ]
    col2 = MARGIN_L + PANEL_W + 90
    row2 = MARGIN_T + PANEL_H + 70

    pa = _Panel(MARGIN_L, MARGIN_T, _range(allxy[:, 0]), _range(allxy[:, 1]), "(a) trajectories", "x", "y")
    out += pa.frame()
    for tr in spatial:
        xy = tr.xy()
        out.append(f'<polyline class="{tr.kind}" data-member="{tr.member_id}" data-bbox="{_bbox_attr(xy)}" '
                   f'points="{pa.points(xy[:, 0], xy[:, 1])}"/>')
    for k, (cls, label) in enumerate((("classical", "classical"), ("bohmian", "Bohmian"), ("centre", "centre"))):
        y = MARGIN_T + 14 + 14 * k
        x = MARGIN_L + PANEL_W - 90
        out.append(f'<line class="{cls}" x1="{x}" y1="{y}" x2="{x + 20}" y2="{y}"/>')
        out.append(f'<text x="{x + 25}" y="{y + 4}">{label}</text>')

    t_ref = (boh or centre or tracks)[0].t
    mu, md = _mean_norm(boh, "ux", "uy"), _mean_norm(boh, "dx", "dy")
    series = [s for s in (mu, md) if s is not None]
    n = min([len(t_ref)] + [len(s) for s in series])
    t = t_ref[:n]
    pb = _Panel(col2, MARGIN_T, _range(t), _range(np.concatenate([s[:n] for s in series]) if series else []),
                "(b) mean |u| and |Delta|", "t", "norm")
    out += pb.frame()
    for s, cls in ((mu, "s-u"), (md, "s-delta")):
        if s is not None:
            out.append(pb.path(t, s[:n], cls))
    for k, (cls, label) in enumerate((("s-u", "|u|"), ("s-delta", "|Delta|"))):
        y = MARGIN_T + 14 + 14 * k
        out.append(f'<line class="{cls}" x1="{col2 + 10}" y1="{y}" x2="{col2 + 30}" y2="{y}"/>')
        out.append(f'<text x="{col2 + 35}" y="{y + 4}">{label}</text>')

    src = centre[0] if centre and "det_lambda" in centre[0].values else next(
        (tr for tr in tracks if "det_lambda" in tr.values), None)
    det = src.values["det_lambda"] if src is not None else np.array([])
    td = src.t if src is not None else np.array([0.0])
    pc = _Panel(MARGIN_L, row2, _range(td), _range(det), "(c) det Lambda", "t", "det Lambda")
    out += pc.frame()
    out.append(pc.path(td, det, "s-det"))

    qb = _mean_col(boh, "q_b")
    qb = qb if qb is not None else np.array([])
    tq = t_ref[: len(qb)]
    pd_ = _Panel(col2, row2, _range(tq if len(tq) else [0.0]), _range(qb), "(d) mean Q_B", "t", "Q_B")
    out += pd_.frame()
    out.append(pd_.path(tq, qb, "s-qb"))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(bundle, path, title=""):
    path = Path(path)
    try:
        path.write_text(render_svg(bundle, title), encoding="utf-8")
    except OSError as err:
        raise OSError(f"{path}: {err.strerror or err}") from err
    return path
