"""Standalone SVG rendering: centile fans, grouped boxplots, trend
bands, and maximum intensity projections. Output bytes are a pure
function of the input data."""

from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, FormatError
from .volume_io import VoxelMask, canonicalize_las

_W, _H = 640, 420
_MARGIN = dict(left=64, right=16, top=36, bottom=44)

_GROUP_COLORS = {0: "#2b6cb0", 1: "#c53030"}  # control blue, t2d red
_BAND_OPACITY = "0.25"


def _fmt(v):
    return f"{v:.3f}".rstrip("0").rstrip(".")


class _Svg:
    def __init__(self, width, height):
        self.width, self.height = width, height
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">',
            f'<rect width="{width}" height="{height}" fill="white"/>',
        ]

    def line(self, x1, y1, x2, y2, stroke="#444", width=1):
        self.parts.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" '
            f'y2="{_fmt(y2)}" stroke="{stroke}" stroke-width="{width}"/>'
        )

    def polyline(self, pts, stroke, width=1.5):
        path = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)
        self.parts.append(
            f'<polyline points="{path}" fill="none" stroke="{stroke}" '
            f'stroke-width="{width}"/>'
        )

    def polygon(self, pts, fill, opacity="1"):
        path = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)
        self.parts.append(
            f'<polygon points="{path}" fill="{fill}" fill-opacity="{opacity}" '
            f'stroke="none"/>'
        )

    def rect(self, x, y, w, h, fill, stroke="none"):
        self.parts.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" '
            f'height="{_fmt(h)}" fill="{fill}" stroke="{stroke}"/>'
        )

    def text(self, x, y, s, size=12, anchor="start", fill="#222"):
        self.parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="{size}" '
            f'font-family="sans-serif" text-anchor="{anchor}" '
            f'fill="{fill}">{s}</text>'
        )

    def save(self, path):
        self.parts.append("</svg>")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.parts))
            fh.write("\n")


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min(s * mag for s in (1, 2, 5, 10) if s * mag >= raw)
    start = np.ceil(lo / step) * step
    return np.arange(start, hi + step * 1e-9, step)


class _Axes:
    """Maps data coordinates into one panel's pixel box."""

    def __init__(self, svg, ox, oy, w, h, xlim, ylim, title=""):
        self.svg, self.ox, self.oy, self.w, self.h = svg, ox, oy, w, h
        self.xlo, self.xhi = xlim
        self.ylo, self.yhi = ylim
        if self.xhi <= self.xlo:
            self.xhi = self.xlo + 1.0
        if self.yhi <= self.ylo:
            self.yhi = self.ylo + 1.0
        svg.line(ox, oy + h, ox + w, oy + h)
        svg.line(ox, oy, ox, oy + h)
        if title:
            svg.text(ox + w / 2, oy - 8, title, size=13, anchor="middle")
        for t in _ticks(self.xlo, self.xhi):
            px = self.x(t)
            svg.line(px, oy + h, px, oy + h + 4)
            svg.text(px, oy + h + 16, _fmt(t), size=10, anchor="middle")
        for t in _ticks(self.ylo, self.yhi):
            py = self.y(t)
            svg.line(self.ox - 4, py, self.ox, py)
            svg.text(self.ox - 6, py + 3, _fmt(t), size=10, anchor="end")

    def x(self, v):
        return self.ox + (v - self.xlo) / (self.xhi - self.xlo) * self.w

    def y(self, v):
        return self.oy + self.h - (v - self.ylo) / (self.yhi - self.ylo) * self.h


def _empty_figure(out, label="no data"):
    svg = _Svg(_W, _H)
    _Axes(
        svg,
        _MARGIN["left"],
        _MARGIN["top"],
        _W - _MARGIN["left"] - _MARGIN["right"],
        _H - _MARGIN["top"] - _MARGIN["bottom"],
        (0.0, 1.0),
        (0.0, 1.0),
    )
    svg.text(_W / 2, _H / 2, label, size=16, anchor="middle", fill="#888")
    svg.save(out)


def render_centiles(rows, out):
    """Centile fan: one panel per (sex, group), median line with the
    lowest-to-highest centile band shaded.

    ``rows`` are dicts with keys feature, sex, diabetes, age and one
    ``p<level>`` column per centile level.
    """
    if not rows:
        _empty_figure(out)
        return
    levels = sorted(
        int(k[1:]) for k in rows[0] if k.startswith("p") and k[1:].isdigit()
    )
    if not levels:
        raise FormatError("centiles input has no p<level> columns")
    panels = {}
    for r in rows:
        vals = [float(r[f"p{lv}"]) for lv in levels]
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise DegenerateInputError(
                f"non-monotone centile row at age {r.get('age')}"
            )
        key = (int(r["sex"]), int(r["diabetes"]))
        panels.setdefault(key, []).append((float(r["age"]), vals))

    keys = sorted(panels)
    ncol = 2 if len(keys) > 1 else 1
    nrow = (len(keys) + ncol - 1) // ncol
    svg = _Svg(_W * ncol, _H * nrow)
    all_ages = [a for series in panels.values() for a, _ in series]
    all_vals = [v for series in panels.values() for _, vs in series for v in vs]
    xlim = (min(all_ages), max(all_ages))
    ylim = (min(all_vals), max(all_vals))
    feature = rows[0].get("feature", "")

    for idx, key in enumerate(keys):
        sex, diab = key
        series = sorted(panels[key])
        ox = _MARGIN["left"] + (idx % ncol) * _W
        oy = _MARGIN["top"] + (idx // ncol) * _H
        title = (
            f"{feature} | sex={'M' if sex else 'F'} "
            f"{'t2d' if diab else 'control'}"
        )
        ax = _Axes(
            svg,
            ox,
            oy,
            _W - _MARGIN["left"] - _MARGIN["right"],
            _H - _MARGIN["top"] - _MARGIN["bottom"],
            xlim,
            ylim,
            title=title,
        )
        color = _GROUP_COLORS.get(diab, "#444")
        lo_pts = [(ax.x(a), ax.y(v[0])) for a, v in series]
        hi_pts = [(ax.x(a), ax.y(v[-1])) for a, v in series]
        svg.polygon(lo_pts + hi_pts[::-1], fill=color, opacity=_BAND_OPACITY)
        mid = levels.index(50) if 50 in levels else len(levels) // 2
        svg.polyline([(ax.x(a), ax.y(v[mid])) for a, v in series], stroke=color)
        svg.text(ox, oy + _H - _MARGIN["top"] - 4, "age (years)", size=10)
    svg.save(out)


def render_boxstats(rows, out):
    """Grouped boxplots per age bin, one box color per sex."""
    if not rows:
        _empty_figure(out)
        return
    bins = []
    for r in rows:
        if r["age_bin"] not in bins:
            bins.append(r["age_bin"])
    bins.sort(key=lambda b: float(str(b).split("-")[0]))
    sexes = sorted({r["sex"] for r in rows})
    vals = []
    for r in rows:
        vals += [float(r["whisker_low"]), float(r["whisker_high"])]
    svg = _Svg(_W, _H)
    ax = _Axes(
        svg,
        _MARGIN["left"],
        _MARGIN["top"],
        _W - _MARGIN["left"] - _MARGIN["right"],
        _H - _MARGIN["top"] - _MARGIN["bottom"],
        (0.0, float(len(bins))),
        (min(vals), max(vals)),
    )
    colors = {s: c for s, c in zip(sexes, ("#2b6cb0", "#c53030", "#2f855a"))}
    slot = 1.0 / (len(sexes) + 1)
    for r in rows:
        i = bins.index(r["age_bin"])
        j = sexes.index(r["sex"])
        cx = ax.x(i + slot * (j + 1))
        half = ax.w / len(bins) * slot * 0.35
        q1, q3 = ax.y(float(r["q1"])), ax.y(float(r["q3"]))
        med = ax.y(float(r["median"]))
        wlo, whi = ax.y(float(r["whisker_low"])), ax.y(float(r["whisker_high"]))
        color = colors[r["sex"]]
        svg.line(cx, wlo, cx, q1, stroke=color)
        svg.line(cx, q3, cx, whi, stroke=color)
        svg.rect(cx - half, q3, 2 * half, q1 - q3, fill="white", stroke=color)
        svg.line(cx - half, med, cx + half, med, stroke=color, width=2)
    for i, b in enumerate(bins):
        svg.text(ax.x(i + 0.5), ax.oy + ax.h + 30, str(b), size=10, anchor="middle")
    for j, s in enumerate(sexes):
        svg.text(_W - 90, _MARGIN["top"] + 14 * j, str(s), size=11, fill=colors[s])
    svg.save(out)


def render_trend(rows, out):
    """Trend line with shaded 95% CI band; columns age, fit, lo, hi."""
    if not rows:
        _empty_figure(out)
        return
    pts = sorted(
        (float(r["age"]), float(r["fit"]), float(r["lo"]), float(r["hi"]))
        for r in rows
    )
    ages = [p[0] for p in pts]
    ys = [v for p in pts for v in p[1:]]
    svg = _Svg(_W, _H)
    ax = _Axes(
        svg,
        _MARGIN["left"],
        _MARGIN["top"],
        _W - _MARGIN["left"] - _MARGIN["right"],
        _H - _MARGIN["top"] - _MARGIN["bottom"],
        (min(ages), max(ages)),
        (min(ys), max(ys)),
    )
    lo_pts = [(ax.x(a), ax.y(lo)) for a, _, lo, _ in pts]
    hi_pts = [(ax.x(a), ax.y(hi)) for a, _, _, hi in pts]
    svg.polygon(lo_pts + hi_pts[::-1], fill="#2b6cb0", opacity=_BAND_OPACITY)
    svg.polyline([(ax.x(a), ax.y(f)) for a, f, _, _ in pts], stroke="#2b6cb0")
    svg.save(out)


_MIP_AXIS = {"axial": 2, "coronal": 1, "sagittal": 0}


def render_mip(mask: VoxelMask, axis: str, out, pixel_px: float = 4.0):
    """Maximum intensity projection as an SVG raster with a 1 dm scale
    bar (ticks every 10 mm)."""
    if axis not in _MIP_AXIS:
        raise DegenerateInputError(f"axis must be one of {sorted(_MIP_AXIS)}")
    mask = canonicalize_las(mask)
    proj_axis = _MIP_AXIS[axis]
    img = mask.data.max(axis=proj_axis)
    keep = [a for a in range(3) if a != proj_axis]
    sp = mask.spacing
    sx, sy = sp[keep[0]], sp[keep[1]]

    h_px = pixel_px
    scale_x = h_px  # px per voxel along image rows
    scale_y = h_px * (sy / sx)
    width = img.shape[0] * scale_x
    height = img.shape[1] * scale_y
    pad = 20
    bar_h = 46
    svg = _Svg(width + 2 * pad, height + 2 * pad + bar_h)
    if not img.any():
        svg.text(
            (width + 2 * pad) / 2, (height + 2 * pad) / 2, "empty mask",
            size=14, anchor="middle", fill="#888",
        )
    # Merge foreground runs per image row into rects.
    for j in range(img.shape[1]):
        col = img[:, j]
        i = 0
        while i < len(col):
            if col[i]:
                k = i
                while k + 1 < len(col) and col[k + 1]:
                    k += 1
                svg.rect(
                    pad + i * scale_x,
                    pad + j * scale_y,
                    (k - i + 1) * scale_x,
                    scale_y,
                    fill="#333",
                )
                i = k + 1
            else:
                i += 1
    # Scale bar: 1 dm = 100 mm, ticks every 10 mm.
    px_per_mm = scale_x / sx
    bar_len = 100.0 * px_per_mm
    y0 = height + 2 * pad + 18
    svg.line(pad, y0, pad + bar_len, y0, stroke="#000", width=2)
    for mm in range(0, 101, 10):
        x = pad + mm * px_per_mm
        svg.line(x, y0 - 4, x, y0 + 4, stroke="#000")
    svg.text(pad + bar_len / 2, y0 + 18, "1 dm (ticks: 10 mm)", size=11,
             anchor="middle")
    svg.save(out)
