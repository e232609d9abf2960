"""Static figure output: bivariate 3x3 choropleths, LISA cluster maps,
comap small multiples, demand line charts, and the dual-demand borough
ranking. All outputs are deterministic byte-for-byte for a given input.
"""

from __future__ import annotations

import base64
import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

# 3x3 purple/teal blend; [cy][cx], corner (0,0)=low/low, (2,2)=high/high
BIVARIATE_PALETTE = (
    ("#e8e8e8", "#ace4e4", "#5ac8c8"),
    ("#dfb0d6", "#a5add3", "#5698b9"),
    ("#be64ac", "#8c62aa", "#3b4994"),
)

LISA_COLORS = {
    "HH": "#d7191c",
    "LL": "#2c7bb6",
    "HL": "#fdae61",
    "LH": "#abd9e9",
    "NS": "#bdbdbd",
    "NA": "#f0f0f0",
}


@dataclass
class BivariateClass:
    cx: int
    cy: int

    @property
    def color(self):
        return BIVARIATE_PALETTE[self.cy][self.cx]


@dataclass
class RankingRow:
    borough: str
    las_total_z: float
    lfb_total_z: float
    dual_high_lsoa_z: float
    score: float


def tertile_breaks(values):
    """Empirical 1/3 and 2/3 quantile breakpoints (inverted-CDF rule)."""
    v = np.asarray(values, dtype=float)
    return (float(np.quantile(v, 1.0 / 3.0, method="inverted_cdf")),
            float(np.quantile(v, 2.0 / 3.0, method="inverted_cdf")))


def _tertile_class(values):
    v = np.asarray(values, dtype=float)
    if v.max() == v.min():
        return np.ones(len(v), dtype=int), True
    b1, b2 = tertile_breaks(v)
    # values equal to a breakpoint go to the lower class
    return np.where(v <= b1, 0, np.where(v <= b2, 1, 2)), False


def bivariate_classify(x, y):
    """Per-area 3x3 class from marginal tertiles of x and y.

    Returns (classes, warnings); a constant variable maps every area to
    the middle class on that axis with a warning.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y):
        raise ValueError("x and y must be aligned")
    if len(x) < 3:
        raise ValueError("need at least 3 areas")
    cx, const_x = _tertile_class(x)
    cy, const_y = _tertile_class(y)
    warns = []
    if const_x:
        warns.append("x is constant; all areas in middle class on x axis")
    if const_y:
        warns.append("y is constant; all areas in middle class on y axis")
    return [BivariateClass(int(a), int(b)) for a, b in zip(cx, cy)], warns


def _zscore_map(values_by_key):
    keys = sorted(values_by_key)
    v = np.array([values_by_key[k] for k in keys], dtype=float)
    sd = v.std()
    z = (v - v.mean()) / sd if sd > 0 else np.zeros(len(v))
    return dict(zip(keys, z))


def rank_boroughs(las_by_area, lfb_by_area, dual_high_flags, borough_of):
    """Borough ranking from z-scored totals, weighted 0.4/0.4/0.2.

    dual_high_flags maps area_id -> bool (top tertile on both services).
    Ties sort alphabetically by borough name.
    """
    las_tot, lfb_tot, dual_cnt = {}, {}, {}
    for aid, b in borough_of.items():
        las_tot[b] = las_tot.get(b, 0.0) + float(las_by_area.get(aid, 0.0))
        lfb_tot[b] = lfb_tot.get(b, 0.0) + float(lfb_by_area.get(aid, 0.0))
        dual_cnt[b] = dual_cnt.get(b, 0.0) + float(
            bool(dual_high_flags.get(aid, False)))
    las_z = _zscore_map(las_tot)
    lfb_z = _zscore_map(lfb_tot)
    dual_z = _zscore_map(dual_cnt)
    rows = []
    for b in sorted(las_tot):
        score = 0.4 * las_z[b] + 0.4 * lfb_z[b] + 0.2 * dual_z[b]
        rows.append(RankingRow(
            borough=b, las_total_z=float(las_z[b]),
            lfb_total_z=float(lfb_z[b]), dual_high_lsoa_z=float(dual_z[b]),
            score=float(score)))
    rows.sort(key=lambda r: (-r.score, r.borough))
    return rows


def dual_high_flags(x, y, area_ids):
    """Area is dual-high when in the top tertile of both services."""
    cx, _ = _tertile_class(x)
    cy, _ = _tertile_class(y)
    return {aid: bool(a == 2 and b == 2)
            for aid, a, b in zip(area_ids, cx, cy)}


def ranking_csv(rows):
    lines = ["rank,borough,score,las_z,lfb_z,dual_z"]
    for rank, r in enumerate(rows, start=1):
        lines.append(f"{rank},{r.borough},{r.score:.6f},{r.las_total_z:.6f},"
                     f"{r.lfb_total_z:.6f},{r.dual_high_lsoa_z:.6f}")
    return "\n".join(lines) + "\n"


def _fmt(v):
    return f"{v:.2f}"


def _project(areas, width, height, pad=10.0):
    xs = [p[0] for a in areas for ring in a.polygon for p in ring]
    ys = [p[1] for a in areas for ring in a.polygon for p in ring]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    sx = (width - 2 * pad) / max(x1 - x0, 1e-12)
    sy = (height - 2 * pad) / max(y1 - y0, 1e-12)
    s = min(sx, sy)

    def to_px(p):
        return (pad + (p[0] - x0) * s, height - pad - (p[1] - y0) * s)

    return to_px


def _area_path(area, to_px):
    parts = []
    for ring in area.polygon:
        pts = [to_px(p) for p in ring]
        d = "M " + " L ".join(f"{_fmt(x)} {_fmt(y)}" for x, y in pts) + " Z"
        parts.append(d)
    return " ".join(parts)


def render_map(areas, classes, kind="bivariate", width=640, height=640,
               title=""):
    """SVG choropleth. `classes` maps area_id to a BivariateClass
    (kind='bivariate') or a cluster label (kind='lisa').

    Areas without a classification render hatched grey and are listed in
    the returned warnings. Returns (svg_text, warnings).
    """
    to_px = _project(areas, width, height)
    body = []
    warns = []
    body.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">')
    body.append('<defs><pattern id="miss" width="6" height="6" '
                'patternUnits="userSpaceOnUse">'
                '<rect width="6" height="6" fill="#eeeeee"/>'
                '<path d="M 0 6 L 6 0" stroke="#999999" stroke-width="1"/>'
                "</pattern></defs>")
    if title:
        body.append(f'<text x="{width / 2:.0f}" y="16" text-anchor="middle" '
                    f'font-family="sans-serif" font-size="13">{title}</text>')
    for area in areas:
        cls = classes.get(area.area_id)
        if cls is None:
            fill = "url(#miss)"
            warns.append(f"area {area.area_id} missing classification")
        elif kind == "bivariate":
            fill = cls.color
        else:
            fill = LISA_COLORS.get(cls, "url(#miss)")
        body.append(f'<path d="{_area_path(area, to_px)}" fill="{fill}" '
                    f'stroke="#ffffff" stroke-width="0.5"/>')
    if kind == "bivariate":
        body.append(_bivariate_legend(width - 90, height - 90))
    else:
        body.append(_lisa_legend(width - 90, height - 110))
    body.append("</svg>")
    return "\n".join(body) + "\n", warns


def _bivariate_legend(x0, y0, cell=22):
    out = [f'<g transform="translate({x0} {y0})">']
    for cy in range(3):
        for cx in range(3):
            out.append(
                f'<rect x="{cx * cell}" y="{(2 - cy) * cell}" '
                f'width="{cell}" height="{cell}" '
                f'fill="{BIVARIATE_PALETTE[cy][cx]}"/>')
    out.append(f'<text x="0" y="{3 * cell + 12}" font-family="sans-serif" '
               'font-size="9">x &#8594;</text>')
    out.append(f'<text x="-6" y="{3 * cell}" font-family="sans-serif" '
               'font-size="9" transform="rotate(-90 -6 66)">y &#8594;</text>')
    out.append("</g>")
    return "".join(out)


def _lisa_legend(x0, y0):
    out = [f'<g transform="translate({x0} {y0})">']
    for i, key in enumerate(("HH", "LL", "HL", "LH", "NS")):
        out.append(f'<rect x="0" y="{i * 16}" width="12" height="12" '
                   f'fill="{LISA_COLORS[key]}"/>')
        out.append(f'<text x="16" y="{i * 16 + 10}" '
                   f'font-family="sans-serif" font-size="10">{key}</text>')
    out.append("</g>")
    return "".join(out)


# simple blue->yellow->red ramp for density panels
_RAMP = np.array([
    (13, 8, 135), (84, 2, 163), (156, 23, 158),
    (215, 48, 31), (253, 141, 60), (254, 217, 118), (255, 255, 204),
], dtype=float)[::-1]


def _colorize(values, vmax):
    v = np.clip(values / vmax if vmax > 0 else values * 0.0, 0.0, 1.0)
    pos = v * (len(_RAMP) - 1)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, len(_RAMP) - 1)
    frac = (pos - lo)[..., None]
    rgb = _RAMP[lo] * (1 - frac) + _RAMP[hi] * frac
    return rgb.astype(np.uint8)


def _raster_png_b64(grid, vmax):
    rgb = _colorize(grid.values[::-1], vmax)  # row 0 becomes north
    img = Image.fromarray(rgb, mode="RGB")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def render_comap(panels, global_max=None, tile=220, cols=None):
    """Small-multiples SVG sheet of (facet, raster) panels in temporal
    order, sharing one colour scale anchored at the global maximum."""
    n = len(panels)
    if global_max is None:
        global_max = max((float(r.values.max()) for _, r in panels),
                        default=0.0)
    if cols is None:
        cols = int(np.ceil(np.sqrt(n)))
    rows = int(np.ceil(n / cols))
    width = cols * tile + 70
    height = rows * (tile + 24)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
           f'height="{height}" viewBox="0 0 {width} {height}">']
    for i, (facet, raster) in enumerate(panels):
        cx = (i % cols) * tile
        cy = (i // cols) * (tile + 24)
        out.append(f'<text x="{cx + 4}" y="{cy + 14}" '
                   f'font-family="sans-serif" font-size="11">'
                   f'{facet.label} (n={facet.member_count})</text>')
        if raster.values.max() > 0:
            png = _raster_png_b64(raster, global_max)
            out.append(
                f'<image x="{cx}" y="{cy + 18}" width="{tile - 8}" '
                f'height="{tile - 8}" preserveAspectRatio="none" '
                f'href="data:image/png;base64,{png}"/>')
        else:
            out.append(f'<rect x="{cx}" y="{cy + 18}" width="{tile - 8}" '
                       f'height="{tile - 8}" fill="#ffffff" '
                       f'stroke="#cccccc"/>')
    # shared colour bar
    bar_x = cols * tile + 12
    steps = 40
    for s in range(steps):
        frac = 1.0 - s / (steps - 1)
        color = _colorize(np.array([[frac]]), 1.0)[0, 0]
        out.append(f'<rect x="{bar_x}" y="{20 + s * 4}" width="14" '
                   f'height="4" fill="rgb({color[0]},{color[1]},'
                   f'{color[2]})"/>')
    out.append(f'<text x="{bar_x}" y="14" font-family="sans-serif" '
               f'font-size="9">{global_max:.3g}</text>')
    out.append(f'<text x="{bar_x}" y="{20 + steps * 4 + 12}" '
               f'font-family="sans-serif" font-size="9">0</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_series_chart(series_map, width=720, height=280, title=""):
    """Line chart of one or more named series (dict name -> TimeSeries)."""
    colors = ("#1b9e77", "#d95f02", "#7570b3", "#e7298a")
    all_vals = np.concatenate([np.asarray(s.values, dtype=float)
                               for s in series_map.values()])
    vmax = max(float(all_vals.max()), 1e-9)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
           f'height="{height}" viewBox="0 0 {width} {height}">']
    if title:
        out.append(f'<text x="{width / 2:.0f}" y="14" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="12">{title}</text>')
    pad = 30
    for ci, (name, series) in enumerate(sorted(series_map.items())):
        vals = np.asarray(series.values, dtype=float)
        n = len(vals)
        if n < 2:
            continue
        pts = []
        for i, v in enumerate(vals):
            x = pad + i * (width - 2 * pad) / (n - 1)
            y = height - pad - (v / vmax) * (height - 2 * pad)
            pts.append(f"{_fmt(x)},{_fmt(y)}")
        color = colors[ci % len(colors)]
        out.append(f'<polyline points="{" ".join(pts)}" fill="none" '
                   f'stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{pad}" y="{24 + 12 * ci}" fill="{color}" '
                   f'font-family="sans-serif" font-size="10">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
