"""Kernel density rasters and temporally faceted comap construction.

Density uses the quartic (biweight) kernel with finite support, so a
fully interior point contributes total mass 1 to the raster.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field, replace

import numpy as np

CYCLE_LENGTH = {"hour_of_day": 24.0, "day_of_week": 7.0, "month": 12.0}


@dataclass
class RasterGrid:
    origin: tuple  # (lon, lat) of the lower-left corner
    cell: float  # degrees per cell
    nx: int
    ny: int
    values: np.ndarray | None = None  # shape (ny, nx), row 0 = south

    def __post_init__(self):
        if self.values is None:
            self.values = np.zeros((self.ny, self.nx))

    def copy_empty(self):
        return RasterGrid(origin=self.origin, cell=self.cell,
                          nx=self.nx, ny=self.ny)

    def x_centers(self):
        return self.origin[0] + (np.arange(self.nx) + 0.5) * self.cell

    def y_centers(self):
        return self.origin[1] + (np.arange(self.ny) + 0.5) * self.cell

    @property
    def cell_area(self):
        return self.cell * self.cell

    def total_mass(self):
        return float(self.values.sum() * self.cell_area)


@dataclass
class TemporalFacet:
    label: str
    dimensions: tuple  # subset of {"hour_of_day", "day_of_week", "month"}
    intervals: tuple  # per dimension: (lo, hi) half-open, may wrap
    member_count: int = 0
    member_index: np.ndarray | None = None


def grid_for_points(points, cell=None, n_cells=200, margin=0.0):
    """Raster template covering the point bounding box plus a margin."""
    pts = np.asarray(points, dtype=float)
    lo = pts.min(axis=0) - margin
    hi = pts.max(axis=0) + margin
    extent = max(hi[0] - lo[0], hi[1] - lo[1], 1e-9)
    if cell is None:
        cell = extent / n_cells
    nx = max(int(np.ceil((hi[0] - lo[0]) / cell)), 1)
    ny = max(int(np.ceil((hi[1] - lo[1]) / cell)), 1)
    return RasterGrid(origin=(float(lo[0]), float(lo[1])), cell=cell,
                      nx=nx, ny=ny)


def _quartic_patch(grid, px, py, bandwidth, xs, ys, window):
    i0, i1, j0, j1 = window
    dx = xs[i0:i1] - px
    dy = ys[j0:j1] - py
    d2 = dy[:, None] ** 2 + dx[None, :] ** 2
    u2 = d2 / (bandwidth * bandwidth)
    # quartic kernel normalised to unit mass: 3/(pi h^2) (1-u^2)^2
    k = np.where(u2 < 1.0, (1.0 - u2) ** 2, 0.0)
    return 3.0 / (np.pi * bandwidth ** 2) * k


def kde(points, bandwidth, grid):
    """Quartic-kernel density raster; values are events per unit area.

    Each point only touches cells within one bandwidth, so an empty
    point list just returns a zero raster.
    """
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    out = grid.copy_empty()
    xs = out.x_centers()
    ys = out.y_centers()
    inv_cell = 1.0 / out.cell
    reach = int(np.ceil(bandwidth * inv_cell)) + 1
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    for px, py in pts:
        ci = int((px - out.origin[0]) * inv_cell)
        cj = int((py - out.origin[1]) * inv_cell)
        i0, i1 = max(ci - reach, 0), min(ci + reach + 1, out.nx)
        j0, j1 = max(cj - reach, 0), min(cj + reach + 1, out.ny)
        if i0 >= i1 or j0 >= j1:
            continue
        out.values[j0:j1, i0:i1] += _quartic_patch(
            out, px, py, bandwidth, xs, ys, (i0, i1, j0, j1))
    return out


def _cyclic_coord(timestamps, dim):
    ts = [dt.datetime.fromtimestamp(t, dt.timezone.utc) for t in timestamps]
    if dim == "hour_of_day":
        return np.array([t.hour + t.minute / 60.0 + t.second / 3600.0
                         for t in ts])
    if dim == "day_of_week":
        return np.array([t.weekday() + (t.hour + t.minute / 60.0) / 24.0
                         for t in ts])
    if dim == "month":
        return np.array([(t.month - 1)
                         + (t.day - 1) / 31.0 for t in ts])
    raise ValueError(f"unknown temporal dimension {dim!r}")


def _in_wrapped(coord, lo, hi, cycle):
    lo, hi = lo % cycle, hi % cycle
    if lo < hi:
        return (coord >= lo) & (coord < hi)
    return (coord >= lo) | (coord < hi)


def _facet_1d(coord, dim, n_bins, overlap_fraction):
    cycle = CYCLE_LENGTH[dim]
    order = np.sort(coord)
    n = len(order)
    # equal-count boundaries on the cycle, anchored at 0
    bounds = [0.0]
    for b in range(1, n_bins):
        q = order[min(int(np.ceil(n * b / n_bins)), n - 1)]
        bounds.append(float(q))
    bounds.append(cycle)
    facets = []
    for b in range(n_bins):
        lo, hi = bounds[b], bounds[b + 1]
        width = hi - lo
        ext_lo = lo - overlap_fraction * width
        ext_hi = hi + overlap_fraction * width
        facets.append((dim, (ext_lo, ext_hi), (lo, hi)))
    return facets


_MONTHS = ["Jan", "Feb", "Mar", "Apr", "May", "Jun",
           "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"]
_DAYS = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"]


def _interval_label(dim, interval):
    lo, hi = interval
    cycle = CYCLE_LENGTH[dim]
    if dim == "month":
        a = _MONTHS[int(lo % cycle)]
        b = _MONTHS[int((hi - 1e-9) % cycle)]
        return f"{a}-{b}"
    if dim == "day_of_week":
        a = _DAYS[int(lo % cycle)]
        b = _DAYS[int((hi - 1e-9) % cycle)]
        return f"{a}-{b}"
    return f"{lo % cycle:04.1f}h-{hi % cycle:04.1f}h"


def build_facets(records, dims, n_bins, overlap_fraction=0.25):
    """Overlapping equal-count temporal facets, cyclic in each dimension.

    For two dims the facets are the cross-product of the per-dimension
    facetings. Each facet carries the member index into `records`.
    """
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    if not 0.0 <= overlap_fraction < 0.5:
        raise ValueError("overlap_fraction must be in [0, 0.5)")
    if isinstance(dims, str):
        dims = (dims,)
    if len(records) < n_bins:
        raise ValueError(f"need at least {n_bins} records")
    timestamps = [r.timestamp for r in records]
    coords = {dim: _cyclic_coord(timestamps, dim) for dim in dims}
    per_dim = [_facet_1d(coords[dim], dim, n_bins, overlap_fraction)
               for dim in dims]
    combos = [[f] for f in per_dim[0]]
    for extra in per_dim[1:]:
        combos = [c + [f] for c in combos for f in extra]
    facets = []
    for combo in combos:
        mask = np.ones(len(records), dtype=bool)
        for dim, ext, _core in combo:
            mask &= _in_wrapped(coords[dim], ext[0], ext[1],
                                CYCLE_LENGTH[dim])
        idx = np.nonzero(mask)[0]
        label = " / ".join(_interval_label(dim, core)
                           for dim, _ext, core in combo)
        facets.append(TemporalFacet(
            label=label, dimensions=tuple(d for d, _, _ in combo),
            intervals=tuple(ext for _, ext, _ in combo),
            member_count=len(idx), member_index=idx))
    return facets


def comap(records, facets, bandwidth, grid):
    """One KDE raster per facet on a shared grid.

    Returns (panels, global_max) where panels is a list of
    (facet, RasterGrid) in facet order and global_max anchors a shared
    colour scale across panels.
    """
    panels = []
    for facet in facets:
        pts = [(records[i].lon, records[i].lat) for i in facet.member_index]
        raster = kde(pts, bandwidth, grid) if pts else grid.copy_empty()
        panels.append((facet, raster))
    global_max = max((float(r.values.max()) for _, r in panels), default=0.0)
    return panels, global_max


def write_esri_ascii(grid, path, nodata=-9999.0):
    """ESRI ASCII raster; rows written north to south per the format."""
    with open(path, "w") as fh:
        fh.write(f"ncols {grid.nx}\n")
        fh.write(f"nrows {grid.ny}\n")
        fh.write(f"xllcorner {grid.origin[0]!r}\n")
        fh.write(f"yllcorner {grid.origin[1]!r}\n")
        fh.write(f"cellsize {grid.cell!r}\n")
        fh.write(f"NODATA_value {nodata!r}\n")
        for j in range(grid.ny - 1, -1, -1):
            fh.write(" ".join(repr(v) for v in grid.values[j]) + "\n")
