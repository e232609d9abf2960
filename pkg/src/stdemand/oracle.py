"""Brute-force reference implementations and synthetic data generators.

Everything here is deliberately simple and slow; these routines supply
independent ground truth for tests and bundled demo datasets for the
pipeline. Determinism per seed is the contract.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import zlib
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .ingest import AreaUnit, IncidentRecord

EPOCH_2021 = dt.datetime(2021, 1, 4, tzinfo=dt.timezone.utc)  # a Monday


def rng_for(seed, label):
    """Deterministic substream RNG derived from a base seed and a label."""
    return np.random.default_rng(
        np.random.SeedSequence([int(seed), zlib.crc32(label.encode())]))


def naive_moran(x, y, w):
    """Direct double-loop global bivariate Moran's I."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.var() == 0 or y.var() == 0:
        raise ValueError("zero variance")
    n = w.n
    xd = x - x.mean()
    yd = y - y.mean()
    num = 0.0
    s0 = 0.0
    for i, row in enumerate(w.neighbours):
        for j, wt in row:
            num += wt * xd[i] * yd[j]
            s0 += wt
    denom = np.sqrt((xd ** 2).sum() * (yd ** 2).sum())
    return (n / s0) * num / denom


def winding_number(point, ring):
    """Nonzero winding number test for one closed ring."""
    x, y = point
    wn = 0
    for (x0, y0), (x1, y1) in zip(ring[:-1], ring[1:]):
        if y0 <= y:
            if y1 > y and (x1 - x0) * (y - y0) - (x - x0) * (y1 - y0) > 0:
                wn += 1
        elif y1 <= y and (x1 - x0) * (y - y0) - (x - x0) * (y1 - y0) < 0:
            wn -= 1
    return wn


def winding_assign(point, areas):
    """Containing area via winding number; smallest area_id on ties."""
    hits = []
    for area in areas:
        if any(winding_number(point, ring) != 0 for ring in area.polygon):
            hits.append(area.area_id)
    return min(hits) if hits else None


def naive_kde(points, bandwidth, grid):
    """Full-grid quartic KDE; O(points x cells)."""
    out = grid.copy_empty()
    xs = out.x_centers()
    ys = out.y_centers()
    norm = 3.0 / (np.pi * bandwidth ** 2)
    for px, py in np.asarray(points, dtype=float).reshape(-1, 2):
        dx = xs - px
        dy = ys - py
        u2 = (dy[:, None] ** 2 + dx[None, :] ** 2) / (bandwidth * bandwidth)
        out.values += norm * np.where(u2 < 1.0, (1.0 - u2) ** 2, 0.0)
    return out


def _poly_roots_stable(coeffs):
    if not coeffs:
        return True
    roots = np.roots([1.0] + [-c for c in coeffs])
    return len(roots) == 0 or np.abs(roots).max() < 1.0


def simulate_sarima(spec, ar=(), ma=(), sar=(), sma=(), beta=(),
                    exog=None, n=200, sigma=1.0, seed=0):
    """Exact recursive SARIMA simulation with Gaussian innovations.

    Seasonal and non-seasonal polynomials are combined by convolution;
    burn-in is 10x the maximum lag. Exogenous effects (beta) are added
    after the error process, matching regression-with-SARIMA-errors.
    """
    s = spec.s

    def _expand(nonseas, seas, period, sign):
        a = np.r_[1.0, sign * np.asarray(nonseas, dtype=float)]
        b = np.ones(1)
        if len(seas):
            b = np.zeros(len(seas) * period + 1)
            b[0] = 1.0
            for i, c in enumerate(seas, start=1):
                b[i * period] = sign * c
        return np.convolve(a, b)

    # (1 - phi B)(1 - PHI B^s) u = (1 + theta B)(1 + THETA B^s) eps
    ar_poly = _expand(ar, sar, s, -1.0)
    ma_poly = _expand(ma, sma, s, +1.0)
    ar_full = -ar_poly[1:]  # u_t = sum_l ar_full[l-1] u_{t-l} + ...
    ma_full = ma_poly[1:]
    if not _poly_roots_stable(list(ar_full)):
        raise ValueError("unstable AR polynomial")
    max_lag = max(len(ar_full), len(ma_full), 1)
    burn = 10 * max_lag
    rng = rng_for(seed, "simulate_sarima")
    eps = rng.normal(0.0, sigma, size=n + burn)
    u = np.zeros(n + burn)
    for t in range(n + burn):
        acc = eps[t]
        for l, c in enumerate(ar_full, start=1):
            if t - l >= 0:
                acc += c * u[t - l]
        for l, c in enumerate(ma_full, start=1):
            if t - l >= 0:
                acc += c * eps[t - l]
        u[t] = acc
    u = u[burn:]
    for _ in range(spec.D):
        u = np.cumsum(u)
    for _ in range(spec.d):
        u = np.cumsum(u)
    y = u.copy()
    if exog is not None and len(beta):
        exog = np.atleast_2d(np.asarray(exog, dtype=float))
        if exog.shape[0] != n:
            exog = exog.T
        y = y + exog @ np.asarray(beta, dtype=float)
    return y


@dataclass
class Hotspot:
    lon: float
    lat: float
    radius: float
    weight: float


@dataclass
class SyntheticScenario:
    seed: int = 0
    lattice: tuple = (6, 6)  # nx, ny areas on the unit square
    base_rate: float = 400.0  # expected events per bucket over the domain
    seasonal_amplitude: float = 0.4
    seasonal_period: float = 52.0  # buckets per cycle
    weather_beta: tuple = (0.0, 0.0, 0.0)  # temp, dew point, wind coupling
    hotspots: tuple = ()
    horizon: int = 104  # weekly buckets
    category_mix: dict = field(default_factory=lambda: {
        "ambulance": 0.5, "fire": 0.2, "special_service": 0.15,
        "false_alarm": 0.15})
    summer_spread: float = 0.0  # extra spatial std in Jun-Sep

    def to_json(self):
        d = asdict(self)
        d["hotspots"] = [asdict(h) if isinstance(h, Hotspot) else h
                         for h in self.hotspots]
        return d

    @classmethod
    def from_json(cls, d):
        d = dict(d)
        d["lattice"] = tuple(d.get("lattice", (6, 6)))
        d["weather_beta"] = tuple(d.get("weather_beta", (0, 0, 0)))
        d["hotspots"] = tuple(Hotspot(**h) for h in d.get("hotspots", ()))
        return cls(**d)


def lattice_areas(nx, ny, n_boroughs=4):
    """Unit-square lattice of square areas, striped into boroughs."""
    areas = []
    for j in range(ny):
        for i in range(nx):
            x0, y0 = i / nx, j / ny
            x1, y1 = (i + 1) / nx, (j + 1) / ny
            ring = [(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)]
            borough = f"B{(i * n_boroughs) // nx:02d}"
            areas.append(AreaUnit(
                area_id=f"A{j * nx + i:03d}", name=f"cell-{i}-{j}",
                borough=borough, polygon=[ring],
                centroid=((x0 + x1) / 2, (y0 + y1) / 2)))
    return areas


def _spatial_intensity(scenario):
    hotspots = [h if isinstance(h, Hotspot) else Hotspot(**h)
                for h in scenario.hotspots]

    def intensity(x, y):
        val = np.ones_like(x)
        for h in hotspots:
            val = val + h.weight * np.exp(
                -((x - h.lon) ** 2 + (y - h.lat) ** 2)
                / (2.0 * h.radius ** 2))
        return val

    peak = 1.0 + sum(h.weight for h in hotspots)
    return intensity, peak


def _bucket_month(t_bucket):
    date = EPOCH_2021 + dt.timedelta(weeks=float(t_bucket))
    return date.month


def simulate_points(scenario):
    """Thinning-based inhomogeneous Poisson sampler in space-time.

    Intensity = base rate x seasonal factor x spatial surface on the
    unit square; time buckets are weeks from EPOCH_2021. In Jun-Sep an
    extra Gaussian jitter of std `summer_spread` widens the footprint.
    """
    rng = rng_for(scenario.seed, "simulate_points")
    intensity, peak = _spatial_intensity(scenario)
    records = []
    counter = 0
    for t in range(scenario.horizon):
        season = 1.0 + scenario.seasonal_amplitude * np.sin(
            2.0 * np.pi * t / scenario.seasonal_period)
        lam_max = scenario.base_rate * max(season, 0.0) * peak
        n_cand = rng.poisson(lam_max)
        if n_cand == 0:
            continue
        xs = rng.random(n_cand)
        ys = rng.random(n_cand)
        accept = rng.random(n_cand) * peak < intensity(xs, ys)
        xs, ys = xs[accept], ys[accept]
        month = _bucket_month(t)
        if scenario.summer_spread > 0 and month in (6, 7, 8, 9):
            xs = np.clip(xs + rng.normal(0, scenario.summer_spread,
                                         len(xs)), 0.0, 1.0)
            ys = np.clip(ys + rng.normal(0, scenario.summer_spread,
                                         len(ys)), 0.0, 1.0)
        offsets = rng.random(len(xs)) * 7 * 86400.0
        cats = rng.choice(list(scenario.category_mix),
                          p=list(scenario.category_mix.values()),
                          size=len(xs))
        t0 = (EPOCH_2021 + dt.timedelta(weeks=t)).timestamp()
        for x, y, off, cat in zip(xs, ys, offsets, cats):
            records.append(IncidentRecord(
                id=f"I{counter:07d}", timestamp=t0 + float(off),
                lon=float(x), lat=float(y), category=str(cat)))
            counter += 1
    return records


def synthetic_weather(scenario):
    """Daily weather rows spanning the scenario horizon (list of dicts)."""
    rng = rng_for(scenario.seed, "synthetic_weather")
    n_days = scenario.horizon * 7
    rows = []
    for d in range(n_days):
        date = (EPOCH_2021 + dt.timedelta(days=d)).date()
        doy = date.timetuple().tm_yday
        temp = 11.0 + 8.0 * np.sin(2 * np.pi * (doy - 105) / 365.25) \
            + rng.normal(0, 1.5)
        dew = temp - abs(rng.normal(3.0, 1.0))
        wind = abs(rng.normal(14.0, 5.0))
        rows.append({"date": date.isoformat(), "temp_c": round(temp, 2),
                     "dewpoint_c": round(dew, 2),
                     "wind_kmh": round(wind, 2)})
    return rows


def synthetic_covariates(areas, seed=0,
                         names=("age_65_plus_pct", "no_qualifications_pct",
                                "bad_health_pct", "no_vehicle_pct")):
    rng = rng_for(seed, "synthetic_covariates")
    rows = []
    for area in areas:
        row = {"area_id": area.area_id}
        cx, cy = area.centroid
        for i, name in enumerate(names):
            base = 20.0 + 15.0 * (cx if i % 2 == 0 else cy)
            row[name] = round(float(np.clip(
                base + rng.normal(0, 3.0), 0.0, 100.0)), 3)
        rows.append(row)
    return rows, list(names)


def planted_gwr_surface(n, beta_field, noise=0.01, seed=0, k=1):
    """(y, X, locations) with spatially varying slope(s).

    beta_field(u, v) returns the length k+1 coefficient vector
    (intercept first) at a location; locations are uniform on the unit
    square.
    """
    rng = rng_for(seed, "planted_gwr_surface")
    locations = rng.random((n, 2))
    X = rng.normal(0.0, 1.0, size=(n, k))
    y = np.empty(n)
    for i, (u, v) in enumerate(locations):
        b = np.asarray(beta_field(u, v), dtype=float)
        y[i] = b[0] + X[i] @ b[1:]
    y = y + rng.normal(0.0, noise, size=n)
    return y, X, locations


def dump_dataset(scenario, outdir):
    """Write the scenario as the pipeline's input files.

    Produces incidents.csv, areas.geojson, weather.csv, covariates.csv
    and scenario.json inside outdir; returns the path map.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    areas = lattice_areas(*scenario.lattice)
    records = simulate_points(scenario)
    paths = {}

    p = outdir / "incidents.csv"
    with open(p, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["id", "timestamp_iso8601", "lon", "lat", "category"])
        for r in records:
            iso = dt.datetime.fromtimestamp(
                r.timestamp, dt.timezone.utc).isoformat()
            wr.writerow([r.id, iso, f"{r.lon:.6f}", f"{r.lat:.6f}",
                         r.category])
    paths["incidents"] = str(p)

    p = outdir / "areas.geojson"
    features = []
    for a in areas:
        features.append({
            "type": "Feature",
            "properties": {"area_id": a.area_id, "name": a.name,
                           "borough": a.borough},
            "geometry": {"type": "Polygon",
                         "coordinates": [[list(pt) for pt in ring]
                                         for ring in a.polygon]}})
    with open(p, "w") as fh:
        json.dump({"type": "FeatureCollection", "features": features}, fh)
    paths["areas"] = str(p)

    p = outdir / "weather.csv"
    rows = synthetic_weather(scenario)
    with open(p, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=["date", "temp_c", "dewpoint_c",
                                            "wind_kmh"])
        wr.writeheader()
        wr.writerows(rows)
    paths["weather"] = str(p)

    p = outdir / "covariates.csv"
    cov_rows, names = synthetic_covariates(areas, seed=scenario.seed)
    with open(p, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=["area_id"] + names)
        wr.writeheader()
        wr.writerows(cov_rows)
    paths["covariates"] = str(p)

    p = outdir / "scenario.json"
    with open(p, "w") as fh:
        json.dump(scenario.to_json(), fh, indent=2)
    paths["scenario"] = str(p)
    return paths


def demo_scenario():
    """Small bundled scenario: two hotspots, mild seasonality, one year+.

    Used by scripts/make_demo_data.py and by the end-to-end determinism
    check; small enough that a full pipeline run stays under a minute.
    """
    return SyntheticScenario(
        seed=17, lattice=(5, 5), base_rate=90.0, seasonal_amplitude=0.35,
        seasonal_period=52.0, horizon=60,
        hotspots=(Hotspot(0.3, 0.7, 0.1, 6.0),
                  Hotspot(0.75, 0.25, 0.12, 3.0)),
        summer_spread=0.05)
