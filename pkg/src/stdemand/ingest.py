"""Reading and aggregating incident, area, weather and covariate inputs.

All timestamps are normalised to UTC; day-of-week is the ISO weekday
(Monday=0). Coordinates are WGS84 lon/lat treated as planar at city scale.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import statistics
from dataclasses import dataclass, field

import numpy as np

CATEGORIES = ("fire", "special_service", "false_alarm", "ambulance")

INCIDENT_COLUMNS = ("id", "timestamp_iso8601", "lon", "lat", "category")
WEATHER_COLUMNS = ("date", "temp_c", "dewpoint_c", "wind_kmh")


class SchemaError(ValueError):
    """Input file is missing a required column."""


class WeatherGapError(ValueError):
    """Weather series has a gap too long to interpolate."""


@dataclass(frozen=True)
class IncidentRecord:
    id: str
    timestamp: float  # UTC seconds since epoch
    lon: float
    lat: float
    category: str
    area_id: str | None = None


@dataclass(frozen=True)
class AreaUnit:
    area_id: str
    name: str
    borough: str
    polygon: list  # list of rings; each ring a list of (lon, lat), closed
    centroid: tuple


@dataclass(frozen=True)
class WeatherRecord:
    date: dt.date
    temperature: float
    dew_point: float
    wind_speed: float


@dataclass
class RowError:
    line: int
    message: str


@dataclass
class IngestReport:
    n_ok: int = 0
    errors: list = field(default_factory=list)


@dataclass
class TimeSeries:
    start: str  # label of first bucket, e.g. "2021-W05" or "2021-03"
    step: str  # "week" | "month"
    values: np.ndarray  # counts per bucket
    labels: list
    per_day: np.ndarray  # count / calendar days in bucket


@dataclass
class Profile:
    dimension: str  # "day_of_week" | "hour_of_day"
    means: np.ndarray  # 7 or 24 mean counts


def _parse_timestamp(text):
    t = dt.datetime.fromisoformat(text.replace("Z", "+00:00"))
    if t.tzinfo is None:
        t = t.replace(tzinfo=dt.timezone.utc)
    return t.astimezone(dt.timezone.utc).timestamp()


def read_incidents(path, study_window=None):
    """Parse the incident CSV into records plus an error report.

    study_window, if given, is an inclusive (start_ts, end_ts) pair in UTC
    seconds; rows outside it become row errors rather than records.
    """
    records = []
    report = IngestReport()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in INCIDENT_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"missing required columns: {', '.join(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                lon = float(row["lon"])
                lat = float(row["lat"])
            except (TypeError, ValueError):
                report.errors.append(RowError(lineno, "unparseable coordinate"))
                continue
            if not -180.0 <= lon <= 180.0:
                report.errors.append(
                    RowError(lineno, f"lon {lon} outside [-180, 180]"))
                continue
            if not -90.0 <= lat <= 90.0:
                report.errors.append(
                    RowError(lineno, f"lat {lat} outside [-90, 90]"))
                continue
            if row["category"] not in CATEGORIES:
                report.errors.append(
                    RowError(lineno, f"unknown category {row['category']!r}"))
                continue
            try:
                ts = _parse_timestamp(row["timestamp_iso8601"])
            except ValueError:
                report.errors.append(RowError(lineno, "unparseable timestamp"))
                continue
            if study_window is not None and not (
                    study_window[0] <= ts <= study_window[1]):
                report.errors.append(
                    RowError(lineno, "timestamp outside study window"))
                continue
            records.append(IncidentRecord(
                id=row["id"], timestamp=ts, lon=lon, lat=lat,
                category=row["category"]))
    report.n_ok = len(records)
    return records, report


def _ring_closed(ring):
    return len(ring) >= 4 and tuple(ring[0]) == tuple(ring[-1])


def read_areas(path):
    """Load a GeoJSON FeatureCollection of Polygon/MultiPolygon areas."""
    with open(path) as fh:
        doc = json.load(fh)
    areas = []
    for feat in doc["features"]:
        props = feat["properties"]
        geom = feat["geometry"]
        if geom["type"] == "Polygon":
            polys = [geom["coordinates"]]
        elif geom["type"] == "MultiPolygon":
            polys = geom["coordinates"]
        else:
            raise ValueError(f"unsupported geometry {geom['type']}")
        rings = []
        for poly in polys:
            for ring in poly:
                ring = [tuple(p) for p in ring]
                if not _ring_closed(ring):
                    ring = ring + [ring[0]]
                rings.append(ring)
        xs = [p[0] for ring in rings for p in ring]
        ys = [p[1] for ring in rings for p in ring]
        centroid = (sum(xs) / len(xs), sum(ys) / len(ys))
        areas.append(AreaUnit(
            area_id=str(props["area_id"]), name=props.get("name", ""),
            borough=props.get("borough", ""), polygon=rings,
            centroid=centroid))
    seen = set()
    for a in areas:
        if a.area_id in seen:
            raise ValueError(f"duplicate area_id {a.area_id}")
        seen.add(a.area_id)
    return areas


def read_weather(path):
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in WEATHER_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"missing required columns: {', '.join(missing)}")
        for row in reader:
            rec = WeatherRecord(
                date=dt.date.fromisoformat(row["date"]),
                temperature=float(row["temp_c"]),
                dew_point=float(row["dewpoint_c"]),
                wind_speed=float(row["wind_kmh"]))
            if rec.dew_point > rec.temperature + 1.0:
                raise ValueError(
                    f"{rec.date}: dew point {rec.dew_point} exceeds "
                    f"temperature {rec.temperature} + 1.0")
            if rec.wind_speed < 0:
                raise ValueError(f"{rec.date}: negative wind speed")
            records.append(rec)
    return records


def read_covariates(path, areas):
    """Covariate CSV keyed by area_id; missing cells imputed by borough median.

    Returns (table, n_imputed) where table maps area_id -> {name: value}.
    """
    borough_of = {a.area_id: a.borough for a in areas}
    raw = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        if "area_id" not in header:
            raise SchemaError("missing required columns: area_id")
        names = [c for c in header if c != "area_id"]
        for row in reader:
            aid = row["area_id"]
            if aid not in borough_of:
                raise ValueError(f"unknown area_id {aid}")
            raw[aid] = {
                name: (float(row[name]) if row[name] not in ("", None) else None)
                for name in names}
    missing_areas = set(borough_of) - set(raw)
    if missing_areas:
        raise ValueError(
            f"covariates missing for areas: {sorted(missing_areas)[:5]}")
    n_imputed = 0
    for name in names:
        by_borough = {}
        for aid, vals in raw.items():
            if vals[name] is not None:
                by_borough.setdefault(borough_of[aid], []).append(vals[name])
        overall = [v[name] for v in raw.values() if v[name] is not None]
        if not overall:
            raise ValueError(f"covariate {name} has no observed values")
        for aid, vals in raw.items():
            if vals[name] is None:
                pool = by_borough.get(borough_of[aid]) or overall
                vals[name] = statistics.median(pool)
                n_imputed += 1
    return raw, n_imputed


def _point_on_segment(p, a, b, eps=1e-12):
    cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
    if abs(cross) > eps:
        return False
    dot = (p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])
    if dot < -eps:
        return False
    sq = (b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2
    return dot <= sq + eps


def point_in_polygon(point, rings):
    """Even-odd rule over all rings; boundary points count as inside."""
    x, y = point
    inside = False
    for ring in rings:
        for a, b in zip(ring[:-1], ring[1:]):
            if _point_on_segment(point, a, b):
                return True
            if (a[1] > y) != (b[1] > y):
                xint = a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
                if x < xint:
                    inside = not inside
    return inside


def assign_area(point, areas):
    """Containing area_id, or None if the point is outside all areas.

    Boundary points may fall in several areas; the lexicographically
    smallest area_id wins.
    """
    hits = [a.area_id for a in areas if point_in_polygon(point, a.polygon)]
    return min(hits) if hits else None


def _week_key(d):
    iso = d.isocalendar()
    return (iso[0], iso[1])


def _week_label(key):
    return f"{key[0]}-W{key[1]:02d}"


def _month_label(key):
    return f"{key[0]}-{key[1]:02d}"


def _next_week(key):
    d = dt.date.fromisocalendar(key[0], key[1], 1) + dt.timedelta(days=7)
    return _week_key(d)


def _next_month(key):
    y, m = key
    return (y + 1, 1) if m == 12 else (y, m + 1)


def _days_in_month(y, m):
    nxt = dt.date(y + (m == 12), m % 12 + 1, 1)
    return (nxt - dt.date(y, m, 1)).days


def week_days(key):
    """The seven calendar days of an ISO week."""
    first = dt.date.fromisocalendar(key[0], key[1], 1)
    return [first + dt.timedelta(days=i) for i in range(7)]


def month_days(key):
    y, m = key
    return [dt.date(y, m, d + 1) for d in range(_days_in_month(y, m))]


def _record_date(rec):
    return dt.datetime.fromtimestamp(rec.timestamp, dt.timezone.utc).date()


def _bucket_series(records, bucket):
    if bucket == "week":
        keyf, nextf, labelf, daysf = _week_key, _next_week, _week_label, week_days
    else:
        keyf, nextf, labelf, daysf = (
            lambda d: (d.year, d.month), _next_month, _month_label, month_days)
    counts = {}
    for rec in records:
        counts[keyf(_record_date(rec))] = counts.get(keyf(_record_date(rec)), 0) + 1
    if not counts:
        return TimeSeries(start="", step=bucket, values=np.array([]),
                          labels=[], per_day=np.array([]))
    keys = []
    k, last = min(counts), max(counts)
    while True:
        keys.append(k)
        if k == last:
            break
        k = nextf(k)
    values = np.array([float(counts.get(k, 0)) for k in keys])
    ndays = np.array([float(len(daysf(k))) for k in keys])
    return TimeSeries(start=labelf(keys[0]), step=bucket, values=values,
                      labels=[labelf(k) for k in keys], per_day=values / ndays)


def _bucket_profile(records, bucket):
    nbins = 7 if bucket == "day_of_week" else 24
    counts = np.zeros(nbins)
    if not records:
        return Profile(dimension=bucket, means=counts)
    dates = [_record_date(r) for r in records]
    first, last = min(dates), max(dates)
    span = [first + dt.timedelta(days=i) for i in range((last - first).days + 1)]
    if bucket == "day_of_week":
        occurrences = np.zeros(nbins)
        for d in span:
            occurrences[d.weekday()] += 1
        for d in dates:
            counts[d.weekday()] += 1
    else:
        occurrences = np.full(nbins, float(len(span)))
        for rec in records:
            hour = dt.datetime.fromtimestamp(
                rec.timestamp, dt.timezone.utc).hour
            counts[hour] += 1
    with np.errstate(invalid="ignore"):
        means = np.where(occurrences > 0, counts / occurrences, 0.0)
    return Profile(dimension=bucket, means=means)


def aggregate(records, bucket, by_area=False):
    """Bucket incident counts by calendar unit.

    week/month yield an ordered TimeSeries (empty buckets are 0);
    day_of_week/hour_of_day yield a Profile of mean counts. With
    by_area=True a dict area_id -> result is returned instead.
    """
    if bucket not in ("week", "month", "day_of_week", "hour_of_day"):
        raise ValueError(f"unknown bucket {bucket!r}")
    if by_area:
        groups = {}
        for rec in records:
            groups.setdefault(rec.area_id, []).append(rec)
        return {aid: aggregate(recs, bucket) for aid, recs in groups.items()}
    if bucket in ("week", "month"):
        return _bucket_series(records, bucket)
    return _bucket_profile(records, bucket)


def align_exog(demand, weather, max_gap_days=7):
    """Average daily weather into each demand bucket.

    Returns (X, names, n_interpolated) where X has one row per bucket with
    columns temperature, dew_point, wind_speed. Gaps of at most
    max_gap_days are linearly interpolated; longer gaps are a hard error.
    """
    if demand.step == "week":
        keyf, daysf = (lambda lab: _parse_week_label(lab)), week_days
    else:
        keyf, daysf = (lambda lab: _parse_month_label(lab)), month_days
    by_date = {w.date: w for w in weather}
    dates = sorted(by_date)
    if not dates:
        raise WeatherGapError("no weather records")
    for a, b in zip(dates[:-1], dates[1:]):
        gap = (b - a).days - 1
        if gap > max_gap_days:
            raise WeatherGapError(
                f"weather gap of {gap} days between {a} and {b} "
                f"exceeds {max_gap_days}")
    n_interp = 0
    filled = {}
    for a, b in zip(dates[:-1], dates[1:]):
        gap = (b - a).days
        wa, wb = by_date[a], by_date[b]
        for i in range(gap):
            d = a + dt.timedelta(days=i)
            f = i / gap
            if i > 0:
                n_interp += 1
            filled[d] = (
                wa.temperature + f * (wb.temperature - wa.temperature),
                wa.dew_point + f * (wb.dew_point - wa.dew_point),
                wa.wind_speed + f * (wb.wind_speed - wa.wind_speed))
    w = by_date[dates[-1]]
    filled[dates[-1]] = (w.temperature, w.dew_point, w.wind_speed)
    rows = []
    for lab in demand.labels:
        days = [d for d in daysf(keyf(lab)) if d in filled]
        if not days:
            raise WeatherGapError(f"no weather coverage for bucket {lab}")
        vals = np.array([filled[d] for d in days])
        rows.append(vals.mean(axis=0))
    X = np.array(rows)
    return X, ["temperature", "dew_point", "wind_speed"], n_interp


def _parse_week_label(lab):
    y, w = lab.split("-W")
    return (int(y), int(w))


def _parse_month_label(lab):
    y, m = lab.split("-")
    return (int(y), int(m))
