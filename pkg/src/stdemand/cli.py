"""Pipeline CLI: ingest -> decompose -> fit -> moran/lisa -> gwr ->
kde/comap -> rank -> render, runnable per stage or end to end.

Each stage writes its artifacts under the output directory and records
them in manifest.json together with the config hash and seed, so a rerun
with identical inputs is byte-for-byte reproducible.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gwr as gwrmod
from . import ingest, render, spstat, surface, tsa, weights

STAGES = ("ingest", "decompose", "fit", "moran", "lisa", "gwr", "kde",
          "comap", "rank", "render")


class ConfigError(ValueError):
    """Invalid pipeline configuration; message names the field."""


@dataclass
class PipelineConfig:
    incidents: str
    areas: str
    weather: str
    covariates: str
    out: str
    seed: int
    bucket: str = "week"
    weights_scheme: str = "queen"  # "queen" | "knn"
    knn_k: int = 6
    sarimax: dict = field(default_factory=lambda: {
        "p_max": 1, "q_max": 1, "d_set": [0], "seasonal": False, "s": 0})
    n_perm: int = 999
    alpha: float = 0.05
    gwr_covariates: list = field(default_factory=list)
    gwr_kernel: str = "bisquare"
    gwr_adaptive: bool = True
    log1p: bool = False
    kde_bandwidth: float = 0.05
    kde_grid: int = 100
    comap_dims: list = field(default_factory=lambda: ["month"])
    comap_bins: int = 3
    comap_overlap: float = 0.25
    stl_period: int = 52
    threads: int = 1

    @classmethod
    def load(cls, path, overrides=None):
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config: file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON: {exc}")
        inputs = raw.get("inputs", {})
        data = {
            "incidents": inputs.get("incidents"),
            "areas": inputs.get("areas"),
            "weather": inputs.get("weather"),
            "covariates": inputs.get("covariates"),
            "out": raw.get("out"),
            "seed": raw.get("seed"),
        }
        for key in ("bucket", "weights_scheme", "knn_k", "sarimax", "n_perm",
                    "alpha", "gwr_covariates", "gwr_kernel", "gwr_adaptive",
                    "log1p", "kde_bandwidth", "kde_grid", "comap_dims",
                    "comap_bins", "comap_overlap", "stl_period", "threads"):
            if key in raw:
                data[key] = raw[key]
        for key, val in (overrides or {}).items():
            if val is not None:
                data[key] = val
        for key in ("incidents", "areas", "weather", "covariates"):
            if not data.get(key):
                raise ConfigError(f"inputs.{key}: missing")
            if not Path(data[key]).exists():
                raise ConfigError(f"inputs.{key}: no such file "
                                  f"{data[key]}")
        if data.get("out") is None:
            raise ConfigError("out: missing")
        if data.get("seed") is None:
            raise ConfigError("seed: missing (no wall-clock default)")
        cfg = cls(**data)
        if cfg.bucket not in ("week", "month"):
            raise ConfigError(f"bucket: must be week or month, "
                              f"got {cfg.bucket}")
        return cfg

    def digest(self):
        blob = json.dumps(self.__dict__, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()

    def rng(self, label):
        return np.random.default_rng(
            np.random.SeedSequence([int(self.seed),
                                    zlib.crc32(label.encode())]))

    def stage_seed(self, label):
        return zlib.crc32(f"{self.seed}:{label}".encode())


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


class Pipeline:
    """Holds loaded inputs and intermediate products across stages."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.outdir = Path(cfg.out)
        self.outdir.mkdir(parents=True, exist_ok=True)
        self.artifacts = []
        self.areas = ingest.read_areas(cfg.areas)
        records, self.report = ingest.read_incidents(cfg.incidents)
        order = {a.area_id: i for i, a in enumerate(self.areas)}
        self.records = []
        for r in records:
            aid = ingest.assign_area((r.lon, r.lat), self.areas)
            if aid is not None:
                self.records.append(ingest.IncidentRecord(
                    id=r.id, timestamp=r.timestamp, lon=r.lon, lat=r.lat,
                    category=r.category, area_id=aid))
        self.weather = ingest.read_weather(cfg.weather)
        self.covariates, self.n_imputed = ingest.read_covariates(
            cfg.covariates, self.areas)
        self.las = [r for r in self.records if r.category == "ambulance"]
        self.lfb = [r for r in self.records if r.category != "ambulance"]
        self._per_area_counts = None

    def emit(self, path):
        self.artifacts.append(str(path))
        return path

    def per_area_counts(self):
        if self._per_area_counts is None:
            las = {a.area_id: 0.0 for a in self.areas}
            lfb = {a.area_id: 0.0 for a in self.areas}
            for r in self.las:
                las[r.area_id] += 1
            for r in self.lfb:
                lfb[r.area_id] += 1
            self._per_area_counts = (las, lfb)
        return self._per_area_counts

    def build_weights(self):
        if self.cfg.weights_scheme == "queen":
            w = weights.queen_contiguity(self.areas)
        else:
            w = weights.knn([a.centroid for a in self.areas],
                            self.cfg.knn_k,
                            ids=[a.area_id for a in self.areas])
        return weights.row_standardize(w)

    # --- stages -----------------------------------------------------------

    def stage_ingest(self):
        cfg = self.cfg
        las_series = ingest.aggregate(self.las, cfg.bucket)
        lfb_series = ingest.aggregate(self.lfb, cfg.bucket)
        rows = [["label", "las_count", "las_per_day",
                 "lfb_count", "lfb_per_day"]]
        lfb_by_label = dict(zip(lfb_series.labels, zip(
            lfb_series.values, lfb_series.per_day)))
        for lab, c, pd_ in zip(las_series.labels, las_series.values,
                               las_series.per_day):
            lc, lpd = lfb_by_label.get(lab, (0.0, 0.0))
            rows.append([lab, int(c), f"{pd_:.6f}", int(lc), f"{lpd:.6f}"])
        p = self.emit(self.outdir / "series.csv")
        with open(p, "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
        profiles = {}
        for service, recs in (("las", self.las), ("lfb", self.lfb)):
            for dim in ("day_of_week", "hour_of_day"):
                prof = ingest.aggregate(recs, dim)
                profiles[f"{service}_{dim}"] = list(prof.means)
        _write_json({
            "n_records": len(self.records),
            "n_errors": len(self.report.errors),
            "n_imputed_covariates": self.n_imputed,
            "profiles": profiles,
        }, self.emit(self.outdir / "profiles.json"))
        chart = render.render_series_chart(
            {"LAS": las_series, "LFB": lfb_series},
            title=f"Demand per {cfg.bucket}")
        self.emit(self.outdir / "series.svg").write_text(chart)
        self.series = {"las": las_series, "lfb": lfb_series}
        return self.series

    def _ensure_series(self):
        if not hasattr(self, "series"):
            self.stage_ingest()
        return self.series

    def stage_decompose(self):
        series = self._ensure_series()
        out = {}
        for name, s in series.items():
            res = tsa.stl(s, period=self.cfg.stl_period)
            out[name] = {"trend": list(res.trend),
                         "seasonal": list(res.seasonal),
                         "remainder": list(res.remainder),
                         "period": res.period}
        _write_json(out, self.emit(self.outdir / "stl.json"))
        return out

    def stage_fit(self):
        series = self._ensure_series()
        sx = self.cfg.sarimax
        reports = {}
        for name, s in series.items():
            X, names, _ = ingest.align_exog(s, self.weather)
            y = np.log1p(s.values) if self.cfg.log1p else s.values
            target = ingest.TimeSeries(start=s.start, step=s.step,
                                       values=y, labels=s.labels,
                                       per_day=s.per_day)
            base = tsa.ols(y, X, names=names)
            best, table = tsa.grid_search(
                target, exog=X, p_max=sx.get("p_max", 1),
                q_max=sx.get("q_max", 1),
                d_set=tuple(sx.get("d_set", [0])),
                seasonal=sx.get("seasonal", False), s=sx.get("s", 0),
                exog_names=tuple(names))
            reports[name] = {
                "ols": tsa.model_report(base),
                "best": tsa.model_report(best),
                "grid": [{"spec": list(r["spec"].key()), "aic": r["aic"],
                          "ok": r["ok"], "error": r["error"]}
                         for r in table],
                "diagnostics": {
                    k: (list(v) if isinstance(v, np.ndarray) else v)
                    for k, v in tsa.diagnostics(
                        best, min(10, len(best.residuals) - 1)).items()},
            }
        _write_json(reports, self.emit(self.outdir / "models.json"))
        return reports

    def _pair(self):
        las, lfb = self.per_area_counts()
        ids = [a.area_id for a in self.areas]
        return spstat.AttributePair(
            x=np.array([las[a] for a in ids]),
            y=np.array([lfb[a] for a in ids]), labels=ids)

    def stage_moran(self):
        w = self.build_weights()
        res = spstat.bivariate_moran(
            self._pair(), w, n_perm=self.cfg.n_perm,
            seed=self.cfg.stage_seed("moran"))
        _write_json({"i_b": res.i_b, "p": res.p_value, "n_perm": res.n_perm,
                     "seed": res.seed, "perm_mean": res.perm_mean,
                     "perm_std": res.perm_std},
                    self.emit(self.outdir / "moran.json"))
        return res

    def stage_lisa(self):
        w = self.build_weights()
        results = spstat.bivariate_lisa(
            self._pair(), w, n_perm=self.cfg.n_perm,
            seed=self.cfg.stage_seed("lisa"), alpha=self.cfg.alpha)
        clusters = spstat.classify_clusters(results, alpha=self.cfg.alpha)
        features = []
        for area, r in zip(self.areas, results):
            features.append({
                "type": "Feature",
                "properties": {
                    "area_id": area.area_id, "borough": area.borough,
                    "i_local": None if np.isnan(r.i_i) else r.i_i,
                    "p_value": None if np.isnan(r.p_i) else r.p_i,
                    "cluster": clusters[area.area_id]},
                "geometry": {"type": "Polygon",
                             "coordinates": [[list(p) for p in ring]
                                             for ring in area.polygon]}})
        _write_json({"type": "FeatureCollection", "features": features},
                    self.emit(self.outdir / "lisa.geojson"))
        self.clusters = clusters
        return results

    def stage_gwr(self):
        cfg = self.cfg
        _, lfb = self.per_area_counts()
        ids = [a.area_id for a in self.areas]
        names = cfg.gwr_covariates or sorted(
            next(iter(self.covariates.values())))
        X = np.array([[self.covariates[a][nm] for nm in names]
                      for a in ids])
        # z-standardize covariates; log-transform response if asked
        X = (X - X.mean(axis=0)) / np.where(X.std(axis=0) > 0,
                                            X.std(axis=0), 1.0)
        y = np.array([lfb[a] for a in ids])
        if cfg.log1p:
            y = np.log1p(y)
        locations = np.array([a.centroid for a in self.areas])
        bw, trace = gwrmod.select_bandwidth(
            y, X, locations, kernel=cfg.gwr_kernel,
            adaptive=cfg.gwr_adaptive)
        spec = gwrmod.GwrSpec(kernel=cfg.gwr_kernel,
                              adaptive=cfg.gwr_adaptive, bandwidth=bw)
        result = gwrmod.gwr_fit(y, X, locations, spec, names=names)
        base = tsa.ols(y, X, names=names)
        cond = float(np.linalg.cond(np.column_stack(
            [np.ones(len(y)), X])))
        _write_json({
            "bandwidth": bw, "kernel": cfg.gwr_kernel,
            "adaptive": cfg.gwr_adaptive,
            "search_trace": [[float(b), float(a)] for b, a in trace],
            "condition_number": cond,
            "summary": gwrmod.summary_table(result),
            "comparison": gwrmod.compare_models(base, result),
        }, self.emit(self.outdir / "gwr.json"))
        features = []
        for i, area in enumerate(self.areas):
            props = {"area_id": area.area_id,
                     "local_r2": float(result.local_r2[i])}
            for j, nm in enumerate(result.names):
                props[f"beta_{nm}"] = float(result.beta[i, j])
                props[f"t_{nm}"] = float(result.pseudo_t[i, j])
            features.append({
                "type": "Feature", "properties": props,
                "geometry": {"type": "Polygon",
                             "coordinates": [[list(p) for p in ring]
                                             for ring in area.polygon]}})
        _write_json({"type": "FeatureCollection", "features": features},
                    self.emit(self.outdir / "gwr.geojson"))
        return result

    def _grid(self):
        pts = [(r.lon, r.lat) for r in self.lfb] or [(0.0, 0.0), (1.0, 1.0)]
        return surface.grid_for_points(
            pts, n_cells=self.cfg.kde_grid,
            margin=self.cfg.kde_bandwidth)

    def stage_kde(self):
        pts = [(r.lon, r.lat) for r in self.lfb]
        raster = surface.kde(pts, self.cfg.kde_bandwidth, self._grid())
        surface.write_esri_ascii(
            raster, self.emit(self.outdir / "kde_lfb.asc"))
        return raster

    def stage_comap(self):
        cfg = self.cfg
        facets = surface.build_facets(
            self.lfb, tuple(cfg.comap_dims), cfg.comap_bins,
            cfg.comap_overlap)
        panels, vmax = surface.comap(self.lfb, facets, cfg.kde_bandwidth,
                                     self._grid())
        _write_json([{"label": f.label, "dimensions": list(f.dimensions),
                      "intervals": [list(iv) for iv in f.intervals],
                      "member_count": f.member_count}
                     for f, _ in panels],
                    self.emit(self.outdir / "facets.json"))
        sheet = render.render_comap(panels, global_max=vmax)
        self.emit(self.outdir / "comap.svg").write_text(sheet)
        return panels

    def stage_rank(self):
        las, lfb = self.per_area_counts()
        ids = [a.area_id for a in self.areas]
        flags = render.dual_high_flags(
            [las[a] for a in ids], [lfb[a] for a in ids], ids)
        rows = render.rank_boroughs(
            las, lfb, flags, {a.area_id: a.borough for a in self.areas})
        self.emit(self.outdir / "ranking.csv").write_text(
            render.ranking_csv(rows))
        return rows

    def stage_render(self):
        las, lfb = self.per_area_counts()
        ids = [a.area_id for a in self.areas]
        classes, _ = render.bivariate_classify(
            [las[a] for a in ids], [lfb[a] for a in ids])
        svg, warns = render.render_map(
            self.areas, dict(zip(ids, classes)), kind="bivariate",
            title="LAS x LFB demand")
        self.emit(self.outdir / "bivariate_map.svg").write_text(svg)
        if not hasattr(self, "clusters"):
            self.stage_lisa()
        svg, warns = render.render_map(
            self.areas, self.clusters, kind="lisa",
            title="Bivariate LISA clusters")
        self.emit(self.outdir / "lisa_map.svg").write_text(svg)
        return warns

    def run(self, stages):
        for stage in stages:
            getattr(self, f"stage_{stage}")()
        manifest = {
            "inputs": {
                "incidents": _sha256(self.cfg.incidents),
                "areas": _sha256(self.cfg.areas),
                "weather": _sha256(self.cfg.weather),
                "covariates": _sha256(self.cfg.covariates),
            },
            "config_hash": self.cfg.digest(),
            "seed": self.cfg.seed,
            "stages": list(stages),
            "artifacts": {
                str(Path(p).name): _sha256(p) for p in self.artifacts},
        }
        _write_json(manifest, self.outdir / "manifest.json")
        return manifest


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="stdemand",
        description="Spatio-temporal emergency demand analytics pipeline")
    ap.add_argument("subcommand", choices=STAGES + ("pipeline",))
    ap.add_argument("--config", required=True)
    ap.add_argument("--out")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--threads", type=int,
                    default=int(os.environ.get("BLK_THREADS", "0")) or None)
    ap.add_argument("--n-perm", type=int, dest="n_perm")
    ap.add_argument("--bandwidth", type=float, dest="kde_bandwidth")
    ap.add_argument("--log1p", action="store_true", default=None)
    ap.add_argument("--s", type=int, dest="seasonal_s")
    return ap


def main(argv=None):
    args = _build_parser().parse_args(argv)
    overrides = {
        "out": args.out, "seed": args.seed, "threads": args.threads,
        "n_perm": args.n_perm, "kde_bandwidth": args.kde_bandwidth,
        "log1p": args.log1p,
    }
    try:
        cfg = PipelineConfig.load(args.config, overrides)
        if args.seasonal_s is not None:
            cfg.sarimax = dict(cfg.sarimax)
            cfg.sarimax["s"] = args.seasonal_s
            cfg.sarimax["seasonal"] = args.seasonal_s > 0
    except ConfigError as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 2
    stages = STAGES if args.subcommand == "pipeline" else (args.subcommand,)
    try:
        pipe = Pipeline(cfg)
        manifest = pipe.run(stages)
    except Exception as exc:
        print(json.dumps({"error": f"{type(exc).__name__}: {exc}"}),
              file=sys.stderr)
        return 1
    print(json.dumps({"out": cfg.out,
                      "artifacts": sorted(manifest["artifacts"])}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
