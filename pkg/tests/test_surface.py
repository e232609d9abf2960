import datetime as dt

import numpy as np
import pytest

from stdemand import oracle, surface
from stdemand.ingest import IncidentRecord


def _grid(n=60, lo=-0.2, hi=1.2):
    cell = (hi - lo) / n
    return surface.RasterGrid(origin=(lo, lo), cell=cell, nx=n, ny=n)


def _rec(ts, lon=0.5, lat=0.5, rid="r"):
    return IncidentRecord(id=rid, timestamp=ts, lon=lon, lat=lat,
                         category="fire")


def _ts(month, day=10, hour=12):
    return dt.datetime(2021, month, day, hour,
                       tzinfo=dt.timezone.utc).timestamp()


class TestKde:
    def test_single_point_mass_and_peak(self):
        grid = _grid()
        out = surface.kde([(0.5, 0.5)], 0.1, grid)
        assert out.total_mass() == pytest.approx(1.0, abs=0.005)
        j, i = np.unravel_index(np.argmax(out.values), out.values.shape)
        assert abs(grid.x_centers()[i] - 0.5) <= grid.cell
        assert abs(grid.y_centers()[j] - 0.5) <= grid.cell

    def test_two_distant_points_two_bumps(self):
        grid = _grid(n=100)
        out = surface.kde([(0.2, 0.2), (0.8, 0.8)], 0.08, grid)
        assert out.total_mass() == pytest.approx(2.0, abs=0.01)
        # no density along the midline outside both supports
        mid = out.values[np.abs(grid.y_centers() - 0.5) < 0.02, :]
        xs = grid.x_centers()
        corridor = mid[:, np.abs(xs - 0.5) < 0.02]
        assert np.all(corridor == 0.0)

    def test_empty_point_set(self):
        out = surface.kde([], 0.1, _grid())
        assert np.all(out.values == 0.0)

    def test_fast_path_equals_naive_oracle(self):
        rng = np.random.default_rng(1)
        pts = rng.random((500, 2))
        grid = _grid(n=80)
        fast = surface.kde(pts, 0.07, grid)
        naive = oracle.naive_kde(pts, 0.07, grid)
        assert np.abs(fast.values - naive.values).max() <= 1e-10

    def test_linearity(self):
        rng = np.random.default_rng(2)
        a = rng.random((40, 2))
        b = rng.random((30, 2))
        grid = _grid(n=50)
        ka = surface.kde(a, 0.1, grid)
        kb = surface.kde(b, 0.1, grid)
        kab = surface.kde(np.vstack([a, b]), 0.1, grid)
        assert np.abs(kab.values - (ka.values + kb.values)).max() <= 1e-12

    def test_translation_equivariance(self):
        rng = np.random.default_rng(3)
        pts = rng.random((50, 2))
        g1 = _grid(n=40)
        delta = np.array([2.5, -1.0])
        g2 = surface.RasterGrid(
            origin=(g1.origin[0] + delta[0], g1.origin[1] + delta[1]),
            cell=g1.cell, nx=g1.nx, ny=g1.ny)
        k1 = surface.kde(pts, 0.1, g1)
        k2 = surface.kde(pts + delta, 0.1, g2)
        assert np.abs(k1.values - k2.values).max() <= 1e-9

    def test_bad_bandwidth(self):
        with pytest.raises(ValueError):
            surface.kde([(0.0, 0.0)], 0.0, _grid())


class TestFacets:
    def test_uniform_hours_equal_bins(self):
        recs = [_rec(_ts(3, day=5, hour=h), rid=f"h{h}") for h in range(24)]
        facets = surface.build_facets(recs, "hour_of_day", 4,
                                      overlap_fraction=0.0)
        assert [f.member_count for f in facets] == [6, 6, 6, 6]

    def test_skewed_distribution_counts_balanced(self):
        rng = np.random.default_rng(4)
        hours = np.clip(rng.normal(14, 3, 240), 0, 23.9)
        recs = [_rec(_ts(5, day=1 + int(i % 27), hour=0) + h * 3600.0,
                     rid=f"s{i}") for i, h in enumerate(hours)]
        facets = surface.build_facets(recs, "hour_of_day", 4,
                                      overlap_fraction=0.0)
        counts = np.array([f.member_count for f in facets])
        assert counts.sum() == 240
        assert np.all(np.abs(counts - 60) <= 6)  # within 10%

    def test_overlap_boundary_membership(self):
        recs = [_rec(_ts(3, day=5, hour=h), rid=f"h{h}") for h in range(24)]
        facets = surface.build_facets(recs, "hour_of_day", 4,
                                      overlap_fraction=0.25)
        membership = np.zeros(24, dtype=int)
        for f in facets:
            for i in f.member_index:
                membership[i] += 1
        assert np.all(membership >= 1)
        assert np.all(membership <= 2)

    def test_wrapping_interval(self):
        # Nov-Feb style facet: month coordinate wraps through 12 -> 1
        recs = [_rec(_ts(m), rid=f"m{m}{i}") for m in (11, 12, 1, 2, 6, 7)
                for i in range(10)]
        facets = surface.build_facets(recs, "month", 2,
                                      overlap_fraction=0.0)
        assert sum(f.member_count for f in facets) == 60

    def test_too_few_records(self):
        with pytest.raises(ValueError):
            surface.build_facets([_rec(_ts(1))], "month", 3)

    def test_deterministic(self):
        recs = [_rec(_ts(1 + (i % 12)), rid=f"d{i}") for i in range(48)]
        f1 = surface.build_facets(recs, "month", 3, 0.25)
        f2 = surface.build_facets(recs, "month", 3, 0.25)
        for a, b in zip(f1, f2):
            assert a.label == b.label
            assert np.array_equal(a.member_index, b.member_index)


class TestComap:
    def test_single_month_panels(self):
        recs = [_rec(_ts(7), lon=0.5, lat=0.5, rid=f"j{i}")
                for i in range(30)]
        facets = surface.build_facets(recs, "month", 3, 0.0)
        panels, vmax = surface.comap(recs, facets, 0.1, _grid())
        nonzero = [f.member_count > 0 for f, _ in panels]
        assert sum(nonzero) >= 1
        for f, raster in panels:
            if f.member_count == 0:
                assert np.all(raster.values == 0.0)
        assert vmax == max(float(r.values.max()) for _, r in panels)

    def test_panel_mass_matches_member_count(self):
        rng = np.random.default_rng(6)
        recs = [_rec(_ts(1 + (i % 12)), lon=float(rng.uniform(0.3, 0.7)),
                     lat=float(rng.uniform(0.3, 0.7)), rid=f"c{i}")
                for i in range(120)]
        facets = surface.build_facets(recs, "month", 3, 0.0)
        panels, _ = surface.comap(recs, facets, 0.08, _grid(n=100))
        for f, raster in panels:
            assert raster.total_mass() == pytest.approx(
                f.member_count, rel=0.01)

    def test_summer_expanding_process(self):
        scenario = oracle.SyntheticScenario(
            seed=21, base_rate=150.0, seasonal_amplitude=0.0,
            horizon=52, summer_spread=0.25,
            hotspots=(oracle.Hotspot(0.5, 0.5, 0.08, 25.0),))
        recs = oracle.simulate_points(scenario)
        facets = surface.build_facets(recs, "month", 3, 0.0)
        grid = _grid(n=80)
        panels, vmax = surface.comap(recs, facets, 0.08, grid)
        area_above = {}
        for f, raster in panels:
            halfmax = 0.5 * raster.values.max()
            area_above[f.label] = (raster.values > halfmax).sum() \
                / max(f.member_count, 1)
        labels = list(area_above)
        summer = [l for l in labels if "Jun" in l or "Jul" in l
                  or "Aug" in l or "Sep" in l]
        winter = [l for l in labels if "Dec" in l or "Jan" in l
                  or "Feb" in l or "Nov" in l]
        assert summer and winter
        assert max(area_above[l] for l in summer) > \
            max(area_above[l] for l in winter)


class TestEsriAscii:
    def test_header_and_shape(self, tmp_path):
        grid = _grid(n=5)
        grid.values[:] = np.arange(25.0).reshape(5, 5)
        p = tmp_path / "out.asc"
        surface.write_esri_ascii(grid, p)
        lines = p.read_text().splitlines()
        assert lines[0] == "ncols 5"
        assert lines[1] == "nrows 5"
        assert lines[4].startswith("cellsize")
        # first data row is the northernmost (values row ny-1)
        assert lines[6].split()[0] == repr(grid.values[4, 0])
