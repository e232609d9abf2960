import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stdemand import oracle, render, surface


class TestBivariateClassify:
    def test_one_to_nine_diagonal(self):
        v = np.arange(1.0, 10.0)
        classes, warns = render.bivariate_classify(v, v)
        assert warns == []
        assert [c.cx for c in classes] == [0, 0, 0, 1, 1, 1, 2, 2, 2]
        assert all(c.cx == c.cy for c in classes)

    def test_minimum_is_corner(self):
        rng = np.random.default_rng(0)
        x = rng.random(30)
        y = rng.random(30)
        i = int(np.argmin(x))
        x[i] = x.min() - 1.0
        y[i] = y.min() - 1.0
        classes, _ = render.bivariate_classify(x, y)
        assert (classes[i].cx, classes[i].cy) == (0, 0)

    def test_exact_thirds_for_distinct_values(self):
        rng = np.random.default_rng(1)
        x = rng.permutation(np.arange(21.0))
        y = rng.permutation(np.arange(21.0) + 100.0)
        classes, _ = render.bivariate_classify(x, y)
        for axis in ("cx", "cy"):
            counts = np.bincount([getattr(c, axis) for c in classes],
                                 minlength=3)
            assert list(counts) == [7, 7, 7]

    def test_constant_variable_warns_middle(self):
        classes, warns = render.bivariate_classify(
            np.ones(6), np.arange(6.0))
        assert len(warns) == 1
        assert all(c.cx == 1 for c in classes)

    @given(st.integers(min_value=1, max_value=50),
           st.floats(min_value=0.1, max_value=10.0),
           st.floats(min_value=-5.0, max_value=5.0))
    @settings(max_examples=30, deadline=None)
    def test_monotone_transform_invariance(self, seed, scale, shift):
        rng = np.random.default_rng(seed)
        x = rng.random(12)
        y = rng.random(12)
        c1, _ = render.bivariate_classify(x, y)
        c2, _ = render.bivariate_classify(scale * x + shift, np.exp(y))
        assert [(c.cx, c.cy) for c in c1] == [(c.cx, c.cy) for c in c2]


class TestRanking:
    def test_dominant_borough_first(self):
        areas = oracle.lattice_areas(4, 4, n_boroughs=4)
        borough_of = {a.area_id: a.borough for a in areas}
        las = {a.area_id: 1.0 for a in areas}
        lfb = {a.area_id: 1.0 for a in areas}
        flags = {a.area_id: False for a in areas}
        for a in areas:
            if a.borough == "B02":
                las[a.area_id] = 50.0
                lfb[a.area_id] = 50.0
                flags[a.area_id] = True
        rows = render.rank_boroughs(las, lfb, flags, borough_of)
        assert rows[0].borough == "B02"

    def test_identical_boroughs_alphabetical_zero_scores(self):
        areas = oracle.lattice_areas(4, 2, n_boroughs=4)
        borough_of = {a.area_id: a.borough for a in areas}
        las = {a.area_id: 2.0 for a in areas}
        rows = render.rank_boroughs(las, dict(las),
                                    {a.area_id: False for a in areas},
                                    borough_of)
        assert [r.borough for r in rows] == ["B00", "B01", "B02", "B03"]
        assert all(r.score == 0.0 for r in rows)

    def test_planted_top3(self):
        areas = oracle.lattice_areas(8, 4, n_boroughs=8)
        borough_of = {a.area_id: a.borough for a in areas}
        rng = np.random.default_rng(5)
        las, lfb, flags = {}, {}, {}
        top = {"B01", "B04", "B06"}
        for a in areas:
            hot = a.borough in top
            las[a.area_id] = float(rng.uniform(4, 6)) * (5 if hot else 1)
            lfb[a.area_id] = float(rng.uniform(4, 6)) * (5 if hot else 1)
            flags[a.area_id] = hot
        rows = render.rank_boroughs(las, lfb, flags, borough_of)
        assert {r.borough for r in rows[:3]} == top

    def test_score_formula_audit(self):
        areas = oracle.lattice_areas(4, 4, n_boroughs=4)
        borough_of = {a.area_id: a.borough for a in areas}
        rng = np.random.default_rng(6)
        las = {a.area_id: float(rng.uniform(0, 10)) for a in areas}
        lfb = {a.area_id: float(rng.uniform(0, 10)) for a in areas}
        flags = {a.area_id: bool(rng.random() < 0.3) for a in areas}
        rows = render.rank_boroughs(las, lfb, flags, borough_of)
        for r in rows:
            want = 0.4 * r.las_total_z + 0.4 * r.lfb_total_z \
                + 0.2 * r.dual_high_lsoa_z
            assert r.score == pytest.approx(want, abs=1e-12)

    def test_csv_format(self):
        areas = oracle.lattice_areas(2, 2, n_boroughs=2)
        borough_of = {a.area_id: a.borough for a in areas}
        las = {a.area_id: float(i) for i, a in enumerate(areas)}
        rows = render.rank_boroughs(las, dict(las),
                                    {a.area_id: False for a in areas},
                                    borough_of)
        text = render.ranking_csv(rows)
        assert text.splitlines()[0] == \
            "rank,borough,score,las_z,lfb_z,dual_z"
        assert text.splitlines()[1].startswith("1,")


class TestRenderMap:
    def test_four_squares_expected_fills(self):
        areas = oracle.lattice_areas(2, 2)
        classes = {
            "A000": render.BivariateClass(0, 0),
            "A001": render.BivariateClass(2, 2),
            "A002": render.BivariateClass(1, 0),
            "A003": render.BivariateClass(0, 2),
        }
        svg, warns = render.render_map(areas, classes, kind="bivariate")
        assert warns == []
        # four area outlines (the extra <path> is the hatch pattern def)
        assert svg.count('stroke="#ffffff"') == 4
        for cls in classes.values():
            assert f'<path d="M' in svg
            assert svg.count(f'fill="{cls.color}"') >= 2  # area + legend

    def test_lisa_all_ns_grey(self):
        areas = oracle.lattice_areas(2, 2)
        labels = {a.area_id: "NS" for a in areas}
        svg, _ = render.render_map(areas, labels, kind="lisa")
        # four areas plus the legend swatch
        assert svg.count(f'fill="{render.LISA_COLORS["NS"]}"') == 5

    def test_missing_classification_hatched(self):
        areas = oracle.lattice_areas(2, 2)
        labels = {a.area_id: "HH" for a in areas[:3]}
        svg, warns = render.render_map(areas, labels, kind="lisa")
        assert len(warns) == 1
        assert 'fill="url(#miss)"' in svg

    def test_byte_identical_output(self):
        areas = oracle.lattice_areas(3, 3)
        labels = {a.area_id: ("HH" if i % 2 else "LL")
                  for i, a in enumerate(areas)}
        a, _ = render.render_map(areas, labels, kind="lisa")
        b, _ = render.render_map(areas, labels, kind="lisa")
        assert a == b


class TestRenderComap:
    def _panels(self, n):
        grid = surface.RasterGrid(origin=(0, 0), cell=0.05, nx=20, ny=20)
        panels = []
        for i in range(n):
            raster = grid.copy_empty()
            raster.values[5 + i, 5] = float(i)
            facet = surface.TemporalFacet(
                label=f"F{i}", dimensions=("month",),
                intervals=((0, 4),), member_count=i,
                member_index=np.arange(i))
            panels.append((facet, raster))
        return panels

    def test_four_panels_labelled(self):
        svg = render.render_comap(self._panels(4))
        for i in range(4):
            assert f"F{i}" in svg
        assert svg.count("<image") == 3  # panel 0 is empty

    def test_empty_facet_blank_tile(self):
        svg = render.render_comap(self._panels(2))
        assert "<rect" in svg
        assert "F0" in svg

    def test_shared_scale_anchored_to_global_max(self):
        panels = self._panels(3)
        svg = render.render_comap(panels)
        assert "2" in svg  # global max value printed
        a = render.render_comap(panels)
        assert a == svg
