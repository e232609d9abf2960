import numpy as np
import pytest
from scipy import stats as sstats

from stdemand import oracle, weights
from stdemand.tsa import ArimaSpec


class TestNaiveMoran:
    def test_checkerboard(self):
        nb = [[(1, 0.5), (2, 0.5)], [(0, 0.5), (3, 0.5)],
              [(0, 0.5), (3, 0.5)], [(1, 0.5), (2, 0.5)]]
        w = weights.SpatialWeights(4, nb, standardized="row")
        x = np.array([1.0, 0.0, 0.0, 1.0])
        assert oracle.naive_moran(x, x, w) == pytest.approx(-1.0, abs=1e-12)

    def test_positive_cluster_surface(self):
        areas = oracle.lattice_areas(6, 6)
        w = weights.row_standardize(weights.queen_contiguity(areas))
        x = np.array([a.centroid[0] for a in areas])
        assert oracle.naive_moran(x, x, w) > 0

    def test_zero_variance(self):
        w = weights.SpatialWeights(3, [[(1, 1.0)], [(0, 1.0)], []])
        with pytest.raises(ValueError):
            oracle.naive_moran(np.ones(3), np.arange(3.0), w)


class TestSimulateSarima:
    def test_phi_zero_is_white_noise(self):
        y = oracle.simulate_sarima(ArimaSpec(1, 0, 0), ar=[0.0], n=2000,
                                   seed=1)
        r1 = np.corrcoef(y[:-1], y[1:])[0, 1]
        assert abs(r1) < 3.0 / np.sqrt(2000)

    def test_ar1_autocorrelation(self):
        y = oracle.simulate_sarima(ArimaSpec(1, 0, 0), ar=[0.8], n=5000,
                                   seed=2)
        r1 = np.corrcoef(y[:-1], y[1:])[0, 1]
        assert r1 == pytest.approx(0.8, abs=0.05)

    def test_identical_seed_identical_series(self):
        a = oracle.simulate_sarima(ArimaSpec(1, 0, 1), ar=[0.5], ma=[0.3],
                                   n=100, seed=9)
        b = oracle.simulate_sarima(ArimaSpec(1, 0, 1), ar=[0.5], ma=[0.3],
                                   n=100, seed=9)
        assert np.array_equal(a, b)

    def test_unstable_ar_rejected(self):
        with pytest.raises(ValueError, match="unstable"):
            oracle.simulate_sarima(ArimaSpec(1, 0, 0), ar=[1.2], n=50)

    def test_exog_beta_passthrough(self):
        x = np.linspace(0, 1, 500)
        y = oracle.simulate_sarima(ArimaSpec(0, 0, 0), beta=[10.0],
                                   exog=x[:, None], n=500, sigma=0.01,
                                   seed=3)
        slope = np.polyfit(x, y, 1)[0]
        assert slope == pytest.approx(10.0, abs=0.1)


class TestSimulatePoints:
    def test_zero_amplitude_uniform_space(self):
        scenario = oracle.SyntheticScenario(
            seed=5, base_rate=300.0, seasonal_amplitude=0.0, horizon=20)
        recs = oracle.simulate_points(scenario)
        xs = np.array([r.lon for r in recs])
        counts, _ = np.histogram(xs, bins=10, range=(0, 1))
        chi2 = ((counts - counts.mean()) ** 2 / counts.mean()).sum()
        p = sstats.chi2.sf(chi2, df=9)
        assert p > 0.001

    def test_doubled_rate_doubles_count(self):
        s1 = oracle.SyntheticScenario(seed=6, base_rate=200.0,
                                      seasonal_amplitude=0.0, horizon=30)
        s2 = oracle.SyntheticScenario(seed=6, base_rate=400.0,
                                      seasonal_amplitude=0.0, horizon=30)
        n1 = len(oracle.simulate_points(s1))
        n2 = len(oracle.simulate_points(s2))
        assert abs(n2 - 2 * n1) <= 3 * np.sqrt(n2)

    def test_empty_horizon(self):
        scenario = oracle.SyntheticScenario(seed=7, horizon=0)
        assert oracle.simulate_points(scenario) == []

    def test_hotspot_concentration(self):
        scenario = oracle.SyntheticScenario(
            seed=8, base_rate=200.0, seasonal_amplitude=0.0, horizon=20,
            hotspots=(oracle.Hotspot(0.25, 0.25, 0.05, 30.0),))
        recs = oracle.simulate_points(scenario)
        pts = np.array([(r.lon, r.lat) for r in recs])
        near = ((pts - 0.25) ** 2).sum(axis=1) < 0.15 ** 2
        # uniform baseline would put ~7% of points in this disc
        assert near.mean() > 0.25

    def test_deterministic(self):
        scenario = oracle.SyntheticScenario(seed=9, base_rate=50.0,
                                            horizon=10)
        a = oracle.simulate_points(scenario)
        b = oracle.simulate_points(scenario)
        assert [(r.id, r.timestamp, r.lon, r.lat, r.category)
                for r in a] == \
            [(r.id, r.timestamp, r.lon, r.lat, r.category) for r in b]


class TestPlantedGwrSurface:
    def test_constant_zero_noise_exact(self):
        y, X, loc = oracle.planted_gwr_surface(
            50, lambda u, v: (2.0, 3.0), noise=0.0, seed=1)
        assert np.allclose(y, 2.0 + 3.0 * X[:, 0], atol=1e-12)

    def test_identical_seed(self):
        a = oracle.planted_gwr_surface(30, lambda u, v: (0.0, u),
                                       noise=0.1, seed=2)
        b = oracle.planted_gwr_surface(30, lambda u, v: (0.0, u),
                                       noise=0.1, seed=2)
        for p, q in zip(a, b):
            assert np.array_equal(p, q)


class TestScenarioRoundtrip:
    def test_json_roundtrip(self):
        scenario = oracle.SyntheticScenario(
            seed=3, hotspots=(oracle.Hotspot(0.5, 0.5, 0.1, 5.0),))
        back = oracle.SyntheticScenario.from_json(scenario.to_json())
        assert back == scenario

    def test_dump_dataset_files(self, tmp_path):
        scenario = oracle.SyntheticScenario(seed=4, base_rate=30.0,
                                            horizon=8)
        paths = oracle.dump_dataset(scenario, tmp_path)
        for key in ("incidents", "areas", "weather", "covariates",
                    "scenario"):
            assert (tmp_path / paths[key].split("/")[-1]).exists()
