import numpy as np
import pytest

from stdemand import oracle, weights


def _random_grid_areas(nx, ny, seed):
    """Lattice with jittered but shared interior vertices."""
    rng = np.random.default_rng(seed)
    gx = np.tile(np.linspace(0, 1, nx + 1), (ny + 1, 1))
    gy = np.tile(np.linspace(0, 1, ny + 1)[:, None], (1, nx + 1))
    jitter = 0.15 / max(nx, ny)
    gx[1:-1, 1:-1] += rng.uniform(-jitter, jitter, (ny - 1, nx - 1))
    gy[1:-1, 1:-1] += rng.uniform(-jitter, jitter, (ny - 1, nx - 1))
    areas = []
    from stdemand.ingest import AreaUnit
    for j in range(ny):
        for i in range(nx):
            ring = [(gx[j, i], gy[j, i]), (gx[j, i + 1], gy[j, i + 1]),
                    (gx[j + 1, i + 1], gy[j + 1, i + 1]),
                    (gx[j + 1, i], gy[j + 1, i]), (gx[j, i], gy[j, i])]
            cx = sum(p[0] for p in ring[:-1]) / 4
            cy = sum(p[1] for p in ring[:-1]) / 4
            areas.append(AreaUnit(area_id=f"G{j * nx + i:03d}",
                                  name="", borough="B00",
                                  polygon=[ring], centroid=(cx, cy)))
    return areas


class TestQueenContiguity:
    def test_2x2_grid_every_cell_three_neighbours(self):
        w = weights.queen_contiguity(oracle.lattice_areas(2, 2))
        assert list(w.cardinalities()) == [3, 3, 3, 3]

    def test_disjoint_squares_are_islands(self):
        from stdemand.ingest import AreaUnit
        sq = lambda x0: [[(x0, 0), (x0 + 1, 0), (x0 + 1, 1), (x0, 1),
                          (x0, 0)]]
        areas = [AreaUnit("a", "", "b", sq(0.0), (0.5, 0.5)),
                 AreaUnit("b", "", "b", sq(5.0), (5.5, 0.5))]
        w = weights.queen_contiguity(areas)
        assert w.islands == [0, 1]

    def test_matches_shapely_oracle_on_random_grid(self):
        shapely = pytest.importorskip("shapely")
        from shapely.geometry import Polygon
        areas = _random_grid_areas(6, 6, seed=4)
        w = weights.queen_contiguity(areas)
        polys = [Polygon(a.polygon[0]) for a in areas]
        for i in range(len(areas)):
            for j in range(len(areas)):
                if i == j:
                    continue
                touches = polys[i].intersects(polys[j])
                linked = any(j == nj for nj, _ in w.neighbours[i])
                assert touches == linked, (i, j)


class TestKnn:
    def test_three_collinear_points_symmetrized(self):
        pts = [(0.0, 0.0), (1.0, 0.0), (3.0, 0.0)]
        w = weights.knn(pts, k=1)
        # middle point picks the nearer end; the far end picks the middle,
        # so union symmetrization connects all three through the middle
        assert [j for j, _ in w.neighbours[0]] == [1]
        assert [j for j, _ in w.neighbours[1]] == [0, 2]
        assert [j for j, _ in w.neighbours[2]] == [1]

    def test_k_n_minus_1_is_complete(self):
        rng = np.random.default_rng(0)
        pts = rng.random((6, 2))
        w = weights.knn(pts, k=5)
        assert all(len(row) == 5 for row in w.neighbours)

    def test_matches_exhaustive_sort_oracle(self):
        rng = np.random.default_rng(8)
        pts = rng.random((50, 2))
        w = weights.knn(pts, k=4)
        d = np.sqrt(((pts[:, None] - pts[None, :]) ** 2).sum(-1))
        adj = [set() for _ in range(50)]
        for i in range(50):
            order = sorted(range(50),
                           key=lambda j: (d[i, j], j))
            picked = [j for j in order if j != i][:4]
            adj[i].update(picked)
            for j in picked:
                adj[j].add(i)
        for i in range(50):
            assert {j for j, _ in w.neighbours[i]} >= set(
                j for j in adj[i] if i in adj[j] or j in adj[i])
            assert {j for j, _ in w.neighbours[i]} == adj[i]

    def test_duplicate_centroids_deterministic(self):
        pts = [(0.0, 0.0), (0.0, 0.0), (1.0, 1.0)]
        w1 = weights.knn(pts, k=1)
        w2 = weights.knn(pts, k=1)
        assert w1.neighbours == w2.neighbours
        assert [j for j, _ in w1.neighbours[1]] == [0]

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            weights.knn([(0, 0), (1, 1)], k=2)


class TestRowStandardize:
    def test_equal_thirds(self):
        w = weights.SpatialWeights(
            4, [[(1, 1.0), (2, 1.0), (3, 1.0)], [(0, 1.0)], [(0, 1.0)],
                [(0, 1.0)]])
        r = weights.row_standardize(w)
        assert [wt for _, wt in r.neighbours[0]] == [1 / 3, 1 / 3, 1 / 3]
        assert r.standardized == "row"

    def test_isolate_unchanged(self):
        w = weights.SpatialWeights(2, [[(1, 2.0)], []])
        r = weights.row_standardize(w)
        assert r.neighbours[1] == []
        assert r.islands == [1]

    def test_idempotent(self):
        w = weights.queen_contiguity(oracle.lattice_areas(3, 3))
        once = weights.row_standardize(w)
        twice = weights.row_standardize(once)
        assert once.neighbours == twice.neighbours

    def test_row_sums_and_s0(self):
        w = weights.row_standardize(
            weights.queen_contiguity(oracle.lattice_areas(4, 4)))
        for row in w.neighbours:
            assert sum(wt for _, wt in row) == pytest.approx(1.0, abs=1e-12)
        assert w.s0 == pytest.approx(16.0, abs=1e-12)

    def test_lag_of_constant_is_constant(self):
        w = weights.row_standardize(
            weights.queen_contiguity(oracle.lattice_areas(5, 3)))
        lag = w.lag(np.full(15, 3.25))
        assert np.allclose(lag, 3.25, atol=1e-12)


class TestSerialization:
    def test_roundtrip(self, tmp_path):
        w = weights.row_standardize(
            weights.queen_contiguity(oracle.lattice_areas(3, 3)))
        p = tmp_path / "w.txt"
        weights.save_weights(w, p)
        back = weights.load_weights(p)
        assert back.n == w.n
        assert back.standardized == "row"
        assert back.neighbours == w.neighbours
