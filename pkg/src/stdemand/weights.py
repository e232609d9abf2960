"""Spatial weights construction and standardization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class SpatialWeights:
    n: int
    # neighbours[i] is a list of (j, w_ij); w_ii never stored
    neighbours: list
    standardized: str = "binary"  # "binary" | "row"
    ids: list | None = None

    @property
    def s0(self):
        return float(sum(w for row in self.neighbours for _, w in row))

    @property
    def islands(self):
        return [i for i, row in enumerate(self.neighbours) if not row]

    def lag(self, z):
        """Weighted sum of z over each unit's neighbours."""
        z = np.asarray(z, dtype=float)
        out = np.zeros(self.n)
        for i, row in enumerate(self.neighbours):
            for j, w in row:
                out[i] += w * z[j]
        return out

    def to_dense(self):
        W = np.zeros((self.n, self.n))
        for i, row in enumerate(self.neighbours):
            for j, w in row:
                W[i, j] = w
        return W

    def cardinalities(self):
        return np.array([len(row) for row in self.neighbours])


def _snap(coord, tol):
    return (round(coord[0] / tol), round(coord[1] / tol))


def queen_contiguity(areas, snap_tol=1e-9):
    """Binary queen weights: i~j iff polygons share any snapped boundary
    point (vertex) or edge. Islands are kept; inspect .islands afterwards."""
    n = len(areas)
    vertex_owners = {}
    edge_owners = {}
    for idx, area in enumerate(areas):
        for ring in area.polygon:
            keys = [_snap(p, snap_tol) for p in ring]
            for k in keys:
                vertex_owners.setdefault(k, set()).add(idx)
            for a, b in zip(keys[:-1], keys[1:]):
                edge = (a, b) if a <= b else (b, a)
                edge_owners.setdefault(edge, set()).add(idx)
    adj = [set() for _ in range(n)]
    for owners in list(vertex_owners.values()) + list(edge_owners.values()):
        for i in owners:
            for j in owners:
                if i != j:
                    adj[i].add(j)
    neighbours = [sorted((j, 1.0) for j in adj[i]) for i in range(n)]
    return SpatialWeights(
        n=n, neighbours=neighbours, standardized="binary",
        ids=[a.area_id for a in areas])


def knn(centroids, k, ids=None):
    """Symmetrized (union) k-nearest-neighbour binary weights.

    Distance ties break toward the smaller index, so duplicate centroids
    are handled deterministically.
    """
    pts = np.asarray(centroids, dtype=float)
    n = len(pts)
    if k >= n:
        raise ValueError(f"k={k} must be < n={n}")
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))
    adj = [set() for _ in range(n)]
    idx = np.arange(n)
    for i in range(n):
        order = np.lexsort((idx, d[i]))
        picked = [j for j in order if j != i][:k]
        adj[i].update(picked)
    for i in range(n):
        for j in list(adj[i]):
            adj[j].add(i)
    neighbours = [sorted((j, 1.0) for j in adj[i]) for i in range(n)]
    return SpatialWeights(n=n, neighbours=neighbours, standardized="binary",
                          ids=list(ids) if ids is not None else None)


def row_standardize(w):
    """Divide each row by its sum; isolates are left untouched. Idempotent."""
    neighbours = []
    for row in w.neighbours:
        total = sum(wt for _, wt in row)
        if total > 0:
            neighbours.append([(j, wt / total) for j, wt in row])
        else:
            neighbours.append(list(row))
    return SpatialWeights(n=w.n, neighbours=neighbours, standardized="row",
                          ids=w.ids)


def save_weights(w, path):
    """Plain-text sparse triplets with a `n standardized` header line."""
    with open(path, "w") as fh:
        fh.write(f"{w.n} {w.standardized}\n")
        for i, row in enumerate(w.neighbours):
            for j, wt in row:
                fh.write(f"{i} {j} {wt!r}\n")


def load_weights(path, ids=None):
    with open(path) as fh:
        n_str, standardized = fh.readline().split()
        n = int(n_str)
        neighbours = [[] for _ in range(n)]
        for line in fh:
            i, j, wt = line.split()
            neighbours[int(i)].append((int(j), float(wt)))
    return SpatialWeights(n=n, neighbours=neighbours,
                          standardized=standardized, ids=ids)
