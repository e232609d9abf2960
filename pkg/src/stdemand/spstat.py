"""Global and local bivariate Moran statistics with permutation inference.

The global statistic is
    I_b = (n / S0) * sum_ij w_ij (x_i - xbar)(y_j - ybar)
          / sqrt(sum_i (x_i - xbar)^2 * sum_j (y_j - ybar)^2)
and the local statistic for unit i is I_i = z_x(i) * sum_j w_ij z_y(j)
on z-standardized variables, so that sum_i I_i = S0 * I_b.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

QUADRANTS = ("HH", "LH", "LL", "HL")


class ZeroVarianceError(ValueError):
    """Moran denominator vanishes for a constant variable."""


@dataclass
class AttributePair:
    x: np.ndarray
    y: np.ndarray
    labels: list | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.shape != self.y.shape:
            raise ValueError("x and y must be aligned")


@dataclass
class GlobalMoranResult:
    i_b: float
    n_perm: int
    p_value: float  # one-sided, high
    seed: int
    perm_mean: float
    perm_std: float


@dataclass
class LocalMoranResult:
    label: str
    i_i: float
    p_i: float
    quadrant: str
    significant: bool
    isolate: bool = False


def _check_pair(pair, w):
    if len(pair.x) != w.n:
        raise ValueError(f"pair length {len(pair.x)} != weights n {w.n}")
    if np.var(pair.x) == 0:
        raise ZeroVarianceError("zero variance in x")
    if np.var(pair.y) == 0:
        raise ZeroVarianceError("zero variance in y")


def bivariate_moran(pair, w, n_perm=999, seed=0):
    """Global bivariate Moran's I with conditional permutation inference:
    y is randomly reassigned to locations while x stays fixed."""
    _check_pair(pair, w)
    n = w.n
    xd = pair.x - pair.x.mean()
    yd = pair.y - pair.y.mean()
    denom = np.sqrt((xd @ xd) * (yd @ yd))
    W = w.to_dense()
    s0 = W.sum()
    obs = (n / s0) * (xd @ (W @ yd)) / denom
    rng = np.random.default_rng(seed)
    stats = np.empty(n_perm)
    for k in range(n_perm):
        yp = yd[rng.permutation(n)]
        stats[k] = (n / s0) * (xd @ (W @ yp)) / denom
    p = (1.0 + np.count_nonzero(stats >= obs)) / (1.0 + n_perm)
    return GlobalMoranResult(
        i_b=float(obs), n_perm=n_perm, p_value=float(p), seed=seed,
        perm_mean=float(stats.mean()), perm_std=float(stats.std()))


def _zscore(v):
    return (v - v.mean()) / v.std()


def bivariate_lisa(pair, w, n_perm=999, seed=0, alpha=0.05):
    """Local bivariate Moran per unit with conditional permutation p-values.

    For each unit i, y values at the other locations are shuffled and
    i's neighbours drawn from the shuffle; the p-value is one-sided in
    the direction of the observed local statistic, with +1 correction.
    Isolates are returned marked not-applicable.
    """
    _check_pair(pair, w)
    n = w.n
    zx = _zscore(pair.x)
    zy = _zscore(pair.y)
    lag = w.lag(zy)
    i_local = zx * lag
    labels = pair.labels or [str(i) for i in range(n)]
    rng = np.random.default_rng(seed)
    results = []
    idx = np.arange(n)
    max_k = max((len(row) for row in w.neighbours), default=0)
    # one shuffle of the n-1 other locations per permutation, reused for
    # every unit; only the first k_i entries feed unit i's neighbours
    perm_idx = np.argsort(rng.random((n_perm, n - 1)), axis=1)[:, :max_k]
    for i in range(n):
        row = w.neighbours[i]
        if not row:
            results.append(LocalMoranResult(
                label=labels[i], i_i=float("nan"), p_i=float("nan"),
                quadrant="NA", significant=False, isolate=True))
            continue
        others = zy[idx != i]
        wts = np.array([wt for _, wt in row])
        perm_lag = others[perm_idx[:, :len(row)]] @ wts
        perm_stats = zx[i] * perm_lag
        if i_local[i] >= 0:
            extreme = np.count_nonzero(perm_stats >= i_local[i])
        else:
            extreme = np.count_nonzero(perm_stats <= i_local[i])
        p = (1.0 + extreme) / (1.0 + n_perm)
        if zx[i] > 0:
            quad = "HH" if lag[i] > 0 else "HL"
        else:
            quad = "LH" if lag[i] > 0 else "LL"
        results.append(LocalMoranResult(
            label=labels[i], i_i=float(i_local[i]), p_i=float(p),
            quadrant=quad, significant=bool(p <= alpha)))
    return results


def benjamini_hochberg(p_values):
    """BH-adjusted p-values (monotone, clipped at 1)."""
    p = np.asarray(p_values, dtype=float)
    m = len(p)
    order = np.argsort(p, kind="stable")
    adj = np.empty(m)
    running = 1.0
    for rank in range(m - 1, -1, -1):
        i = order[rank]
        running = min(running, p[i] * m / (rank + 1))
        adj[i] = running
    return adj


def classify_clusters(results, alpha=0.05, fdr=False):
    """Map label -> cluster class, with non-significant units as NS."""
    labels = [r.label for r in results]
    usable = [r for r in results if not r.isolate]
    pvals = np.array([r.p_i for r in usable])
    if fdr and len(usable):
        pvals = benjamini_hochberg(pvals)
    out = {}
    adj = dict(zip((r.label for r in usable), pvals))
    for r in results:
        if r.isolate:
            out[r.label] = "NA"
        elif adj[r.label] <= alpha:
            out[r.label] = r.quadrant
        else:
            out[r.label] = "NS"
    assert set(out) == set(labels)
    return out
