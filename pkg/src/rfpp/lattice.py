"""Reference lattice models: standard FPP, Euclidean FPP, directed LPP and
the directed polymer free energy, with fluctuation-exponent estimation.

Bond weights are pure functions of (seed, replica, bond), drawn through the
package's counter-based generator, and are quantized to multiples of 2^-30:
path costs are then exact IEEE-754 sums, so subadditivity of passage times
and superadditivity of last-passage times hold exactly, and multiplying all
weights by a constant c with an exact binary representation (integers,
dyadics) multiplies every passage time by exactly c without changing any
witness path.

Exponent estimation follows the variance route: chi from the slope of
log Var a_n against log n (a_n the passage time to n e1 for FPP, to (n, n)
for directed LPP, whose up/right paths to n e1 would be degenerate), and xi
from the slope of log E d_n against log n, d_n the maximal deviation of the
unique witness from the axis.  The KPZ residual chi - (2 xi - 1) is reported
with the combined regression error.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _sp_dijkstra

from . import rng

_WEIGHT_GRID = 2.0 ** 30


class LatticeError(ValueError):
    pass


class TieDetectedError(LatticeError):
    """Two equal-cost witness paths; resample the replica."""


# ---------------------------------------------------------------------------
# weight laws
# ---------------------------------------------------------------------------

_LAW_KINDS = ("exponential", "geometric", "uniform", "bernoulli",
              "deterministic", "power_alpha")


@dataclass(frozen=True)
class WeightLaw:
    """Bond weight distribution.

    kind/params: exponential(rate) | geometric(p) on {0, 1, ...} |
    uniform(a, b) | bernoulli(p, lo, hi) (weight hi with probability p) |
    deterministic(c) | power_alpha(alpha) (Euclidean FPP edge cost
    |q - q'|^alpha; not samplable).  ``scale`` multiplies every quantized
    draw; exact binary scales preserve exactness.
    """
    kind: str
    params: tuple = ()
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in _LAW_KINDS:
            raise LatticeError(f"unknown weight law {self.kind!r}")
        p = self.params
        ok = {
            "exponential": lambda: len(p) == 1 and p[0] > 0,
            "geometric": lambda: len(p) == 1 and 0 < p[0] < 1,
            "uniform": lambda: len(p) == 2 and 0 <= p[0] < p[1],
            "bernoulli": lambda: len(p) == 3 and 0 <= p[0] <= 1
            and p[1] >= 0 and p[2] >= 0,
            "deterministic": lambda: len(p) == 1 and p[0] >= 0,
            "power_alpha": lambda: len(p) == 1 and p[0] > 1,
        }[self.kind]()
        if not ok:
            raise LatticeError(f"bad parameters {p} for law {self.kind}")
        if self.scale <= 0:
            raise LatticeError("scale must be > 0")

    @property
    def continuous(self):
        return self.kind in ("exponential", "uniform")

    @property
    def random(self):
        return self.kind not in ("deterministic", "power_alpha")

    def sample(self, seed, *words):
        """Deterministic quantized draws keyed by (seed, words)."""
        if self.kind == "power_alpha":
            raise LatticeError("power_alpha weights come from point pairs")
        if self.kind == "deterministic":
            shape = np.broadcast(*[np.asarray(w) for w in words]).shape if words else ()
            raw = np.full(shape, self.params[0], dtype=float)
        else:
            u = rng.uniform(seed, *words)
            if self.kind == "exponential":
                raw = -np.log(u) / self.params[0]
            elif self.kind == "geometric":
                raw = np.floor(np.log(u) / np.log1p(-self.params[0]))
            elif self.kind == "uniform":
                a, b = self.params
                raw = a + (b - a) * u
            else:  # bernoulli
                prob, lo, hi = self.params
                raw = np.where(u < prob, hi, lo)
        q = np.round(raw * _WEIGHT_GRID) / _WEIGHT_GRID
        return self.scale * q

    def survival(self, t):
        """P(weight/scale > t) for the unscaled draw."""
        t = np.asarray(t, dtype=float)
        if self.kind == "exponential":
            return np.where(t < 0, 1.0, np.exp(-self.params[0] * np.maximum(t, 0)))
        if self.kind == "geometric":
            p = self.params[0]
            return np.where(t < 0, 1.0, (1 - p) ** (np.floor(t) + 1))
        if self.kind == "uniform":
            a, b = self.params
            return np.clip((b - t) / (b - a), 0.0, 1.0)
        if self.kind == "bernoulli":
            prob, lo, hi = self.params
            lo, hi = min(lo, hi), max(hi, lo)
            plo = 1 - prob if self.params[1] <= self.params[2] else prob
            return np.where(t < lo, 1.0, np.where(t < hi, 1 - plo, 0.0))
        if self.kind == "deterministic":
            return np.where(t < self.params[0], 1.0, 0.0)
        raise LatticeError("no survival function for power_alpha")

    def min_moment(self, dimension):
        """E[min(t_1, ..., t_{2d})^{2d}] for 2d independent copies.

        Finite for every supported law; the value itself is reported so the
        moment condition can be inspected, not just asserted.
        """
        from scipy.integrate import quad
        m = 2 * dimension
        if self.kind == "power_alpha":
            raise LatticeError("moment condition does not apply to power_alpha")
        if self.kind == "deterministic":
            return (self.scale * self.params[0]) ** m
        if self.kind in ("geometric", "bernoulli"):
            tail = 0.0
            val = 0.0
            k = 0.0
            while True:
                s_before = float(self.survival(k - 0.5) ** m)
                s_after = float(self.survival(k + 0.5) ** m)
                val += (s_before - s_after) * (self.scale * k) ** m
                if s_after < 1e-14 or k > 1e6:
                    break
                k += 1.0
            return val + tail
        integrand = lambda t: m * t ** (m - 1) * float(self.survival(t) ** m)
        hi = (200.0 / self.params[0] if self.kind == "exponential"
              else self.params[1])
        val, _ = quad(integrand, 0.0, hi, limit=200)
        return val * self.scale ** m


def exponential_law(rate=1.0):
    return WeightLaw("exponential", (float(rate),))


def geometric_law(p=0.5):
    return WeightLaw("geometric", (float(p),))


@dataclass(frozen=True)
class LatticeConfig:
    """Dimension, principal size, weight law and master seed of a model."""
    dimension: int
    n: int
    law: WeightLaw
    seed: int

    def __post_init__(self):
        if self.dimension < 2:
            raise LatticeError("dimension must be >= 2")
        if self.n < 1:
            raise LatticeError("box size must be >= 1")


# ---------------------------------------------------------------------------
# standard FPP (Dijkstra on bond weights)
# ---------------------------------------------------------------------------

@dataclass
class FppResult:
    tau: float
    witness: np.ndarray          # (M, d) lattice points from source to target
    tie_detected: bool
    source: tuple
    target: tuple


def _box_axes(source, target, margin):
    lo = np.minimum(source, target) - margin
    hi = np.maximum(source, target) + margin
    return lo.astype(np.int64), hi.astype(np.int64)


def _bond_weights(config, replica, axis, coords):
    """Weights of the bonds coords -> coords + e_axis (absolute keying)."""
    words = [replica, axis] + [coords[..., i] for i in range(coords.shape[-1])]
    return config.law.sample(config.seed, *words)


def fpp_passage(config, target, replica=0, margin=None, source=None):
    """Passage time and witness between lattice points, by Dijkstra over
    i.i.d. bond weights drawn deterministically from (seed, replica, bond).

    The path is confined to the bounding box of source and target plus a
    margin (default max(8, n // 2)) on every side; transversal wandering of
    the witness beyond that margin would be astronomically unlikely for the
    sizes this laboratory targets.
    """
    d = config.dimension
    source = np.zeros(d, dtype=np.int64) if source is None else np.asarray(source, np.int64)
    target = np.asarray(target, dtype=np.int64)
    if target.shape != (d,):
        raise LatticeError("target dimension mismatch")
    if margin is None:
        margin = max(8, config.n // 2)
    lo, hi = _box_axes(source, target, margin)
    if np.any(np.abs(target - source) > config.n):
        raise LatticeError("target outside the configured box size")
    shape = tuple((hi - lo + 1).astype(int))
    n_nodes = int(np.prod(shape))

    grids = [np.arange(lo[i], hi[i] + 1) for i in range(d)]
    mesh = np.meshgrid(*grids, indexing="ij")
    coords = np.stack([m.ravel() for m in mesh], axis=1)

    def flat_index(z):
        idx = z[..., 0] - lo[0]
        for i in range(1, d):
            idx = idx * shape[i] + (z[..., i] - lo[i])
        return idx

    rows, cols, data = [], [], []
    for axis in range(d):
        ok = coords[:, axis] < hi[axis]
        src = coords[ok]
        w = _bond_weights(config, replica, axis, src)
        tgt = src.copy()
        tgt[:, axis] += 1
        si = flat_index(src)
        ti = flat_index(tgt)
        rows.extend([si, ti])
        cols.extend([ti, si])
        data.extend([w, w])
    mat = csr_matrix((np.concatenate(data),
                      (np.concatenate(rows), np.concatenate(cols))),
                     shape=(n_nodes, n_nodes))
    src_idx = int(flat_index(source[None, :])[0])
    tgt_idx = int(flat_index(target[None, :])[0])
    dist, pred = _sp_dijkstra(mat, directed=True, indices=src_idx,
                              return_predecessors=True)
    chain = [tgt_idx]
    while pred[chain[-1]] >= 0:
        chain.append(int(pred[chain[-1]]))
    chain.reverse()
    if chain[0] != src_idx:
        raise LatticeError("target unreachable (bounding box too small?)")

    def unflatten(idx):
        out = np.empty((len(idx), d), dtype=np.int64)
        rest = np.asarray(idx, dtype=np.int64)
        for i in range(d - 1, -1, -1):
            out[:, i] = rest % shape[i] + lo[i]
            rest = rest // shape[i]
        return out

    witness = unflatten(chain)
    tie = _witness_tie(mat, dist, chain)
    return FppResult(tau=float(dist[tgt_idx]), witness=witness,
                     tie_detected=tie, source=tuple(source), target=tuple(target))


def _witness_tie(mat, dist, chain):
    """True if some witness vertex is reached optimally from two parents."""
    indptr, indices, data = mat.indptr, mat.indices, mat.data
    for v in chain[1:]:
        optimal = 0
        for k in range(indptr[v], indptr[v + 1]):
            u = indices[k]
            if dist[u] + data[k] == dist[v]:
                optimal += 1
                if optimal > 1:
                    return True
    return False


@dataclass
class TimeConstantTable:
    sizes: tuple
    mu: np.ndarray
    stderr: np.ndarray
    cauchy_differences: np.ndarray      # |mu(n_i) - mu(n_{i+1})|

    @property
    def converging(self):
        d = self.cauchy_differences
        return bool(len(d) < 2 or d[-1] < d[0])


def time_constant(config, direction, sizes, replicas=20):
    """Empirical tau(0, n v)/n per size, with a Cauchy-difference trend."""
    if list(sizes) != sorted(sizes):
        raise LatticeError("sizes must be increasing")
    if replicas < 10:
        raise LatticeError("need at least 10 replicas")
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    mu = np.empty(len(sizes))
    se = np.empty(len(sizes))
    for i, n in enumerate(sizes):
        target = np.rint(n * direction).astype(np.int64)
        cfg = LatticeConfig(config.dimension, max(config.n, int(n)),
                            config.law, config.seed)
        vals = np.array([fpp_passage(cfg, target, replica=r).tau / n
                         for r in range(replicas)])
        mu[i] = vals.mean()
        se[i] = vals.std(ddof=1) / np.sqrt(replicas)
    return TimeConstantTable(sizes=tuple(sizes), mu=mu, stderr=se,
                             cauchy_differences=np.abs(np.diff(mu)))


def _witness_deviation(witness, n):
    """sup over witness vertices of the distance to {0, e1, ..., n e1}."""
    pts = witness.astype(float)
    j = np.clip(np.rint(pts[:, 0]), 0, n)
    delta = pts.copy()
    delta[:, 0] -= j
    return float(np.max(np.linalg.norm(delta, axis=1)))


def transversal_deviation(config, n, replica=0, margin=None):
    """Maximal Euclidean distance of the unique witness geodesic to the
    lattice segment {0, e1, ..., n e1}; ties abort with TieDetectedError."""
    if not config.law.continuous:
        raise LatticeError("transversal deviation needs a continuous law "
                           "(almost-sure unique witness)")
    res = fpp_passage(config, np.array([n] + [0] * (config.dimension - 1)),
                      replica=replica, margin=margin)
    if res.tie_detected:
        raise TieDetectedError(f"equal-cost witness at replica {replica}")
    return _witness_deviation(res.witness, n)


# ---------------------------------------------------------------------------
# directed last-passage percolation (bond weights, up/right paths)
# ---------------------------------------------------------------------------

def lpp_passage(config, target, origin=(0, 0), replica=0):
    """Last-passage time over directed up/right paths with bond weights.

    The recursion is T(z) = max over the two incoming bonds b of
    T(tail(b)) + w_b with T(origin) = 0: the paper's bond convention, with
    the incoming-bond weight playing the role of a site share.  Weights are
    keyed by absolute bond coordinates, so passage times started from z
    restrict the same environment (superadditivity is exact).
    """
    if config.dimension != 2:
        raise LatticeError("directed LPP is implemented on Z^2")
    ox, oy = (int(v) for v in origin)
    tx, ty = (int(v) for v in target)
    m, n = tx - ox, ty - oy
    if m < 0 or n < 0:
        raise LatticeError("target must lie up/right of the origin")
    # wR[i, j]: bond (ox+i, oy+j) -> (ox+i+1, oy+j), i < m
    # wU[i, j]: bond (ox+i, oy+j) -> (ox+i, oy+j+1), j < n
    ii = np.arange(ox, ox + m)
    jj = np.arange(oy, oy + n + 1)
    wR = (config.law.sample(config.seed, replica, 0,
                            ii[:, None], jj[None, :]) if m else
          np.zeros((0, n + 1)))
    ii = np.arange(ox, ox + m + 1)
    jj = np.arange(oy, oy + n)
    wU = (config.law.sample(config.seed, replica, 1,
                            ii[:, None], jj[None, :]) if n else
          np.zeros((m + 1, 0)))

    T = np.full((m + 1, n + 1), -np.inf)
    T[0, 0] = 0.0
    for k in range(1, m + n + 1):
        i_lo = max(0, k - n)
        i_hi = min(m, k)
        i = np.arange(i_lo, i_hi + 1)
        j = k - i
        best = np.full(len(i), -np.inf)
        from_left = i >= 1
        if np.any(from_left):
            il = i[from_left]
            jl = j[from_left]
            best[from_left] = T[il - 1, jl] + wR[il - 1, jl]
        from_below = j >= 1
        if np.any(from_below):
            ib = i[from_below]
            jb = j[from_below]
            best[from_below] = np.maximum(best[from_below],
                                          T[ib, jb - 1] + wU[ib, jb - 1])
        T[i, j] = best
    return float(T[m, n])


# ---------------------------------------------------------------------------
# exponent estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExponentEstimate:
    """Log-log regression estimate of a fluctuation exponent."""
    name: str                    # "chi" or "xi"
    estimate: float
    halfwidth: float             # 2 sigma of the regression slope, mapped
    stderr: float
    sizes: tuple
    statistics: tuple            # per-size Var a_n (chi) or mean d_n (xi)
    slope: float
    r_squared: float

    def __post_init__(self):
        if self.halfwidth <= 0:
            raise LatticeError("confidence half-width must be > 0")
        if len(self.sizes) < 4 or list(self.sizes) != sorted(self.sizes):
            raise LatticeError("need at least 4 increasing sizes")

    def as_dict(self):
        return {"exponent": self.name, "estimate": self.estimate,
                "halfwidth": self.halfwidth, "stderr": self.stderr,
                "sizes": list(self.sizes), "stats": list(self.statistics),
                "slope": self.slope, "r2": self.r_squared}


def _loglog_fit(sizes, stats):
    x = np.log(np.asarray(sizes, dtype=float))
    y = np.log(np.asarray(stats, dtype=float))
    n = len(x)
    xm = x - x.mean()
    slope = float(np.sum(xm * y) / np.sum(xm ** 2))
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    ss_res = float(np.sum(resid ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    dof = max(n - 2, 1)
    se = float(np.sqrt(ss_res / dof / np.sum(xm ** 2)))
    return slope, se, r2


def _passage_samples(model, config, n, replicas):
    if model == "lpp":
        return np.array([lpp_passage(config, (n, n), replica=r)
                         for r in range(replicas)])
    cfg = LatticeConfig(config.dimension, max(config.n, int(n)),
                        config.law, config.seed)
    target = np.array([n] + [0] * (config.dimension - 1))
    return np.array([fpp_passage(cfg, target, replica=r).tau
                     for r in range(replicas)])


def exponent_chi(model, config, sizes, replicas=100):
    """chi from the regression of log Var a_n on log n (chi = slope / 2)."""
    if model not in ("fpp", "lpp"):
        raise LatticeError("model must be fpp or lpp")
    if len(sizes) < 4:
        raise LatticeError("need at least 4 sizes")
    if replicas < 100:
        raise LatticeError("need at least 100 replicas")
    if not config.law.random:
        raise LatticeError("deterministic weights have no fluctuations")
    variances = []
    for n in sizes:
        samples = _passage_samples(model, config, n, replicas)
        v = float(np.var(samples, ddof=1))
        if v == 0:
            raise LatticeError("degenerate variance; weights deterministic?")
        variances.append(v)
    slope, se, r2 = _loglog_fit(sizes, variances)
    return ExponentEstimate(name="chi", estimate=slope / 2.0,
                            halfwidth=max(2.0 * se / 2.0, 1e-12),
                            stderr=se / 2.0, sizes=tuple(sizes),
                            statistics=tuple(variances), slope=slope,
                            r_squared=r2)


@dataclass(frozen=True)
class KpzReport:
    xi: ExponentEstimate
    chi: ExponentEstimate
    kpz_residual: float          # chi - (2 xi - 1)
    residual_tol: float          # 2 sigma combined from both regressions

    @property
    def kpz_consistent(self):
        return abs(self.kpz_residual) <= self.residual_tol


def exponent_xi(model, config, sizes, replicas=100):
    """xi from the regression of log E d_n on log n, with the KPZ residual.

    The same witness runs provide the passage times, so chi is estimated on
    the identical size grid and the residual chi - (2 xi - 1) carries a
    propagated two-sigma tolerance.
    """
    if model != "fpp":
        raise LatticeError("transversal deviations are defined for fpp")
    if not config.law.continuous:
        raise LatticeError("xi needs a continuous weight law")
    if len(sizes) < 4:
        raise LatticeError("need at least 4 sizes")
    means = []
    variances = []
    for n in sizes:
        cfg = LatticeConfig(config.dimension, max(config.n, int(n)),
                            config.law, config.seed)
        target = np.array([n] + [0] * (cfg.dimension - 1))
        taus = np.empty(replicas)
        devs = np.empty(replicas)
        for r in range(replicas):
            extra = 0
            while True:
                res = fpp_passage(cfg, target, replica=r + extra * 10 ** 6)
                if not res.tie_detected:
                    break
                extra += 1
            taus[r] = res.tau
            devs[r] = _witness_deviation(res.witness, n)
        means.append(float(np.mean(devs)))
        variances.append(float(np.var(taus, ddof=1)))
    xi_slope, xi_se, xi_r2 = _loglog_fit(sizes, means)
    xi = ExponentEstimate(name="xi", estimate=xi_slope,
                          halfwidth=max(2.0 * xi_se, 1e-12), stderr=xi_se,
                          sizes=tuple(sizes), statistics=tuple(means),
                          slope=xi_slope, r_squared=xi_r2)
    chi_slope, chi_se, chi_r2 = _loglog_fit(sizes, variances)
    chi = ExponentEstimate(name="chi", estimate=chi_slope / 2.0,
                           halfwidth=max(chi_se, 1e-12), stderr=chi_se / 2.0,
                           sizes=tuple(sizes), statistics=tuple(variances),
                           slope=chi_slope, r_squared=chi_r2)
    residual = chi.estimate - (2.0 * xi.estimate - 1.0)
    tol = 2.0 * float(np.sqrt(chi.stderr ** 2 + 4.0 * xi.stderr ** 2))
    return KpzReport(xi=xi, chi=chi, kpz_residual=float(residual),
                     residual_tol=tol)


# ---------------------------------------------------------------------------
# Euclidean FPP on a point sample
# ---------------------------------------------------------------------------

@dataclass
class EuclideanFppResult:
    time: float
    witness: np.ndarray          # indices into the point array
    k_used: int
    certified: bool


def euclidean_fpp(points, alpha, a, b):
    """Passage time with edge costs |q - q'|^alpha over a point sample.

    Dijkstra runs on the k-nearest-neighbor graph with k escalated until the
    best path costs no more than the cheapest conceivable pruned edge
    (min over nodes of the k-th neighbor distance, to the alpha): then no
    path through a pruned edge can improve on the answer, which certifies
    the k-NN result against the complete graph.
    """
    if alpha <= 1:
        raise LatticeError("alpha must exceed 1 (single edges win otherwise)")
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or len(points) < 2:
        raise LatticeError("need at least two points")
    from scipy.spatial import cKDTree
    ia = int(np.argmin(np.linalg.norm(points - np.asarray(a), axis=1)))
    ib = int(np.argmin(np.linalg.norm(points - np.asarray(b), axis=1)))
    if np.linalg.norm(points[ia] - np.asarray(a)) > 1e-9 \
            or np.linalg.norm(points[ib] - np.asarray(b)) > 1e-9:
        raise LatticeError("endpoints must belong to the point sample")
    n = len(points)
    tree = cKDTree(points)
    k = min(8, n - 1)
    while True:
        dists, nbrs = tree.query(points, k=k + 1)
        dists, nbrs = dists[:, 1:], nbrs[:, 1:]
        rows = np.repeat(np.arange(n), k)
        cols = nbrs.ravel()
        data = dists.ravel() ** alpha
        # deduplicate mutual neighbor pairs (csr_matrix sums duplicates)
        lo = np.minimum(rows, cols)
        hi = np.maximum(rows, cols)
        _, keep = np.unique(lo * n + hi, return_index=True)
        lo, hi, data_u = lo[keep], hi[keep], data[keep]
        mat = csr_matrix((np.concatenate([data_u, data_u]),
                          (np.concatenate([lo, hi]),
                           np.concatenate([hi, lo]))), shape=(n, n))
        dist, pred = _sp_dijkstra(mat, directed=True, indices=ia,
                                  return_predecessors=True)
        best = float(dist[ib])
        prune_floor = float(np.min(dists[:, -1]) ** alpha)
        certified = (k >= n - 1) or (best <= prune_floor)
        if certified or k >= n - 1:
            chain = [ib]
            while pred[chain[-1]] >= 0:
                chain.append(int(pred[chain[-1]]))
            chain.reverse()
            return EuclideanFppResult(time=best,
                                      witness=np.asarray(chain), k_used=k,
                                      certified=bool(certified))
        k = min(2 * k, n - 1)


# ---------------------------------------------------------------------------
# directed polymer free energy (d = 1)
# ---------------------------------------------------------------------------

@dataclass
class PolymerResult:
    n: int
    beta: float
    log_z: float
    free_energy: float           # -(1/beta) log Z_n


def polymer_free_energy(seed, n, beta, eta=None):
    """Free energy of the d = 1 directed polymer in a random environment.

    Z_n integrates e^{beta sum eta(j, w_j)} over simple random walks from
    the origin; the forward transfer recursion over reachable sites uses
    log-sum-exp throughout, so Z_n is exact up to floating error.  ``eta``
    may be a callable (j, x_array) -> values; by default it is an i.i.d.
    standard normal table keyed by (seed, j, x).
    """
    if beta <= 0:
        raise LatticeError("inverse temperature must be > 0")
    if n < 1:
        raise LatticeError("horizon must be >= 1")
    if eta is None:
        def eta(j, xs):
            return rng.normal(seed, j, xs)
    log_half = np.log(0.5)
    # sites reachable at time j: x in {-j, -j+2, ..., j}
    L = np.array([0.0])
    for j in range(1, n + 1):
        xs = np.arange(-j, j + 1, 2)
        left = np.full(len(xs), -np.inf)    # from x - 1 at time j - 1
        right = np.full(len(xs), -np.inf)   # from x + 1
        left[1:] = L
        right[:-1] = L
        L = np.logaddexp(left, right) + log_half + beta * np.asarray(eta(j, xs), dtype=float)
    from scipy.special import logsumexp
    log_z = float(logsumexp(L))
    return PolymerResult(n=n, beta=float(beta), log_z=log_z,
                         free_energy=-log_z / beta)
