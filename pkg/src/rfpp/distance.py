"""Global Riemannian distance on a discretized passage graph.

The continuum distance d(x, y) = inf over curves of the Riemannian length is
approximated from above by Dijkstra on a grid graph with a wide stencil.
Edge weights are the Riemannian lengths of straight segments between nodes,
by 3-point Simpson quadrature; the remaining error is dominated by the
stencil's angular resolution, whose worst-case overestimation factor is
computed exactly from the stencil geometry (stencil_factor).

Weights are quantized to a dyadic grid (2^k / 2^24 for a power-of-two scale
k detected from the field), so every path cost is an exact IEEE-754 sum:
subadditivity and query symmetry hold exactly, not just to rounding, and
doubling the metric doubles every distance exactly while leaving witness
paths unchanged.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _sp_dijkstra

from .fields import RegionError

_QUANT_BITS = 24


class GraphError(ValueError):
    pass


# ---------------------------------------------------------------------------
# stencils
# ---------------------------------------------------------------------------

def _coprime_ring(radius, dim):
    """Integer vectors with Chebyshev norm == radius and coprime entries."""
    axes = [np.arange(-radius, radius + 1)] * dim
    mesh = np.meshgrid(*axes, indexing="ij")
    vecs = np.stack([m.ravel() for m in mesh], axis=1)
    cheb = np.max(np.abs(vecs), axis=1)
    vecs = vecs[cheb == radius]
    g = np.gcd.reduce(np.abs(vecs), axis=1)
    return vecs[g == 1]


def stencil_offsets(stencil, dim=2):
    """Directions of the {8, 16, 32} stencil (d = 2) or its d = 3 analogue
    (coprime vectors of Chebyshev radius up to 1, 2 or 3)."""
    rings = {8: 1, 16: 2, 32: 3}
    if stencil not in rings:
        raise GraphError(f"stencil must be one of {sorted(rings)}")
    vecs = [_coprime_ring(r, dim) for r in range(1, rings[stencil] + 1)]
    return np.concatenate(vecs, axis=0)


def stencil_factor(stencil, dim=2):
    """Worst-case ratio of stencil-path length to straight-line distance.

    In d = 2 this is exact: within each angular sector between adjacent
    stencil directions a, b the cheapest representation of a unit vector u
    costs w . u for w = (|a|, |b|) M^{-1} (M = [a b]), a linear functional,
    so the sector maximum is |w| when w points into the sector and 1 at the
    sector edges.  In d = 3 the factor is a sampled bound over directions.
    """
    offs = stencil_offsets(stencil, dim).astype(float)
    if dim == 2:
        angles = np.arctan2(offs[:, 1], offs[:, 0])
        order = np.argsort(angles)
        offs = offs[order]
        angles = angles[order]
        worst = 1.0
        n = len(offs)
        for i in range(n):
            a = offs[i]
            b = offs[(i + 1) % n]
            M = np.column_stack([a, b])
            det = np.linalg.det(M)
            if abs(det) < 1e-12:
                continue
            w = np.array([np.linalg.norm(a), np.linalg.norm(b)]) @ np.linalg.inv(M)
            th = np.arctan2(w[1], w[0])
            lo = angles[i]
            hi = angles[(i + 1) % n] if i + 1 < n else angles[0] + 2 * np.pi
            if i + 1 == n:
                th = th if th >= lo else th + 2 * np.pi
            if lo <= th <= hi:
                worst = max(worst, float(np.linalg.norm(w)))
        return worst
    # d = 3: sampled gauge of the stencil's unit-cost ball
    rng = np.random.default_rng(0)
    dirs = rng.normal(size=(2000, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    unit = offs / np.linalg.norm(offs, axis=1, keepdims=True)
    worst = 1.0
    from scipy.optimize import linprog
    for u in dirs[:200]:
        res = linprog(np.linalg.norm(offs, axis=1),
                      A_eq=offs.T, b_eq=u,
                      bounds=[(0, None)] * len(offs), method="highs")
        if res.success:
            worst = max(worst, float(res.fun))
    return worst


# ---------------------------------------------------------------------------
# passage graph
# ---------------------------------------------------------------------------

@dataclass
class BallRaster:
    """Nodes with graph distance at most t from the source."""
    t: float
    inside: np.ndarray          # (M, d) node coordinates
    boundary: np.ndarray        # subset of inside adjacent to the outside
    distances: np.ndarray       # (M,) graph distances of inside nodes
    clipped: bool = False       # ball reached the region edge

    def to_csv(self, path):
        d = self.inside.shape[1]
        cols = [f"x{i + 1}" for i in range(d)] + ["distance", "boundary"]
        bset = {tuple(row) for row in np.round(self.boundary / 1e-12).astype(np.int64)} \
            if len(self.boundary) else set()
        with open(path, "w") as fh:
            fh.write(f"# ball radius: {self.t!r}\n")
            fh.write(f"# clipped: {self.clipped}\n")
            fh.write(",".join(cols) + "\n")
            for row, dist in zip(self.inside, self.distances):
                key = tuple(np.round(row / 1e-12).astype(np.int64))
                fh.write(",".join(repr(v) for v in row)
                         + f",{dist!r},{int(key in bset)}\n")


@dataclass
class CubeTrace:
    """Euclidean length a path spends in each unit lattice cube."""
    per_cube_length: dict
    gamma_set: set              # cubes with in-cube length >= 1/4
    hat_gamma_set: set          # gamma_set plus *-adjacent neighbors


class PassageGraph:
    """Grid graph whose edge weights approximate Riemannian segment lengths.

    Nodes are lattice points h * z inside the region; edges follow the given
    stencil.  Weights are computed on demand (the full matrix on the first
    distance query, single edges via edge_weight) and cached; both paths
    share the same quadrature and quantization, so they agree exactly.
    """

    def __init__(self, field, region, h, stencil=16):
        if h <= 0:
            raise GraphError("grid spacing must be > 0")
        self.field = field
        self.region = region
        self.h = float(h)
        self.dim = region.dim
        self.stencil = int(stencil)
        corners = np.array([region.lo, region.hi])
        if not np.all(field.contains(corners)):
            raise GraphError("graph region exceeds the field's valid region")
        self.z_lo = np.ceil(np.asarray(region.lo) / self.h - 1e-9).astype(np.int64)
        self.z_hi = np.floor(np.asarray(region.hi) / self.h + 1e-9).astype(np.int64)
        self.shape = tuple((self.z_hi - self.z_lo + 1).astype(int))
        self.n_nodes = int(np.prod(self.shape))
        self.offsets = stencil_offsets(self.stencil, self.dim)
        self.factor = stencil_factor(self.stencil, self.dim)
        self._unit = self._weight_unit()
        self._matrix = None
        self._edge_cache = {}
        self._sssp_cache = {}

    # -- nodes ---------------------------------------------------------------

    def node_position(self, z):
        return np.asarray(z, dtype=float) * self.h

    def node_index(self, z):
        z = np.asarray(z, dtype=np.int64)
        rel = z - self.z_lo
        if np.any(rel < 0) or np.any(rel >= np.asarray(self.shape)):
            raise GraphError(f"lattice point {z} outside graph")
        idx = rel[..., 0]
        for i in range(1, self.dim):
            idx = idx * self.shape[i] + rel[..., i]
        return idx

    def index_node(self, idx):
        rel = np.empty((np.size(idx), self.dim), dtype=np.int64)
        rest = np.asarray(idx, dtype=np.int64).ravel()
        for i in range(self.dim - 1, -1, -1):
            rel[:, i] = rest % self.shape[i]
            rest = rest // self.shape[i]
        return rel + self.z_lo

    def snap(self, point):
        """Nearest node (lattice coordinates) to a point, clipped to the
        grid (points far outside snap to the nearest edge node)."""
        p = np.asarray(point, dtype=float) / self.h
        p = np.clip(p, self.z_lo.astype(float), self.z_hi.astype(float))
        return np.round(p).astype(np.int64)

    def all_node_positions(self):
        grids = [np.arange(self.z_lo[i], self.z_hi[i] + 1) for i in range(self.dim)]
        mesh = np.meshgrid(*grids, indexing="ij")
        z = np.stack([m.ravel() for m in mesh], axis=1)
        return z * self.h

    # -- weights ---------------------------------------------------------------

    def _weight_unit(self):
        """Dyadic quantization unit, equivariant under power-of-two scaling
        of the metric."""
        pts = self.all_node_positions()
        probe = pts[:: max(1, len(pts) // 512)]
        g = self.field.values_batch(probe)
        smax = float(np.sqrt(np.max(np.linalg.eigvalsh(g))))
        lmax = float(np.max(np.linalg.norm(self.offsets, axis=1))) * self.h
        scale = 2.0 ** np.floor(np.log2(smax * lmax))
        return scale * 2.0 ** (-_QUANT_BITS)

    def _segment_weights(self, A, Bp):
        """Simpson quadrature of Riemannian length along straight segments."""
        diff = Bp - A
        ell = np.linalg.norm(diff, axis=1)
        e = diff / ell[:, None]
        mid = 0.5 * (A + Bp)
        if getattr(self.field, "mode", None) == "conformal" and hasattr(
                self.field, "conformal_factor_batch"):
            sa = np.sqrt(self.field.conformal_factor_batch(A))
            sm = np.sqrt(self.field.conformal_factor_batch(mid))
            sb = np.sqrt(self.field.conformal_factor_batch(Bp))
        else:
            ga = self.field.values_batch(A)
            gm = self.field.values_batch(mid)
            gb = self.field.values_batch(Bp)
            sa = np.sqrt(np.einsum("bi,bij,bj->b", e, ga, e))
            sm = np.sqrt(np.einsum("bi,bij,bj->b", e, gm, e))
            sb = np.sqrt(np.einsum("bi,bij,bj->b", e, gb, e))
        raw = (ell / 6.0) * (sa + 4.0 * sm + sb)
        return self._quantize(raw)

    def _quantize(self, raw):
        q = np.round(raw / self._unit) * self._unit
        if np.any(q <= 0):
            raise GraphError("non-positive edge weight after quantization")
        return q

    def edge_weight(self, u, v):
        """Weight of the edge between lattice points u and v (cached)."""
        u = tuple(int(c) for c in np.asarray(u))
        v = tuple(int(c) for c in np.asarray(v))
        if u > v:
            u, v = v, u
        key = (u, v)
        if key not in self._edge_cache:
            off = np.asarray(v) - np.asarray(u)
            if not any(np.array_equal(off, o) for o in self.offsets):
                raise GraphError(f"{u}->{v} is not a stencil edge")
            w = self._segment_weights(self.node_position(u)[None, :],
                                      self.node_position(v)[None, :])
            self._edge_cache[key] = float(w[0])
        return self._edge_cache[key]

    def _ensure_matrix(self):
        if self._matrix is not None:
            return
        # conformal fields: endpoint speeds are direction-independent, so
        # precompute them once per node
        rows, cols, data = [], [], []
        nodes = self.all_node_positions()
        grids = [np.arange(self.shape[i]) for i in range(self.dim)]
        mesh = np.meshgrid(*grids, indexing="ij")
        rel = np.stack([m.ravel() for m in mesh], axis=1)
        canonical = [o for o in self.offsets if tuple(o) > tuple(-o)]
        for off in canonical:
            ok = np.ones(len(rel), dtype=bool)
            for i in range(self.dim):
                tgt = rel[:, i] + off[i]
                ok &= (tgt >= 0) & (tgt < self.shape[i])
            src_rel = rel[ok]
            tgt_rel = src_rel + off
            src_idx = src_rel[:, 0]
            tgt_idx = tgt_rel[:, 0]
            for i in range(1, self.dim):
                src_idx = src_idx * self.shape[i] + src_rel[:, i]
                tgt_idx = tgt_idx * self.shape[i] + tgt_rel[:, i]
            A = nodes[src_idx]
            Bp = A + off * self.h
            w = self._segment_weights(A, Bp)
            rows.append(src_idx)
            cols.append(tgt_idx)
            data.append(w)
            rows.append(tgt_idx)
            cols.append(src_idx)
            data.append(w)
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        data = np.concatenate(data)
        self._matrix = csr_matrix((data, (rows, cols)),
                                  shape=(self.n_nodes, self.n_nodes))

    # -- queries ---------------------------------------------------------------

    def sssp(self, source_z, limit=np.inf):
        """Single-source distances and predecessors from a lattice point."""
        src = int(self.node_index(np.asarray(source_z)))
        key = (src, float(limit))
        if key not in self._sssp_cache:
            self._ensure_matrix()
            dist, pred = _sp_dijkstra(self._matrix, directed=True,
                                      indices=src, return_predecessors=True,
                                      limit=limit)
            self._sssp_cache[key] = (dist, pred)
        return self._sssp_cache[key]


def build_graph(field, region, h, stencil=16):
    """Grid passage graph over a region of a field (weights lazily built)."""
    return PassageGraph(field, region, h, stencil=stencil)


def distance(graph, a, b):
    """Graph distance and witness path between two points (snapped to nodes).

    Returns (d_hat, witness) where witness is the (M, d) array of node
    coordinates from a to b.
    """
    za = graph.snap(a)
    zb = graph.snap(b)
    dist, pred = graph.sssp(za)
    tgt = int(graph.node_index(zb))
    d_hat = float(dist[tgt])
    if not np.isfinite(d_hat):
        raise GraphError("target unreachable (should not happen on a full grid)")
    chain = [tgt]
    while pred[chain[-1]] >= 0:
        chain.append(int(pred[chain[-1]]))
    chain.reverse()
    witness = graph.index_node(np.asarray(chain)) * graph.h
    return d_hat, witness


def ball(graph, t):
    """Raster of the graph metric ball of radius t around the origin node."""
    if t < 0:
        raise GraphError("ball radius must be >= 0")
    origin = np.zeros(graph.dim, dtype=np.int64)
    dist, _ = graph.sssp(origin, limit=t if t > 0 else np.inf)
    if t == 0:
        inside_idx = np.array([int(graph.node_index(origin))])
    else:
        inside_idx = np.where(dist <= t)[0]
    inside_z = graph.index_node(inside_idx)
    inside_set = set(map(tuple, inside_z))
    boundary = []
    clipped = False
    zlo, zhi = graph.z_lo, graph.z_hi
    for z in inside_z:
        on_edge = np.any(z == zlo) or np.any(z == zhi)
        if on_edge:
            clipped = True
        is_boundary = on_edge
        if not is_boundary:
            for off in graph.offsets:
                if tuple(z + off) not in inside_set:
                    is_boundary = True
                    break
        if is_boundary:
            boundary.append(z)
    return BallRaster(t=float(t), inside=inside_z * graph.h,
                      boundary=np.asarray(boundary, dtype=float) * graph.h
                      if boundary else np.empty((0, graph.dim)),
                      distances=dist[inside_idx], clipped=clipped)


@dataclass
class ShapeEstimate:
    directions: np.ndarray      # (k, d) unit vectors
    mu: np.ndarray              # per-direction mean of d_hat(0, t v) / |x|
    stderr: np.ndarray
    anisotropy_ratio: float
    t: float
    replicas: int

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write(f"# radius: {self.t!r}\n")
            fh.write(f"# replicas: {self.replicas}\n")
            fh.write(f"# anisotropy_ratio: {self.anisotropy_ratio!r}\n")
            fh.write("angle,mu,stderr\n")
            for v, m, s in zip(self.directions, self.mu, self.stderr):
                fh.write(f"{np.arctan2(v[1], v[0])!r},{m!r},{s!r}\n")


def shape_estimate(field_factory, t, directions=16, replicas=8, h=0.3,
                   stencil=32, margin=2.0):
    """Per-direction estimates of d_hat(0, t v) / t over replica fields.

    field_factory(replica_index) must return a field containing the cube of
    half-width t + margin.  Reports the per-direction mean, standard error
    and the max/min anisotropy ratio.
    """
    if directions < 8:
        raise GraphError("need at least 8 directions")
    if replicas < 1:
        raise GraphError("need at least one replica")
    from .fields import Box
    angles = np.arange(directions) * (2 * np.pi / directions)
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    samples = np.empty((replicas, directions))
    for r in range(replicas):
        field = field_factory(r)
        region = Box.cube(t + margin, 2)
        corners = np.array([region.lo, region.hi])
        if not np.all(field.contains(corners)):
            raise GraphError("field region too small for the requested radius")
        graph = build_graph(field, region, h, stencil=stencil)
        origin = np.zeros(2, dtype=np.int64)
        dist, _ = graph.sssp(origin)
        for k in range(directions):
            z = graph.snap(t * dirs[k])
            x = graph.node_position(z)
            samples[r, k] = dist[int(graph.node_index(z))] / np.linalg.norm(x)
    mu = samples.mean(axis=0)
    se = (samples.std(axis=0, ddof=1) / np.sqrt(replicas)
          if replicas > 1 else np.zeros(directions))
    return ShapeEstimate(directions=dirs, mu=mu, stderr=se,
                         anisotropy_ratio=float(mu.max() / mu.min()),
                         t=float(t), replicas=int(replicas))


@dataclass
class MinimalityVerdict:
    checkpoint_times: np.ndarray
    verdicts: np.ndarray            # bool per checkpoint
    first_failure_time: float       # nan if always minimizing
    snapped: bool                   # any checkpoint off-grid and snapped
    tol: float

    @property
    def minimizing(self):
        return bool(np.all(self.verdicts))


def is_minimizing(field, path, graph, tol=None, checkpoint_every=None):
    """Compare path-segment Riemannian lengths against graph distances.

    A checkpoint passes while R(segment) <= d_hat * (1 + tol) + allowance,
    where the allowance covers snapping a checkpoint to its nearest node.
    tol defaults to (stencil factor - 1) + 0.01.
    """
    from .geometry import cumulative_lengths
    if tol is None:
        tol = graph.factor - 1.0 + 0.01
    if checkpoint_every is None:
        checkpoint_every = max(1, int(round(0.5 * graph.h / max(
            np.mean(np.diff(path.times)), 1e-12))))
    idx = np.arange(checkpoint_every, len(path.times), checkpoint_every)
    if len(idx) == 0:
        raise GraphError("path too short for any checkpoint")
    cum = cumulative_lengths(path, field, "riemannian")
    start_z = graph.snap(path.positions[0])
    dist, _ = graph.sssp(start_z)

    times = path.times[idx]
    verdicts = np.ones(len(idx), dtype=bool)
    snapped_any = bool(np.linalg.norm(path.positions[0]
                                      - graph.node_position(start_z)) > 1e-12)
    first_fail = np.nan
    for j, i in enumerate(idx):
        x = path.positions[i]
        z = graph.snap(x)
        pos = graph.node_position(z)
        offset = np.linalg.norm(pos - x)
        if offset > 1e-12:
            snapped_any = True
        g = field.values_batch(x[None, :])[0]
        lam = float(np.max(np.linalg.eigvalsh(g)))
        allowance = (offset + 0.5 * graph.h) * np.sqrt(lam)
        d_hat = float(dist[int(graph.node_index(z))])
        ok = cum[i] <= d_hat * (1.0 + tol) + allowance
        verdicts[j] = ok
        if not ok and np.isnan(first_fail):
            first_fail = float(path.times[i])
    return MinimalityVerdict(checkpoint_times=times, verdicts=verdicts,
                             first_failure_time=first_fail,
                             snapped=snapped_any, tol=float(tol))


def cube_trace(path):
    """Per-unit-cube Euclidean lengths of a path by exact segment clipping.

    Cubes are C_z = [z - 1/2, z + 1/2)^d.  gamma_set collects cubes holding
    at least Euclidean length 1/4; hat_gamma_set adds *-adjacent neighbors.
    """
    if path.parametrization != "euclidean":
        raise GraphError("cube_trace needs euclidean parametrization")
    pos = path.positions
    d = pos.shape[1]
    lengths_map = {}
    for p0, p1 in zip(pos[:-1], pos[1:]):
        seg = p1 - p0
        seg_len = float(np.linalg.norm(seg))
        if seg_len == 0:
            continue
        # parameter values where any coordinate crosses a half-integer plane
        ts = [0.0, 1.0]
        for i in range(d):
            lo, hi = (p0[i], p1[i]) if p0[i] <= p1[i] else (p1[i], p0[i])
            k0 = np.ceil(lo - 0.5)
            planes = np.arange(k0 + 0.5, hi, 1.0)
            for plane in planes:
                if seg[i] != 0:
                    ts.append(float((plane - p0[i]) / seg[i]))
        ts = sorted({t for t in ts if 0.0 <= t <= 1.0})
        for t0, t1 in zip(ts[:-1], ts[1:]):
            if t1 <= t0:
                continue
            mid = p0 + 0.5 * (t0 + t1) * seg
            z = tuple(int(v) for v in np.floor(mid + 0.5))
            lengths_map[z] = lengths_map.get(z, 0.0) + (t1 - t0) * seg_len
    gamma = {z for z, l in lengths_map.items() if l >= 0.25}
    hat = set(gamma)
    if d <= 3:
        from itertools import product
        for z in gamma:
            for off in product((-1, 0, 1), repeat=d):
                hat.add(tuple(np.asarray(z) + np.asarray(off)))
    return CubeTrace(per_cube_length=lengths_map, gamma_set=gamma,
                     hat_gamma_set=hat)


def length_ratio(field, graph, x):
    """Euclidean length of the Dijkstra witness to x, divided by |x|."""
    x = np.asarray(x, dtype=float)
    nx = float(np.linalg.norm(x))
    if nx <= 0:
        raise GraphError("target must be away from the origin")
    _, witness = distance(graph, np.zeros(graph.dim), x)
    L = float(np.sum(np.linalg.norm(np.diff(witness, axis=0), axis=1)))
    return L / nx
