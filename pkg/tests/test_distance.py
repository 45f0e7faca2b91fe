import numpy as np
import pytest

from rfpp import rng
from rfpp.fields import Box, ConstantMetric, FlatMetric, KernelSpec, MetricField
from rfpp.geometry import geodesic_shoot
from rfpp.distance import (GraphError, ball, build_graph, cube_trace,
                           distance, is_minimizing, length_ratio,
                           shape_estimate, stencil_factor, stencil_offsets)

FLAT = FlatMetric(2)


def conformal(seed, half_width=12.0, amplitude=0.3):
    return MetricField("conformal", seed=seed, region=Box.cube(half_width, 2),
                       kernel=KernelSpec(range=1.0, amplitude=amplitude))


def small_flat_graph(h=0.25, hw=4.0, stencil=8):
    return build_graph(FLAT, Box.cube(hw, 2), h=h, stencil=stencil)


# --------------------------------------------------------------- stencils

def test_stencil_counts():
    assert len(stencil_offsets(8)) == 8
    assert len(stencil_offsets(16)) == 16
    assert len(stencil_offsets(32)) == 32


def test_stencil_factor_values():
    # exact sector analysis; brute-force directional check as oracle
    for stencil in (8, 16, 32):
        factor = stencil_factor(stencil)
        offs = stencil_offsets(stencil).astype(float)
        norms = np.linalg.norm(offs, axis=1)
        worst = 1.0
        for theta in np.linspace(0, np.pi / 2, 2000):
            u = np.array([np.cos(theta), np.sin(theta)])
            best = np.inf
            for i in range(len(offs)):
                for j in range(len(offs)):
                    M = np.column_stack([offs[i], offs[j]])
                    if abs(np.linalg.det(M)) < 1e-9:
                        continue
                    ab = np.linalg.solve(M, u)
                    if np.all(ab >= -1e-12):
                        best = min(best, ab @ np.array([norms[i], norms[j]]))
            worst = max(worst, best)
        assert abs(factor - worst) <= 1e-6
    assert stencil_factor(16) <= 1.03


# --------------------------------------------------------------- weights

def test_flat_edge_weights_exact_lengths():
    g = small_flat_graph()
    for off in ((1, 0), (1, 1), (0, 1)):
        w = g.edge_weight((0, 0), off)
        expected = 0.25 * np.hypot(*off)
        assert abs(w - expected) <= 2 * g._unit


def test_constant_metric_weight_scaling():
    g1 = small_flat_graph()
    g4 = build_graph(ConstantMetric(4.0 * np.eye(2)), Box.cube(4.0, 2), 0.25, 8)
    for off in ((1, 0), (1, 1)):
        assert g4.edge_weight((0, 0), off) == 2.0 * g1.edge_weight((0, 0), off)


def test_edge_weight_matches_bulk_matrix():
    field = conformal(5, half_width=5.0)
    g = build_graph(field, Box.cube(3.0, 2), 0.25, 16)
    w_single = g.edge_weight((2, 1), (3, 3))
    g._ensure_matrix()
    ia, ib = int(g.node_index((2, 1))), int(g.node_index((3, 3)))
    assert g._matrix[ia, ib] == w_single
    assert g._matrix[ib, ia] == w_single


def test_random_edge_weight_vs_fine_quadrature():
    field = conformal(5, half_width=5.0)
    g = build_graph(field, Box.cube(3.0, 2), 0.25, 16)
    a = np.array([0.25, 0.0])
    b = np.array([0.5, 0.25])
    w = g.edge_weight((1, 0), (2, 1))
    ts = np.linspace(0, 1, 101)[:, None]
    pts = a + ts * (b - a)
    e = (b - a) / np.linalg.norm(b - a)
    gv = field.values_batch(pts)
    s = np.sqrt(np.einsum("i,bij,j->b", e, gv, e))
    from scipy.integrate import simpson
    fine = np.linalg.norm(b - a) * simpson(s, x=ts[:, 0])
    assert abs(w - fine) / fine <= 1e-3


# --------------------------------------------------------------- distance

def test_flat_distance_axis_and_bound():
    g = build_graph(FLAT, Box.cube(10.4, 2), h=0.05, stencil=16)
    d_hat, witness = distance(g, (0, 0), (10, 0))
    assert 1.0 <= d_hat / 10.0 <= 1.03
    assert np.array_equal(witness[0], [0, 0])
    assert np.array_equal(witness[-1], [10, 0])
    # worst direction stays below the analytic stencil factor
    theta = np.arctan2(1, 2) / 2
    tgt = 9.0 * np.array([np.cos(theta), np.sin(theta)])
    d2, _ = distance(g, (0, 0), tgt)
    x = g.node_position(g.snap(tgt))
    assert d2 / np.linalg.norm(x) <= g.factor + 1e-9


def test_triangle_inequality_exact():
    field = conformal(7, half_width=6.0)
    g = build_graph(field, Box.cube(4.0, 2), 0.25, 16)
    pts = 7.0 * rng.uniform(70, np.arange(60)).reshape(30, 2) - 3.5
    for i in range(10):
        a, b, c = pts[3 * i], pts[3 * i + 1], pts[3 * i + 2]
        dab, _ = distance(g, a, b)
        dbc, _ = distance(g, b, c)
        dac, _ = distance(g, a, c)
        assert dac <= dab + dbc


def test_distance_symmetry_exact():
    field = conformal(8, half_width=5.0)
    g = build_graph(field, Box.cube(3.0, 2), 0.25, 16)
    for i in range(5):
        a = 5.0 * rng.uniform(81, 2 * i, np.arange(2)) - 2.5
        b = 5.0 * rng.uniform(81, 2 * i + 1, np.arange(2)) - 2.5
        assert distance(g, a, b)[0] == distance(g, b, a)[0]


def test_global_scaling_exact_witness_invariant():
    field = conformal(9, half_width=5.0)
    g1 = build_graph(field, Box.cube(3.0, 2), 0.25, 16)
    g4 = build_graph(field.scaled(4.0), Box.cube(3.0, 2), 0.25, 16)
    d1, w1 = distance(g1, (0, 0), (2.5, 1.0))
    d4, w4 = distance(g4, (0, 0), (2.5, 1.0))
    assert d4 == 2.0 * d1
    assert np.array_equal(w1, w4)


def test_refinement_monotone_trend():
    field = conformal(10, half_width=6.0)
    target = (3.0, 1.0)
    ds = []
    for h in (0.4, 0.2, 0.1):
        g = build_graph(field, Box.cube(4.0, 2), h, 16)
        ds.append(distance(g, (0, 0), target)[0])
    assert ds[1] <= ds[0] * (1 + 1e-3)
    assert ds[2] <= ds[1] * (1 + 1e-3)
    assert ds[2] < ds[0]


def test_dijkstra_against_bruteforce_subgraph():
    # 6 x 6 nodes: exhaustive DFS over simple paths with pruning
    field = conformal(11, half_width=4.0)
    g = build_graph(field, Box((0.0, 0.0), (1.25, 1.25)), 0.25, 8)
    assert g.n_nodes == 36
    g._ensure_matrix()
    mat = g._matrix.toarray()
    src = int(g.node_index((0, 0)))
    tgt = int(g.node_index((5, 5)))

    best = [np.inf]

    def dfs(node, cost, seen):
        if cost >= best[0]:
            return
        if node == tgt:
            best[0] = cost
            return
        for nxt in np.nonzero(mat[node])[0]:
            if nxt not in seen:
                dfs(int(nxt), cost + mat[node, nxt], seen | {int(nxt)})

    dfs(src, 0.0, {src})
    d_hat, _ = distance(g, (0.0, 0.0), (1.25, 1.25))
    assert d_hat == best[0]


# --------------------------------------------------------------- balls

def test_ball_trivial_and_nested():
    g = small_flat_graph(h=0.25, hw=4.0, stencil=16)
    b0 = ball(g, 0.0)
    assert len(b0.inside) == 1 and np.allclose(b0.inside[0], 0.0)
    b1 = ball(g, 1.0)
    b2 = ball(g, 2.0)
    set1 = {tuple(p) for p in np.round(b1.inside / 0.25).astype(int)}
    set2 = {tuple(p) for p in np.round(b2.inside / 0.25).astype(int)}
    assert set1 <= set2


def test_ball_hausdorff_bound_flat():
    g = build_graph(FLAT, Box.cube(4.0, 2), 0.1, 16)
    t = 3.0
    b = ball(g, t)
    r = np.linalg.norm(b.inside, axis=1)
    bound = (g.factor - 1.0) * t + 0.1 * np.sqrt(2.0)
    # no inside node beyond the ball, no boundary gap deeper than the bound
    assert r.max() <= t + 1e-12
    angles = np.linspace(0, 2 * np.pi, 720, endpoint=False)
    for a in angles:
        u = np.array([np.cos(a), np.sin(a)])
        along = b.inside @ u
        cross = np.abs(b.inside @ np.array([-u[1], u[0]]))
        cone = cross <= 0.15
        assert np.max(along[cone]) >= t - bound


def test_ball_clipped_report():
    g = small_flat_graph(h=0.5, hw=2.0, stencil=8)
    b = ball(g, 10.0)
    assert b.clipped


# --------------------------------------------------------------- shape

def test_shape_flat_bounds():
    est = shape_estimate(lambda r: FLAT, t=6.0, directions=8, replicas=1,
                         h=0.25, stencil=16, margin=1.0)
    # lower slack covers the dyadic weight quantization (~1e-7 relative)
    assert np.all(est.mu >= 1.0 - 1e-6)
    assert np.all(est.mu <= stencil_factor(16) + 1e-6)
    assert est.anisotropy_ratio <= stencil_factor(16) + 1e-6


def test_shape_constant_scaling():
    est1 = shape_estimate(lambda r: FLAT, t=5.0, directions=8, replicas=1,
                          h=0.25, stencil=16, margin=1.0)
    est4 = shape_estimate(lambda r: ConstantMetric(4.0 * np.eye(2)), t=5.0,
                          directions=8, replicas=1, h=0.25, stencil=16,
                          margin=1.0)
    assert np.array_equal(est4.mu, 2.0 * est1.mu)


def test_shape_csv_export(tmp_path):
    est = shape_estimate(lambda r: FLAT, t=4.0, directions=8, replicas=2,
                         h=0.25, stencil=16, margin=1.0)
    out = tmp_path / "shape.csv"
    est.to_csv(out)
    lines = out.read_text().splitlines()
    assert lines[3] == "angle,mu,stderr"
    assert len(lines) == 4 + 8


# --------------------------------------------------------------- minimality

def test_flat_straight_geodesic_minimizing():
    g = build_graph(FLAT, Box.cube(6.0, 2), 0.2, 16)
    path = geodesic_shoot(FLAT, (0, 0), np.array([1.0, 0.0]), T=5.0, step=1e-3)
    verdict = is_minimizing(FLAT, path, g)
    assert verdict.minimizing
    assert np.isnan(verdict.first_failure_time)


def test_sphere_cut_point_detected_near_pi():
    # the unit circle is a great circle of the stereographic sphere: past the
    # antipode at Riemannian time pi, the short way around wins
    from rfpp.fields import SpherePatchField
    sphere = SpherePatchField(radius=1.0)
    g = build_graph(sphere, Box.cube(1.8, 2), 0.025, 32)
    path = geodesic_shoot(sphere, (1.0, 0.0), np.array([0.0, 1.0]),
                          T=4.6, step=1e-3)
    verdict = is_minimizing(sphere, path, g, tol=0.01)
    assert not verdict.minimizing
    assert np.pi - 0.05 <= verdict.first_failure_time <= np.pi + 0.05


def test_witness_length_at_least_distance():
    field = conformal(12, half_width=6.0)
    g = build_graph(field, Box.cube(4.0, 2), 0.25, 16)
    d_hat, witness = distance(g, (0, 0), (3.0, -2.0))
    total = 0.0
    for a, b in zip(witness[:-1], witness[1:]):
        total += g.edge_weight(np.round(a / g.h).astype(int),
                               np.round(b / g.h).astype(int))
    assert total == d_hat


# --------------------------------------------------------------- cube trace

def path_from_points(points):
    from rfpp.geometry import GeodesicPath
    pts = np.asarray(points, dtype=float)
    seg = np.diff(pts, axis=0)
    ls = np.concatenate([[0.0], np.cumsum(np.linalg.norm(seg, axis=1))])
    vel = np.vstack([seg / np.linalg.norm(seg, axis=1, keepdims=True),
                     seg[-1:] / np.linalg.norm(seg[-1])])
    return GeodesicPath(times=ls, positions=pts, velocities=vel,
                        parametrization="euclidean", step=1.0)


def test_cube_trace_axis_segment():
    path = path_from_points([(0.0, 0.0), (10.0, 0.0)])
    trace = cube_trace(path)
    assert trace.gamma_set == {(i, 0) for i in range(11)}
    assert abs(sum(trace.per_cube_length.values()) - 10.0) <= 1e-9
    assert trace.gamma_set <= trace.hat_gamma_set


def test_cube_trace_short_path_conserves_length():
    path = path_from_points([(0.0, 0.0), (0.1, 0.05)])
    trace = cube_trace(path)
    assert trace.gamma_set == set()
    total = sum(trace.per_cube_length.values())
    assert abs(total - np.hypot(0.1, 0.05)) <= 1e-9


def test_cube_trace_generic_length_partition():
    pts = np.cumsum(rng.uniform(55, np.arange(40)).reshape(20, 2) - 0.3, axis=0)
    path = path_from_points(pts)
    trace = cube_trace(path)
    seg_total = np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1))
    assert abs(sum(trace.per_cube_length.values()) - seg_total) <= 1e-9


# --------------------------------------------------------------- length ratio

def test_length_ratio_flat_bounds():
    g = build_graph(FLAT, Box.cube(6.0, 2), 0.2, 16)
    r = length_ratio(FLAT, g, (5.0, 0.0))
    assert 1.0 - 0.2 * np.sqrt(2) / 5.0 <= r <= stencil_factor(16)


def test_length_ratio_constant_invariance():
    gf = build_graph(FLAT, Box.cube(6.0, 2), 0.2, 16)
    gc = build_graph(ConstantMetric(4.0 * np.eye(2)), Box.cube(6.0, 2), 0.2, 16)
    x = (4.0, 2.0)
    assert length_ratio(FLAT, gf, x) == length_ratio(ConstantMetric(4 * np.eye(2)), gc, x)


def test_length_ratio_random_stable():
    field = conformal(13, half_width=9.0)
    g = build_graph(field, Box.cube(7.0, 2), 0.25, 16)
    ratios = [length_ratio(field, g, 6.0 * np.array([np.cos(a), np.sin(a)]))
              for a in np.arange(8) * (np.pi / 4)]
    assert max(ratios) < 2.0
    assert min(ratios) >= 1.0 - 0.25 * np.sqrt(2) / 6.0
