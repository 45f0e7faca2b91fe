"""Reproducible experiment orchestration.

Every experiment is described by an ExperimentConfig (a plain dict of
parameters plus seed/replica/worker counts), dispatched to the owning module
with per-replica seeds derived deterministically from the master seed, and
written atomically (temp file + rename) together with a RunManifest that
records the config hash, code version, per-replica seeds, wall time and
SHA-256 digests of every output file.

Replica results are reduced in replica order with exact summation
(math.fsum), so aggregated statistics are bit-identical for any worker count
and any completion order.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import __version__, rng

EXPERIMENTS = ("field-check", "geodesic", "distance", "shape", "frontier",
               "bump", "scan", "fpp", "lpp", "euclid-fpp", "polymer", "accept")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    params: dict = dc_field(default_factory=dict)
    seed: int = 1
    replicas: int = 1
    workers: int = 1
    out: str = "out"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; valid names: "
                + ", ".join(EXPERIMENTS))
        if self.replicas < 1:
            raise ConfigError("replicas must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def canonical(self):
        return json.dumps(
            {"experiment": self.experiment, "params": self.params,
             "seed": self.seed, "replicas": self.replicas},
            sort_keys=True, separators=(",", ":"))

    def digest(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()


@dataclass
class RunManifest:
    config_hash: str
    code_version: str
    replica_seeds: list
    wall_time_s: float
    outputs: dict                 # filename -> sha256

    def to_json(self):
        return json.dumps(
            {"config_hash": self.config_hash, "code_version": self.code_version,
             "replica_seeds": self.replica_seeds,
             "wall_time_s": self.wall_time_s, "outputs": self.outputs},
            sort_keys=True, indent=2)


def atomic_write(path, data):
    """Write bytes or text to path via a temp file and rename."""
    mode = "wb" if isinstance(data, bytes) else "w"
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".rfpp-tmp-")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def exact_sum(values):
    """Order-independent exact float reduction."""
    return math.fsum(values)


def exact_mean(values):
    values = list(values)
    return exact_sum(values) / len(values)


def replica_seeds(master, replicas):
    return [rng.derive_seed(master, r) for r in range(replicas)]


def _run_replicas(task, seeds, workers):
    """Map a picklable task over replica seeds; results return in replica
    order regardless of completion order."""
    if workers <= 1 or len(seeds) <= 1:
        return [task(s) for s in seeds]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, seeds))


def canonical_json(obj):
    """Deterministic JSON serialization (sorted keys, repr floats)."""
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        raise TypeError(f"not serializable: {type(o)}")
    return json.dumps(obj, sort_keys=True, indent=2, default=default)


# ---------------------------------------------------------------------------
# experiment runners
# ---------------------------------------------------------------------------

def _default_field_params(params):
    return {
        "mode": params.get("mode", "conformal"),
        "amplitude": params.get("amplitude", 0.3),
        "range": params.get("range", 1.0),
        "shift": params.get("shift", 1.0),
        "half_width": params.get("half_width", 16.0),
        "spacing": params.get("spacing", None),
    }


def make_field(seed, params):
    from .fields import Box, KernelSpec, MetricField, load_field
    if params.get("load_field"):
        return load_field(params["load_field"])
    p = _default_field_params(params)
    kernel = KernelSpec(range=p["range"], amplitude=p["amplitude"])
    return MetricField(p["mode"], seed=seed, region=Box.cube(p["half_width"], 2),
                       kernel=kernel, shift=p["shift"], spacing=p["spacing"])


def _field_check_replica(args):
    seed, params = args
    from .fields import Box, check_spd_on_region, eigen_bounds
    field = make_field(seed, params)
    hw = min(4.0, _default_field_params(params)["half_width"] / 2)
    ok, lam_floor = check_spd_on_region(field, Box.cube(hw, 2),
                                        grid=params.get("grid", 0.25))
    eb = eigen_bounds(field, (0, 0))
    return {"seed": seed, "spd_ok": bool(ok), "lambda_floor": lam_floor,
            "lambda_min_cube0": eb.lambda_min, "lambda_max_cube0": eb.lambda_max}


def _run_field_check(config):
    seeds = replica_seeds(config.seed, config.replicas)
    rows = _run_replicas(_field_check_replica,
                         [(s, config.params) for s in seeds], config.workers)
    accept_rate = exact_mean([1.0 if r["spd_ok"] else 0.0 for r in rows])
    report = {"replicas": rows, "spd_accept_rate": accept_rate}
    return {"field-check.json": canonical_json(report)}


def _run_geodesic(config):
    from .geometry import geodesic_shoot, jacobi_integrate, lengths
    p = config.params
    field = make_field(config.seed, p)
    path = geodesic_shoot(field, p.get("x0", (0.0, 0.0)),
                          np.asarray(p.get("v0", (1.0, 0.0))),
                          T=p.get("T", 5.0), step=p.get("step", 1e-3),
                          parametrization=p.get("parametrization", "riemannian"))
    R, L = lengths(path, field)
    out = {}
    csv_path = "geodesic.csv"
    import io
    buf = io.StringIO()
    d = path.positions.shape[1]
    buf.write(f"# parametrization: {path.parametrization}\n")
    buf.write(f"# step: {path.step!r}\n# termination: {path.termination}\n")
    buf.write(",".join(["t"] + [f"x{i+1}" for i in range(d)]
                       + [f"v{i+1}" for i in range(d)]) + "\n")
    for row in np.column_stack([path.times, path.positions, path.velocities]):
        buf.write(",".join(repr(v) for v in row) + "\n")
    out[csv_path] = buf.getvalue()
    summary = {"riemannian_length": R, "euclidean_length": L,
               "speed_drift_max": path.speed_drift_max,
               "termination": path.termination}
    if p.get("jacobi", True) and path.parametrization == "riemannian":
        rec = jacobi_integrate(field, path)
        summary["conjugate_times"] = list(rec.conjugate_times)
    out["geodesic.json"] = canonical_json(summary)
    return out


def _run_distance(config):
    from .distance import build_graph, distance, ball
    from .fields import Box
    p = config.params
    field = make_field(config.seed, p)
    hw = p.get("graph_half_width", 12.0)
    graph = build_graph(field, Box.cube(hw, 2), p.get("h", 0.25),
                        stencil=p.get("stencil", 16))
    target = np.asarray(p.get("target", (10.0, 0.0)))
    d_hat, witness = distance(graph, np.zeros(2), target)
    raster = ball(graph, p.get("ball_radius", hw / 2))
    import io
    buf = io.StringIO()
    buf.write(f"# ball radius: {raster.t!r}\n# clipped: {raster.clipped}\n")
    buf.write("x1,x2,distance\n")
    for row, dist in zip(raster.inside, raster.distances):
        buf.write(f"{row[0]!r},{row[1]!r},{dist!r}\n")
    return {"distance.json": canonical_json(
                {"target": target.tolist(), "d_hat": d_hat,
                 "witness_nodes": len(witness), "stencil_factor": graph.factor}),
            "ball.csv": buf.getvalue()}


def _shape_replica(args):
    seed, params = args
    from .distance import build_graph
    from .fields import Box
    p = dict(params)
    t = p.get("t", 30.0)
    p.setdefault("half_width", t + 3.0)
    field = make_field(seed, p)
    graph = build_graph(field, Box.cube(t + 2.0, 2), p.get("h", 0.3),
                        stencil=p.get("stencil", 32))
    k = p.get("directions", 16)
    angles = np.arange(k) * (2 * np.pi / k)
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    dist, _ = graph.sssp(np.zeros(2, dtype=np.int64))
    mus = []
    for v in dirs:
        z = graph.snap(t * v)
        x = graph.node_position(z)
        mus.append(float(dist[int(graph.node_index(z))] / np.linalg.norm(x)))
    return mus


def _run_shape(config):
    p = config.params
    seeds = replica_seeds(config.seed, config.replicas)
    rows = _run_replicas(_shape_replica, [(s, p) for s in seeds], config.workers)
    arr = np.asarray(rows)
    mu = np.array([exact_mean(arr[:, j]) for j in range(arr.shape[1])])
    se = arr.std(axis=0, ddof=1) / np.sqrt(len(rows)) if len(rows) > 1 else 0 * mu
    k = arr.shape[1]
    angles = np.arange(k) * (2 * np.pi / k)
    lines = ["angle,mu,stderr"]
    for a, m, s in zip(angles, mu, se):
        lines.append(f"{a!r},{m!r},{s!r}")
    report = {"t": p.get("t", 30.0), "replicas": config.replicas,
              "anisotropy_ratio": float(mu.max() / mu.min()),
              "mu": mu.tolist(), "stderr": np.asarray(se).tolist()}
    return {"shape.csv": "\n".join(lines) + "\n",
            "shape.json": canonical_json(report)}


def _run_frontier(config):
    from .experiments import frontier_scan, frontier_density
    from .geometry import geodesic_shoot
    p = config.params
    field = make_field(config.seed, p)
    path = geodesic_shoot(field, (1e-9, 0.0), np.asarray(p.get("v0", (1.0, 0.0))),
                          T=p.get("T", 10.0), step=p.get("step", 2e-3),
                          parametrization="euclidean")
    beta = p.get("beta", 0.5)
    scan = frontier_scan(path, field, beta=beta, rho=p.get("rho", 1.0))
    times, density = frontier_density(path, beta)
    import io
    buf = io.StringIO()
    buf.write(f"# beta: {beta!r}\n")
    buf.write("l,r,r_dot,cone_angle,is_frontier,local_norm,density\n")
    for rec, dens in zip(scan.records, density):
        buf.write(f"{rec.l!r},{rec.r!r},{rec.r_dot!r},{rec.cone_angle!r},"
                  f"{int(rec.is_frontier)},{rec.local_norm!r},{dens!r}\n")
    return {"frontier.csv": buf.getvalue(),
            "frontier.json": canonical_json(
                {"intervals": scan.intervals, "density_tail": float(density[-1])})}


def _run_bump(config):
    from .experiments import BumpSpec, bump_experiment
    from .fields import FlatMetric
    p = config.params
    spec = BumpSpec(center=tuple(p.get("center", (0.0, 0.0))),
                    cone_half_angle=p.get("cone_half_angle", float(np.arccos(0.25))),
                    cap_curvature=p.get("cap_curvature", 1.0),
                    glue_width=p.get("glue_width", 0.2))
    report = bump_experiment(FlatMetric(2), spec, eps=p.get("eps", 0.0),
                             entries=p.get("entries", 20),
                             perturbations=p.get("perturbations", 1),
                             seed=config.seed,
                             check_minimizing=p.get("check_minimizing", True))
    return {"bump.json": canonical_json(report.as_dict())}


def _scan_replica(args):
    seed, params = args
    from .distance import build_graph
    from .fields import Box
    from .experiments import direction_scan
    p = dict(params)
    radii = p.get("radii", (5.0, 10.0, 20.0, 40.0))
    p.setdefault("half_width", max(radii) * 1.25 + 5.0)
    field = make_field(seed, p)
    graph = build_graph(field, Box.cube(max(radii) * 1.1 + 2.0, 2),
                        p.get("h", 0.4), stencil=p.get("stencil", 16))
    scan = direction_scan(field, graph, radii, k=p.get("directions", 64),
                          step=p.get("step", 1e-2))
    return scan.as_dict()


def _run_scan(config):
    seeds = replica_seeds(config.seed, config.replicas)
    rows = _run_replicas(_scan_replica, [(s, config.params) for s in seeds],
                         config.workers)
    return {"scan.json": canonical_json({"replicas": rows})}


def _run_fpp(config):
    from .lattice import LatticeConfig, fpp_passage, exponent_chi
    p = config.params
    law = _law_from_params(p)
    n = p.get("n", 50)
    cfg = LatticeConfig(p.get("dimension", 2), n, law, config.seed)
    taus = [fpp_passage(cfg, np.array([n, 0]), replica=r).tau
            for r in range(config.replicas)]
    out = {"fpp.csv": "replica,tau\n" + "".join(
        f"{r},{t!r}\n" for r, t in enumerate(taus))}
    if p.get("exponents", False):
        sizes = tuple(p.get("sizes", (50, 100, 200, 400)))
        est = exponent_chi("fpp", cfg, sizes, replicas=config.replicas)
        out["fpp-chi.json"] = canonical_json(est.as_dict())
    return out


def _run_lpp(config):
    from .lattice import LatticeConfig, lpp_passage, exponent_chi
    p = config.params
    law = _law_from_params(p, default=("geometric", (0.5,)))
    n = p.get("n", 100)
    cfg = LatticeConfig(2, n, law, config.seed)
    vals = [lpp_passage(cfg, (n, n), replica=r) for r in range(config.replicas)]
    out = {"lpp.csv": "replica,last_passage\n" + "".join(
        f"{r},{t!r}\n" for r, t in enumerate(vals))}
    if p.get("exponents", False):
        sizes = tuple(p.get("sizes", (125, 250, 500, 1000)))
        est = exponent_chi("lpp", cfg, sizes, replicas=config.replicas)
        out["lpp-chi.json"] = canonical_json(est.as_dict())
    return out


def _run_euclid_fpp(config):
    from .lattice import euclidean_fpp
    p = config.params
    n_points = p.get("points", 500)
    alpha = p.get("alpha", 1.5)
    box = p.get("box", 10.0)
    pts = np.column_stack([
        rng.uniform(config.seed, 0, np.arange(n_points)) * box,
        rng.uniform(config.seed, 1, np.arange(n_points)) * box])
    res = euclidean_fpp(pts, alpha, pts[0], pts[1])
    return {"euclid-fpp.json": canonical_json(
        {"alpha": alpha, "points": n_points, "time": res.time,
         "witness": res.witness.tolist(), "k_used": res.k_used,
         "certified": res.certified})}


def _run_polymer(config):
    from .lattice import polymer_free_energy
    p = config.params
    n = p.get("n", 100)
    beta = p.get("beta", 1.0)
    rows = []
    for r in range(config.replicas):
        seed_r = rng.derive_seed(config.seed, r)
        res = polymer_free_energy(seed_r, n, beta)
        rows.append(res.free_energy)
    return {"polymer.csv": "replica,free_energy\n" + "".join(
        f"{r},{v!r}\n" for r, v in enumerate(rows))}


def _law_from_params(p, default=("exponential", (1.0,))):
    from .lattice import WeightLaw
    kind = p.get("law", default[0])
    params = tuple(p.get("law_params", default[1] if kind == default[0] else ()))
    if not params:
        params = {"exponential": (1.0,), "geometric": (0.5,),
                  "uniform": (0.0, 1.0), "bernoulli": (0.5, 1.0, 2.0),
                  "deterministic": (1.0,)}[kind]
    return WeightLaw(kind, params)


def _run_accept(config):
    from .acceptance import run_suite
    suite = config.params.get("suite", "fast")
    report = run_suite(suite=suite, workers=config.workers)
    return {"acceptance.json": report.to_json()}


_RUNNERS = {
    "field-check": _run_field_check,
    "geodesic": _run_geodesic,
    "distance": _run_distance,
    "shape": _run_shape,
    "frontier": _run_frontier,
    "bump": _run_bump,
    "scan": _run_scan,
    "fpp": _run_fpp,
    "lpp": _run_lpp,
    "euclid-fpp": _run_euclid_fpp,
    "polymer": _run_polymer,
    "accept": _run_accept,
}


def run(config, force=False):
    """Execute an experiment config; returns the RunManifest.

    Output files land in config.out; an existing non-empty output directory
    requires force=True.  A manifest.json with the config hash, per-replica
    seeds and output digests is written alongside.
    """
    t0 = time.perf_counter()
    outputs = _RUNNERS[config.experiment](config)
    os.makedirs(config.out, exist_ok=True)
    digests = {}
    for name, data in sorted(outputs.items()):
        path = os.path.join(config.out, name)
        if os.path.exists(path) and not force:
            raise ConfigError(f"output {path} exists; pass force to overwrite")
        atomic_write(path, data)
        digests[name] = file_digest(path)
    manifest = RunManifest(
        config_hash=config.digest(), code_version=__version__,
        replica_seeds=replica_seeds(config.seed, config.replicas),
        wall_time_s=time.perf_counter() - t0, outputs=digests)
    atomic_write(os.path.join(config.out, "manifest.json"), manifest.to_json())
    return manifest
