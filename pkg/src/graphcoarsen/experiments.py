"""Experiment harness: build a test problem, sweep coarsening parameters,
and emit error tables.

A sweep is described by a key = value config file (see
:func:`parse_config`); every (subdomain count, basis count, method, radius)
combination appends one CSV row.  Two CSV files are written: the full
record including wall-clock timings, and a timing-free table whose bytes
are reproducible run to run.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fileio
from .analysis import verify_bound
from .clustering import ClusterSet, cluster_partition
from .coarsesolve import (TransientConfig, errors, galerkin_coarse,
                          solve_fine, solve_parabolic, solve_steady)
from .graph import (WeightedGraph, apply_boundary, assemble_signed_laplacian,
                    eliminate_dirichlet, subgraph)
from .interpolation import (Prolongation, cf_ideal_global, cf_ideal_local,
                            cf_split, mc_global, mc_local, _cf_columns)
from .partition import graph_distance_oversample, oversample, partition_balanced
from .problems import (PoreNetworkSpec, TensorField, box_boundary_vertices,
                       channel_endpoints, channel_field, gen_aniso_heat,
                       gen_fem_grid, gen_pore_network)

__all__ = [
    "Problem",
    "ExperimentConfig",
    "parse_config",
    "build_problem",
    "run_experiments",
    "emit_summary",
    "METHODS",
    "RESULT_FIELDS",
]

METHODS = ("cf-glo", "cf-loc", "mc-glo", "mc-loc")

RESULT_FIELDS = ("test", "method", "scope", "N_omega", "M", "delta_H",
                 "e1", "e2", "n", "n_c", "runtime_ms", "status")


@dataclass(frozen=True)
class Problem:
    """A ready-to-coarsen system: graph aligned with the operator."""

    label: str
    graph: WeightedGraph
    operator: object
    rhs: np.ndarray
    capacity: np.ndarray | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    problem: dict
    n_subdomains: tuple[int, ...]
    m_values: tuple[int, ...]
    delta_h: tuple[float, ...]
    methods: tuple[str, ...]
    seed: int = 0
    oversample_mode: str = "vertex"
    partial_mode: str = "complete"
    transient: TransientConfig | None = None
    outdir: Path = Path("out")
    export_solutions: bool = True
    export_trajectories: bool = False

    def __post_init__(self):
        if not self.n_subdomains or not self.m_values or not self.methods:
            raise ValueError("subdomain, basis and method lists must be nonempty")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method '{m}' (choose from {METHODS})")
        if any(m.endswith("-loc") for m in self.methods) and not self.delta_h:
            raise ValueError("localized methods need at least one delta_h value")
        object.__setattr__(self, "outdir", Path(self.outdir))


def parse_config(path) -> ExperimentConfig:
    """Read the key = value sections of an experiment config file."""
    import configparser

    cp = configparser.ConfigParser()
    with open(path) as fh:
        cp.read_file(fh)
    if "problem" not in cp or "sweep" not in cp:
        raise ValueError("config needs [problem] and [sweep] sections")
    problem = dict(cp["problem"])
    sweep = cp["sweep"]
    transient = None
    if "transient" in cp:
        transient = TransientConfig(tau=cp["transient"].getfloat("tau"),
                                    n_steps=cp["transient"].getint("steps"))
    out = cp["output"] if "output" in cp else {}
    return ExperimentConfig(
        problem=problem,
        n_subdomains=tuple(int(x) for x in sweep.get("n_subdomains", "").split()),
        m_values=tuple(int(x) for x in sweep.get("m", "").split()),
        delta_h=tuple(float(x) for x in sweep.get("delta_h", "").split()),
        methods=tuple(sweep.get("methods", "").split()),
        seed=sweep.getint("seed", 0),
        oversample_mode=sweep.get("oversample_mode", "vertex"),
        partial_mode=sweep.get("partial_mode", "complete"),
        transient=transient,
        outdir=Path(out.get("dir", "out")),
        export_solutions=str(out.get("solutions", "true")).lower() != "false",
        export_trajectories=str(out.get("trajectories", "false")).lower() == "true",
    )


def _fem_field(p: dict):
    contrast = float(p.get("contrast", 1e4))
    band = (float(p.get("band_lo", 0.45)), float(p.get("band_hi", 0.55)))
    background = p.get("background", "iso")
    if background == "iso":
        if contrast == 1.0:
            return TensorField.isotropic(1.0)
        return channel_field(1.0, contrast, band)
    if background == "rotated":
        d1 = float(p.get("d1", 1.0))
        d2 = float(p.get("d2", 1e-4))
        theta = float(p.get("theta", np.pi / 3))
        base = TensorField.rotated(d1, d2, theta)

        def f(points):
            K = base.tensors(points)
            in_band = (points[:, 1] >= band[0]) & (points[:, 1] <= band[1])
            K[in_band] = contrast * np.eye(2)
            return K

        return f
    raise ValueError(f"unknown background '{background}'")


def _parse_holes(spec: str):
    holes = []
    for part in spec.split(";"):
        part = part.strip()
        if part:
            cx, cy, r = (float(x) for x in part.split(","))
            holes.append((cx, cy, r))
    return holes


def build_problem(p: dict) -> Problem:
    """Construct the fine system for a problem section."""
    family = p.get("family", "fem")
    if family in ("fem", "aniso"):
        nx, ny = int(p.get("nx", 40)), int(p.get("ny", 40))
        source = float(p.get("source", 1.0))
        if family == "fem":
            holes = _parse_holes(p.get("holes", ""))
            graph, A, f = gen_fem_grid(nx, ny, _fem_field(p), source=source,
                                       holes=holes)
            label = p.get("label", "fem")
        else:
            theta = float(p.get("theta", np.pi / 6))
            b = (np.cos(theta), np.sin(theta))
            graph, A, f = gen_aniso_heat(nx, ny, float(p.get("k_par", 1.0)),
                                         float(p.get("k_perp", 1e-3)), b,
                                         source=source)
            label = p.get("label", "aniso")
        dirichlet = [(int(v), 0.0) for v in box_boundary_vertices(graph.coords)]
        A_int, f_int, reduction = eliminate_dirichlet(A, f, dirichlet)
        g_int, _ = subgraph(graph, reduction.free.ids)
        return Problem(label, g_int, A_int, f_int)

    if family == "pore":
        spec = PoreNetworkSpec(
            nx=int(p.get("nx", 64)), ny=int(p.get("ny", 64)),
            robin_alpha=float(p.get("robin_alpha", 1.0)),
        )
        graph = gen_pore_network(spec, seed=int(p.get("network_seed", 0)))
        L = assemble_signed_laplacian(graph)
        A, f = apply_boundary(L, graph)
        left, _ = channel_endpoints(spec)
        f = f.copy()
        f[left] += float(p.get("source", 1.0))
        return Problem(p.get("label", "pore"), graph, A, f,
                       capacity=graph.capacity)

    if family == "file":
        graph = fileio.read_graph(p["graph"])
        if "operator" in p:
            A = fileio.read_operator(p["operator"])
            f = fileio.read_vector(p["rhs"]) if "rhs" in p else np.zeros(A.shape[0])
            return Problem(p.get("label", "file"), graph, A, f,
                           capacity=graph.capacity)
        L = assemble_signed_laplacian(graph)
        A, f = apply_boundary(L, graph)
        if graph.dirichlet:
            A, f, reduction = eliminate_dirichlet(A, f, graph.dirichlet)
            graph, _ = subgraph(graph, reduction.free.ids)
        return Problem(p.get("label", "file"), graph, A, f,
                       capacity=graph.capacity)

    raise ValueError(f"unknown problem family '{family}'")


def build_prolongation(method: str, problem: Problem, clusters: ClusterSet,
                       part, partial_mode: str = "complete") -> Prolongation:
    A = problem.operator
    if method == "cf-glo":
        C, F = cf_split(clusters, problem.graph.n_vertices)
        return cf_ideal_global(A, C, F, columns=_cf_columns(clusters))
    if method == "cf-loc":
        return cf_ideal_local(A, clusters, part)
    if method == "mc-glo":
        return mc_global(A, clusters)
    if method == "mc-loc":
        return mc_local(A, clusters, part, partial_mode=partial_mode)
    raise ValueError(f"unknown method '{method}'")


def _fmt(x) -> str:
    if x is None or x == "":
        return ""
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def _row_key(row: dict) -> str:
    key = f"{row['test']}_{row['method']}_N{row['N_omega']}_M{row['M']}"
    if row["delta_H"] != "":
        key += f"_dh{row['delta_H']}"
    return key


def run_experiments(config: ExperimentConfig) -> list[dict]:
    """Run the sweep; returns the result rows and writes all artifacts.

    Per-row failures are recorded in the status column and do not stop the
    sweep.  ``results.csv`` carries timings; ``errors.csv`` carries the
    same rows without the timing column and reproduces byte-identically.
    """
    outdir = config.outdir
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "reports").mkdir(exist_ok=True)
    if config.export_solutions:
        (outdir / "solutions").mkdir(exist_ok=True)

    problem = build_problem(config.problem)
    graph, A, f = problem.graph, problem.operator, problem.rhs
    n = graph.n_vertices

    if config.transient is not None:
        if problem.capacity is None:
            raise ValueError("transient runs need per-vertex capacities")
        ref = solve_parabolic(problem.capacity, A, f, config.transient)
        u_ref = ref.states[-1]
    else:
        u_ref = solve_fine(A, f)

    rows: list[dict] = []
    for N in config.n_subdomains:
        part0 = partition_balanced(graph, N, seed=config.seed)
        parts = {}
        for dh in config.delta_h:
            if graph.coords is not None:
                parts[dh] = oversample(graph, part0, dh, mode=config.oversample_mode)
            else:
                parts[dh] = graph_distance_oversample(graph, part0, int(dh))
        for M in config.m_values:
            clusters = cluster_partition(graph, part0, M, seed=config.seed)
            for method in config.methods:
                scopes = [None] if method.endswith("-glo") else list(config.delta_h)
                for dh in scopes:
                    row = {
                        "test": problem.label, "method": method,
                        "scope": "glo" if dh is None else "loc",
                        "N_omega": N, "M": M,
                        "delta_H": "" if dh is None else dh,
                        "e1": "", "e2": "", "n": n, "n_c": clusters.n_coarse,
                        "runtime_ms": 0.0, "status": "ok",
                    }
                    t0 = time.perf_counter()
                    try:
                        part = part0 if dh is None else parts[dh]
                        P = build_prolongation(method, problem, clusters, part,
                                               partial_mode=config.partial_mode)
                        if config.transient is not None:
                            res = solve_parabolic(problem.capacity, A, f,
                                                  config.transient, P=P)
                            u_ms = res.states[-1]
                            if config.export_trajectories:
                                fileio.write_trajectory(
                                    res.times, res.states,
                                    outdir / (_row_key(row) + "_traj.csv"))
                        else:
                            model = galerkin_coarse(A, f, P)
                            _, u_ms = solve_steady(model)
                        e1, e2 = errors(u_ref, u_ms, A)
                        row["e1"], row["e2"] = e1, e2
                        if graph.coords is not None:  # reports need geometry
                            report = verify_bound(graph, clusters, P, A, f,
                                                  u_ref, u_ms, partition=part)
                            report.to_csv(outdir / "reports" / (_row_key(row) + ".csv"))
                        if config.export_solutions:
                            base = outdir / "solutions" / _row_key(row)
                            fileio.write_vector(u_ref, str(base) + "_u.txt")
                            fileio.write_vector(u_ms, str(base) + "_ums.txt")
                    except Exception as exc:  # recorded, sweep continues
                        row["status"] = (
                            f"error: {type(exc).__name__}: {exc}".replace(",", ";")
                        )
                    row["runtime_ms"] = 1000.0 * (time.perf_counter() - t0)
                    rows.append(row)

    _write_csv(rows, outdir / "results.csv", RESULT_FIELDS)
    deterministic = tuple(c for c in RESULT_FIELDS if c != "runtime_ms")
    _write_csv(rows, outdir / "errors.csv", deterministic)
    return rows


def _write_csv(rows, path, fields) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(fields) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[c]) for c in fields) + "\n")


def _read_csv(path) -> list[dict]:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        return []
    header = lines[0].split(",")
    return [dict(zip(header, ln.split(","))) for ln in lines[1:]]


def emit_summary(csv_path) -> str:
    """Pivot a results CSV into per-(test, N) tables: rows (M, scope),
    columns method x norm.  Duplicate keys are an error."""
    rows = _read_csv(csv_path)
    if not rows:
        return ""
    cells: dict = {}
    groups: dict = {}
    for row in rows:
        scope = row["scope"] + (f"({row['delta_H']})" if row["delta_H"] else "")
        kind = row["method"].split("-")[0]
        key = (row["test"], row["N_omega"], row["M"], scope, kind)
        if key in cells:
            raise ValueError(f"duplicate result row for {key}")
        cells[key] = row
        groups.setdefault((row["test"], row["N_omega"]), []).append((row["M"], scope))

    out = []
    for (test, N), labels in groups.items():
        seen = []
        for lab in labels:
            if lab not in seen:
                seen.append(lab)
        out.append(f"test={test}  N_omega={N}")
        header = f"{'M':>4} {'scope':>10} | {'CF e1':>10} {'CF e2':>10} | {'MC e1':>10} {'MC e2':>10}"
        out.append(header)
        out.append("-" * len(header))
        for M, scope in seen:
            vals = []
            for kind in ("cf", "mc"):
                row = cells.get((test, N, M, scope, kind))
                if row is None:
                    vals += ["-", "-"]
                elif row["status"] != "ok":
                    vals += ["err", "err"]
                else:
                    vals += [f"{float(row['e1']):.2f}", f"{float(row['e2']):.2f}"]
            out.append(f"{M:>4} {scope:>10} | {vals[0]:>10} {vals[1]:>10} "
                       f"| {vals[2]:>10} {vals[3]:>10}")
        out.append("")
    return "\n".join(out)
