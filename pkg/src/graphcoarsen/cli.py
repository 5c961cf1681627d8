"""Command-line interface.

Subcommands mirror the pipeline stages: ``generate`` a problem, then
``partition`` / ``cluster`` / ``prolong`` / ``solve`` on files, ``run`` for
a full config-driven sweep, and ``report`` to pivot a results CSV into a
readable table.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import fileio
from .clustering import ClusterSet, cluster_partition
from .coarsesolve import errors, galerkin_coarse, solve_fine, solve_steady
from .experiments import build_problem, emit_summary, parse_config, run_experiments
from .graph import IndexSet, apply_boundary, assemble_signed_laplacian, eliminate_dirichlet, subgraph
from .partition import Partition, graph_distance_oversample, oversample, partition_balanced


def _cmd_generate(args) -> int:
    params = {
        "family": args.family, "nx": args.nx, "ny": args.ny,
        "contrast": args.contrast, "source": args.source,
        "k_par": args.k_par, "k_perp": args.k_perp, "theta": args.theta,
        "network_seed": args.seed, "background": args.background,
        "holes": args.holes,
    }
    problem = build_problem({k: str(v) for k, v in params.items() if v is not None})
    fileio.write_graph(problem.graph, args.out)
    if args.operator:
        fileio.write_operator(problem.operator, args.operator)
    if args.rhs:
        fileio.write_vector(problem.rhs, args.rhs)
    print(f"wrote {args.out}: n = {problem.graph.n_vertices}, "
          f"edges = {problem.graph.n_edges}")
    return 0


def _load_system(args):
    graph = fileio.read_graph(args.graph)
    if getattr(args, "operator", None):
        A = fileio.read_operator(args.operator)
        f = fileio.read_vector(args.rhs) if getattr(args, "rhs", None) \
            else np.zeros(A.shape[0])
    else:
        L = assemble_signed_laplacian(graph)
        A, f = apply_boundary(L, graph)
        if graph.dirichlet:
            A, f, reduction = eliminate_dirichlet(A, f, graph.dirichlet)
            graph, _ = subgraph(graph, reduction.free.ids)
    return graph, A, f


def _cmd_partition(args) -> int:
    graph = fileio.read_graph(args.graph)
    part = partition_balanced(graph, args.n, seed=args.seed)
    if args.delta_h is not None:
        if graph.coords is not None:
            part = oversample(graph, part, args.delta_h, mode=args.mode)
        else:
            part = graph_distance_oversample(graph, part, int(args.delta_h))
    fileio.write_partition(part, args.out)
    lo, hi, mean = part.balance
    print(f"wrote {args.out}: {args.n} subdomains, sizes [{lo}, {hi}], mean {mean:.1f}")
    return 0


def _read_partition(graph, path) -> Partition:
    data = np.loadtxt(path, dtype=np.int64).reshape(-1, 2)
    assignment = np.empty(graph.n_vertices, dtype=np.int64)
    assignment[data[:, 0]] = data[:, 1]
    return Partition(graph.n_vertices, int(assignment.max()) + 1, assignment)


def _read_clusters(graph, path) -> ClusterSet:
    data = np.loadtxt(path, dtype=np.int64).reshape(-1, 4)
    n = graph.n_vertices
    groups: dict = {}
    for v, k, r, cent in data:
        groups.setdefault(int(k), {}).setdefault(int(r), []).append((int(v), int(cent)))
    aggs, cents = [], []
    for k in sorted(groups):
        row_a, row_c = [], []
        for r in sorted(groups[k]):
            members = sorted(v for v, _ in groups[k][r])
            centroid = [v for v, c in groups[k][r] if c]
            row_a.append(IndexSet(np.array(members, dtype=np.int64), n))
            row_c.append(centroid[0])
        aggs.append(tuple(row_a))
        cents.append(tuple(row_c))
    return ClusterSet(n, tuple(aggs), tuple(cents))


def _cmd_cluster(args) -> int:
    graph = fileio.read_graph(args.graph)
    part = _read_partition(graph, args.partition)
    clusters = cluster_partition(graph, part, args.m, seed=args.seed)
    fileio.write_clusters(clusters, args.out)
    print(f"wrote {args.out}: {clusters.n_coarse} aggregates")
    return 0


def _cmd_prolong(args) -> int:
    from .experiments import Problem, build_prolongation

    graph, A, f = _load_system(args)
    part = _read_partition(graph, args.partition)
    if args.delta_h is not None:
        if graph.coords is not None:
            part = oversample(graph, part, args.delta_h, mode=args.mode)
        else:
            part = graph_distance_oversample(graph, part, int(args.delta_h))
    clusters = _read_clusters(graph, args.clusters)
    problem = Problem("cli", graph, A, f)
    P = build_prolongation(args.method, problem, clusters, part)
    fileio.write_prolongation(P, args.out)
    print(f"wrote {args.out}: {P.n} x {P.n_coarse} ({P.kind})")
    return 0


def _cmd_solve(args) -> int:
    graph, A, f = _load_system(args)
    u = solve_fine(A, f)
    if args.out_u:
        fileio.write_vector(u, args.out_u)
    if args.prolongation:
        P = fileio.read_prolongation(args.prolongation)
        model = galerkin_coarse(A, f, P)
        _, u_ms = solve_steady(model)
        if args.out_ums:
            fileio.write_vector(u_ms, args.out_ums)
        e1, e2 = errors(u, u_ms, A)
        print(f"e1 = {e1:.4f} %  e2 = {e2:.4f} %  "
              f"(n = {A.shape[0]}, n_c = {model.n_coarse})")
    else:
        print(f"solved fine system, n = {A.shape[0]}")
    return 0


def _cmd_run(args) -> int:
    config = parse_config(args.config)
    if args.outdir:
        from dataclasses import replace

        config = replace(config, outdir=args.outdir)
    rows = run_experiments(config)
    bad = [r for r in rows if r["status"] != "ok"]
    print(f"{len(rows)} rows -> {config.outdir}/results.csv "
          f"({len(bad)} failed)")
    for r in bad:
        print(f"  {r['test']} {r['method']} N={r['N_omega']} M={r['M']}: {r['status']}")
    return 1 if bad else 0


def _cmd_report(args) -> int:
    table = emit_summary(args.csv)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(table + "\n")
    print(table)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="graphcoarsen",
        description="Two-level coarsening of weighted diffusion graphs",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a test problem")
    g.add_argument("--family", choices=["fem", "aniso", "pore"], default="fem")
    g.add_argument("--nx", type=int, default=40)
    g.add_argument("--ny", type=int, default=40)
    g.add_argument("--contrast", type=float, default=1e4)
    g.add_argument("--background", choices=["iso", "rotated"], default="iso")
    g.add_argument("--holes", default="", help="semicolon list cx,cy,r")
    g.add_argument("--source", type=float, default=1.0)
    g.add_argument("--k-par", dest="k_par", type=float, default=1.0)
    g.add_argument("--k-perp", dest="k_perp", type=float, default=1e-3)
    g.add_argument("--theta", type=float, default=None)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--operator", help="write the operator (Matrix Market)")
    g.add_argument("--rhs", help="write the right-hand side")
    g.set_defaults(func=_cmd_generate)

    p = sub.add_parser("partition", help="balanced subdomains")
    p.add_argument("--graph", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delta-h", dest="delta_h", type=float, default=None)
    p.add_argument("--mode", choices=["vertex", "closure"], default="vertex")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_partition)

    c = sub.add_parser("cluster", help="spectral aggregates per subdomain")
    c.add_argument("--graph", required=True)
    c.add_argument("--partition", required=True)
    c.add_argument("--m", type=int, required=True)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", required=True)
    c.set_defaults(func=_cmd_cluster)

    pr = sub.add_parser("prolong", help="build a prolongation operator")
    pr.add_argument("--graph", required=True)
    pr.add_argument("--operator")
    pr.add_argument("--rhs")
    pr.add_argument("--partition", required=True)
    pr.add_argument("--clusters", required=True)
    pr.add_argument("--method", choices=["cf-glo", "cf-loc", "mc-glo", "mc-loc"],
                    required=True)
    pr.add_argument("--delta-h", dest="delta_h", type=float, default=None)
    pr.add_argument("--mode", choices=["vertex", "closure"], default="vertex")
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=_cmd_prolong)

    s = sub.add_parser("solve", help="fine solve, optionally coarse-compare")
    s.add_argument("--graph", required=True)
    s.add_argument("--operator")
    s.add_argument("--rhs")
    s.add_argument("--prolongation")
    s.add_argument("--out-u", dest="out_u")
    s.add_argument("--out-ums", dest="out_ums")
    s.set_defaults(func=_cmd_solve)

    r = sub.add_parser(
        "run", help="full sweep from a config file",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""\
config file sections (key = value):

[problem]   family = fem | aniso | pore | file   (default fem)
            fem:   nx, ny (40), contrast (1e4), band_lo/band_hi (0.45/0.55),
                   background = iso | rotated (iso; rotated takes d1, d2, theta),
                   holes = "cx,cy,r;..." (none), source (1.0)
            aniso: nx, ny (40), k_par (1.0), k_perp (1e-3), theta (pi/6), source
            pore:  nx, ny (64), network_seed (0), robin_alpha (1.0), source (1.0)
            file:  graph = path [, operator = path.mtx, rhs = path]
[sweep]     n_subdomains, m, delta_h = space-separated lists; methods from
            {cf-glo, cf-loc, mc-glo, mc-loc}; seed (0);
            oversample_mode = vertex | closure (vertex);
            partial_mode = complete | renormalize (complete)
[transient] optional: tau, steps  (backward Euler, errors at final time)
[output]    dir (out), solutions = true | false (true),
            trajectories = true | false (false; per-row step,time,vertex,value CSV)

writes results.csv (with timings), errors.csv (timing-free, byte-reproducible),
reports/ (one convergence report per row) and solutions/ (u, u_ms vectors).""")
    r.add_argument("--config", required=True)
    r.add_argument("--outdir")
    r.set_defaults(func=_cmd_run)

    rp = sub.add_parser("report", help="pivot a results CSV into a table")
    rp.add_argument("--csv", required=True)
    rp.add_argument("--out")
    rp.set_defaults(func=_cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface a readable one-liner, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
