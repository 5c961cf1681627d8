"""File formats: graph text files, Matrix Market operators, and the plain
text exports used by the command-line tools.

Graph text format (line oriented)::

    n d                 header: vertex count, coordinate dimension (0 = none)
    x y [z]             n coordinate lines (omitted when d = 0)
    i j w               edge lines
    #capacity           optional section: n lines, one value per vertex
    #robin              optional section: lines "i alpha g"
    #dirichlet          optional section: lines "i g"
"""

from __future__ import annotations

import numpy as np
import scipy.io
import scipy.sparse as sp

from .graph import WeightedGraph, check_symmetric

__all__ = [
    "read_graph",
    "write_graph",
    "read_operator",
    "write_operator",
    "graph_from_operator",
    "write_vector",
    "read_vector",
    "write_partition",
    "write_clusters",
    "write_prolongation",
    "read_prolongation",
    "write_trajectory",
]

_FLOAT_FMT = "%.17g"


def write_graph(graph: WeightedGraph, path) -> None:
    d = 0 if graph.coords is None else graph.coords.shape[1]
    with open(path, "w") as fh:
        fh.write(f"{graph.n_vertices} {d}\n")
        if d:
            for row in graph.coords:
                fh.write(" ".join(_FLOAT_FMT % x for x in row) + "\n")
        for (i, j), w in zip(graph.edge_index, graph.edge_weight):
            fh.write(f"{i} {j} {_FLOAT_FMT % w}\n")
        if graph.capacity is not None:
            fh.write("#capacity\n")
            for c in graph.capacity:
                fh.write(_FLOAT_FMT % c + "\n")
        if graph.robin:
            fh.write("#robin\n")
            for v, a, g in graph.robin:
                fh.write(f"{v} {_FLOAT_FMT % a} {_FLOAT_FMT % g}\n")
        if graph.dirichlet:
            fh.write("#dirichlet\n")
            for v, g in graph.dirichlet:
                fh.write(f"{v} {_FLOAT_FMT % g}\n")


def read_graph(path) -> WeightedGraph:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty graph file")
    header = lines[0].split()
    n, d = int(header[0]), int(header[1])
    pos = 1
    coords = None
    if d:
        coords = np.array([[float(x) for x in lines[pos + k].split()] for k in range(n)])
        if coords.shape != (n, d):
            raise ValueError(f"{path}: expected {n} coordinate lines of dimension {d}")
        pos += n
    edges = []
    capacity = None
    robin = []
    dirichlet = []
    section = "edges"
    for ln in lines[pos:]:
        if ln.startswith("#"):
            section = ln[1:].split()[0].lower()
            if section == "capacity":
                capacity = []
            continue
        parts = ln.split()
        if section == "edges":
            edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
        elif section == "capacity":
            capacity.append(float(parts[0]))
        elif section == "robin":
            robin.append((int(parts[0]), float(parts[1]), float(parts[2])))
        elif section == "dirichlet":
            dirichlet.append((int(parts[0]), float(parts[1])))
        else:
            raise ValueError(f"{path}: unknown section '#{section}'")
    if capacity is not None:
        if len(capacity) != n:
            raise ValueError(f"{path}: #capacity must list one value per vertex")
        capacity = np.asarray(capacity)
    return WeightedGraph.build(n, edges, coords=coords, capacity=capacity,
                               robin=robin, dirichlet=dirichlet)


def write_operator(A: sp.spmatrix, path) -> None:
    scipy.io.mmwrite(str(path), A.tocoo(), symmetry="symmetric", precision=17)


def read_operator(path) -> sp.csr_matrix:
    """Read a symmetric sparse operator from a Matrix Market file."""
    A = scipy.io.mmread(str(path)).tocsr()
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"{path}: operator must be square")
    check_symmetric(A)
    return A


def graph_from_operator(A: sp.spmatrix) -> WeightedGraph:
    """Derive a coordinate-free graph from a symmetric operator.

    Edge weights take the negated off-diagonal entries, so an operator that
    is itself a (boundary-augmented) graph Laplacian maps back to positive
    conductances.
    """
    check_symmetric(A)
    C = sp.triu(A, k=1).tocoo()
    keep = C.data != 0.0
    ij = np.column_stack([C.row[keep], C.col[keep]])
    return WeightedGraph(A.shape[0], ij, -C.data[keep])


def write_vector(v: np.ndarray, path) -> None:
    np.savetxt(path, np.asarray(v, dtype=np.float64), fmt=_FLOAT_FMT)


def read_vector(path) -> np.ndarray:
    return np.atleast_1d(np.loadtxt(path, dtype=np.float64))


def write_partition(partition, path) -> None:
    """Lines ``vertex subdomain``."""
    with open(path, "w") as fh:
        for v, k in enumerate(partition.assignment):
            fh.write(f"{v} {k}\n")


def write_clusters(clusters, path) -> None:
    """Lines ``vertex subdomain aggregate is_centroid``."""
    sub, agg, cent = clusters.labels()
    with open(path, "w") as fh:
        for v in range(clusters.n_vertices):
            fh.write(f"{v} {sub[v]} {agg[v]} {cent[v]}\n")


def write_prolongation(prol, path) -> None:
    """Matrix Market file plus a ``.cols`` sidecar ``col k r centroid``."""
    scipy.io.mmwrite(str(path), prol.matrix.tocoo(), precision=17)
    with open(str(path) + ".cols", "w") as fh:
        for c, col in enumerate(prol.columns):
            centroid = -1 if col.centroid is None else col.centroid
            fh.write(f"{c} {col.subdomain} {col.aggregate} {centroid}\n")


def read_prolongation(path):
    from .interpolation import ColumnInfo, Prolongation

    P = scipy.io.mmread(str(path)).tocsr()
    columns = []
    with open(str(path) + ".cols") as fh:
        for ln in fh:
            parts = ln.split()
            if not parts:
                continue
            _, k, r, centroid = (int(x) for x in parts)
            columns.append(ColumnInfo(k, r, None if centroid < 0 else centroid))
    return Prolongation(matrix=P, kind="file", columns=tuple(columns), delta_h=None)


def write_trajectory(times: np.ndarray, states: np.ndarray, path) -> None:
    """CSV trajectory ``step,time,vertex,value``."""
    with open(path, "w") as fh:
        fh.write("step,time,vertex,value\n")
        for step, (t, u) in enumerate(zip(times, states)):
            for v, val in enumerate(u):
                fh.write(f"{step},{_FLOAT_FMT % t},{v},{_FLOAT_FMT % val}\n")
