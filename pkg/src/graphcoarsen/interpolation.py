"""Prolongation operators: ideal interpolation on a centroid CF-splitting
(global and localized) and constrained energy minimization over aggregate
means (global and localized).

Column (k, r) of every prolongation belongs to aggregate r of subdomain k;
columns are ordered lexicographically by (k, r).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np
import scipy.sparse as sp

from ._solvers import RefinedLU
from .clustering import ClusterSet
from .exceptions import InfeasibleConstraintError, RepairWarning, SingularSystemError
from .graph import IndexSet
from .partition import Partition

__all__ = [
    "ColumnInfo",
    "Prolongation",
    "ConstraintOperator",
    "cf_split",
    "cf_ideal_global",
    "cf_ideal_local",
    "build_constraints",
    "mc_global",
    "mc_local",
    "assemble_prolongation",
    "constraint_violation",
]


class ColumnInfo(NamedTuple):
    subdomain: int
    aggregate: int
    centroid: int | None  # CF kinds carry the coarse node, MC kinds None


@dataclass(frozen=True)
class Prolongation:
    """Sparse prolongation with per-column provenance."""

    matrix: sp.csr_matrix
    kind: str
    columns: tuple[ColumnInfo, ...]
    delta_h: float | None = None

    def __post_init__(self):
        if self.matrix.shape[1] != len(self.columns):
            raise ValueError("one metadata entry per column required")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_coarse(self) -> int:
        return self.matrix.shape[1]


def cf_split(clusters: ClusterSet, n: int) -> tuple[IndexSet, IndexSet]:
    """Coarse set = centroids in column order, fine set = sorted complement."""
    C = IndexSet(clusters.flat_centroids, n)
    return C, C.complement()


def _cf_columns(clusters: ClusterSet) -> tuple[ColumnInfo, ...]:
    return tuple(ColumnInfo(k, r, int(clusters.centroids[k][r]))
                 for k, r in clusters.columns)


def cf_ideal_global(A: sp.spmatrix, C: IndexSet, F: IndexSet,
                    columns: tuple[ColumnInfo, ...] | None = None) -> Prolongation:
    """Ideal interpolation ``P = [W; I]`` with ``W = -A_FF^{-1} A_FC``.

    Returned in native vertex ordering: centroid rows carry the identity,
    fine rows the harmonic extension.  One factorization of ``A_FF`` is
    applied to all coarse columns at once.
    """
    A = A.tocsr()
    n = A.shape[0]
    n_c = len(C)
    if columns is None:
        columns = tuple(ColumnInfo(-1, c, int(C.ids[c])) for c in range(n_c))
    if len(F) == 0:
        P = sp.identity(n, format="csr")
        return Prolongation(P, "cf-glo", columns)
    A_ff = A[F.ids][:, F.ids].tocsc()
    A_fc = A[F.ids][:, C.ids].toarray()
    lu = RefinedLU(A_ff, context="A_FF (is A positive definite?)")
    W = -lu.solve(A_fc)

    P = np.zeros((n, n_c))
    P[F.ids] = W
    P[C.ids, np.arange(n_c)] = 1.0
    return Prolongation(sp.csr_matrix(P), "cf-glo", columns)


def cf_ideal_local(A: sp.spmatrix, clusters: ClusterSet,
                   partition: Partition) -> Prolongation:
    """Localized ideal interpolation over the oversampled regions.

    For each subdomain the operator is restricted to its oversampled
    region, split by the global CF-membership, and the local harmonic
    extension of each of the subdomain's centroids is scattered back.
    All centroids of a subdomain share one local factorization.
    """
    if partition.oversampled is None:
        raise ValueError("partition carries no oversampled regions")
    A = A.tocsr()
    n = A.shape[0]
    C, _ = cf_split(clusters, n)
    is_coarse = np.zeros(n, dtype=bool)
    is_coarse[C.ids] = True

    cols = []
    for k in range(clusters.n_subdomains):
        region = partition.oversampled[k]
        ids = region.ids
        local_coarse = is_coarse[ids]
        F_loc = np.flatnonzero(~local_coarse)
        C_loc = np.flatnonzero(local_coarse)
        A_loc = A[ids][:, ids].tocsr()
        lu = None
        if F_loc.size:
            try:
                lu = RefinedLU(A_loc[F_loc][:, F_loc].tocsc(),
                               context=f"local FF block of subdomain {k}")
            except SingularSystemError as exc:
                raise SingularSystemError(
                    f"subdomain {k}: singular local FF block ({exc})") from exc
        A_fc = A_loc[F_loc][:, C_loc].toarray() if F_loc.size else None

        for r in range(len(clusters.aggregates[k])):
            centroid = int(clusters.centroids[k][r])
            c_pos = int(np.flatnonzero(ids[C_loc] == centroid)[0])
            rows = [centroid]
            vals = [1.0]
            if F_loc.size:
                w = -lu.solve(A_fc[:, c_pos])
                rows.extend(ids[F_loc].tolist())
                vals.extend(w.tolist())
            col = sp.coo_matrix((vals, (rows, np.zeros(len(rows), dtype=np.int64))),
                                shape=(n, 1))
            cols.append((k, r, col, centroid))
    return assemble_prolongation(cols, kind="cf-loc", delta_h=partition.delta_h)


@dataclass(frozen=True)
class ConstraintOperator:
    """Aggregate-mean constraint rows: ``1/|aggregate|`` on members.

    Global operators have one column per fine vertex; scoped operators are
    restricted to the vertices of ``scope`` (columns in local ordering) and
    keep only the aggregates the scope admits.
    """

    matrix: sp.csr_matrix
    rows: tuple[tuple[int, int], ...]
    scope: IndexSet | None = None


def build_constraints(clusters: ClusterSet, scope: IndexSet | None = None,
                      partial_mode: str = "complete") -> ConstraintOperator:
    """Mean-value constraint operator over all aggregates in scope.

    With a scope, ``complete`` mode keeps only aggregates fully inside it
    (membership weights unchanged); ``renormalize`` keeps every aggregate
    that intersects it, averaging over the intersection.
    """
    if partial_mode not in ("complete", "renormalize"):
        raise ValueError(f"unknown partial aggregate mode: {partial_mode}")
    n_cols = clusters.n_vertices if scope is None else len(scope)
    rows, cols, vals, kept = [], [], [], []
    for (k, r), agg in zip(clusters.columns, clusters.flat_aggregates):
        if scope is None:
            members = agg.ids
            weight = 1.0 / len(agg)
        else:
            inside = scope.contains(agg.ids)
            if partial_mode == "complete":
                if not np.all(inside):
                    continue
                members = scope.local_of(agg.ids)
                weight = 1.0 / len(agg)
            else:
                if not np.any(inside):
                    continue
                members = scope.local_of(agg.ids[inside])
                weight = 1.0 / int(inside.sum())
        row = len(kept)
        kept.append((k, r))
        rows.extend([row] * len(members))
        cols.extend(np.asarray(members).tolist())
        vals.extend([weight] * len(members))
    S = sp.coo_matrix((vals, (rows, cols)), shape=(len(kept), n_cols)).tocsr()
    return ConstraintOperator(S, tuple(kept), scope)


def _saddle_solve(A: sp.spmatrix, S: sp.csr_matrix, rhs_rows: np.ndarray,
                  context: str) -> np.ndarray:
    """Minimize ``x^T A x / 2`` subject to ``S x = e_row`` for each row in
    ``rhs_rows``; returns the primal solutions as columns."""
    n = A.shape[0]
    m = S.shape[0]
    K = sp.bmat([[A, S.T], [S, None]], format="csc")
    lu = RefinedLU(K, context=context)
    rhs = np.zeros((n + m, rhs_rows.size))
    rhs[n + rhs_rows, np.arange(rhs_rows.size)] = 1.0
    sol = lu.solve(rhs)
    return sol[:n]


def mc_global(A: sp.spmatrix, clusters: ClusterSet) -> Prolongation:
    """Energy-minimizing basis with mean-value constraints on every
    aggregate: column (k, r) has aggregate mean one on its own aggregate
    and zero on all others.  All columns share one factorization of the
    saddle-point system."""
    A = A.tocsr()
    S = build_constraints(clusters)
    if S.matrix.shape[0] != clusters.n_coarse:
        raise ValueError("constraint operator is rank deficient")
    psi = _saddle_solve(A, S.matrix, np.arange(clusters.n_coarse),
                        context="global saddle-point system")
    columns = tuple(ColumnInfo(k, r, None) for k, r in clusters.columns)
    return Prolongation(sp.csr_matrix(psi), "mc-glo", columns)


def mc_local(A: sp.spmatrix, clusters: ClusterSet, partition: Partition,
             partial_mode: str = "complete") -> Prolongation:
    """Localized energy minimization with zero boundary values.

    The 'boundary ring' of an oversampled region (vertices with a neighbor
    outside it in the operator adjacency) is pinned to zero by dropping
    those rows and columns; when the region has no exterior neighbor all
    rows are kept, matching the global construction.  Constrained
    aggregates per region follow ``build_constraints``; aggregates whose
    members all fall on the ring lose their constraint row (reported), and
    a target aggregate losing its row is an error.
    """
    if partition.oversampled is None:
        raise ValueError("partition carries no oversampled regions")
    A = A.tocsr()
    n = A.shape[0]
    adj = A.copy()
    adj.eliminate_zeros()
    adj.data = np.ones_like(adj.data)
    adj.setdiag(0)

    cols = []
    for k in range(clusters.n_subdomains):
        region = partition.oversampled[k]
        ids = region.ids
        in_region = np.zeros(n, dtype=bool)
        in_region[ids] = True
        exterior_neighbors = adj @ (~in_region).astype(np.float64)
        interior_ids = ids[exterior_neighbors[ids] == 0]
        if interior_ids.size == 0:
            raise InfeasibleConstraintError(
                f"subdomain {k}: oversampled region is all boundary ring")
        interior = IndexSet(interior_ids, n)

        S_scope = build_constraints(clusters, scope=region, partial_mode=partial_mode)
        local_pos = region.local_of(interior_ids)
        S_int = S_scope.matrix[:, local_pos].tocsr()
        nonzero = np.diff(S_int.indptr) > 0
        dropped = [S_scope.rows[i] for i in np.flatnonzero(~nonzero)]
        for (j, b) in dropped:
            if j == k:
                raise InfeasibleConstraintError(
                    f"aggregate ({k}, {b}) removed entirely by the boundary ring")
        if dropped:
            warnings.warn(
                f"subdomain {k}: dropped ring-only constraint rows {dropped}",
                RepairWarning)
        keep_rows = np.flatnonzero(nonzero)
        S_int = S_int[keep_rows]
        kept = [S_scope.rows[i] for i in keep_rows]

        A_int = A[interior_ids][:, interior_ids]
        targets = np.array([kept.index((k, r))
                            for r in range(len(clusters.aggregates[k]))])
        psi = _saddle_solve(A_int, S_int, targets,
                            context=f"local saddle-point system of subdomain {k}")
        for r in range(len(clusters.aggregates[k])):
            col = sp.coo_matrix(
                (psi[:, r], (interior_ids, np.zeros(interior_ids.size, dtype=np.int64))),
                shape=(n, 1))
            cols.append((k, r, col, None))
    return assemble_prolongation(cols, kind="mc-loc", delta_h=partition.delta_h)


def assemble_prolongation(columns: Iterable[tuple], kind: str = "assembled",
                          delta_h: float | None = None) -> Prolongation:
    """Stack per-column results into a prolongation.

    ``columns`` yields ``(subdomain, aggregate, column, centroid)`` in any
    order; output columns are sorted lexicographically by (subdomain,
    aggregate).  Duplicate (subdomain, aggregate) pairs are an error.
    """
    entries = sorted(columns, key=lambda t: (t[0], t[1]))
    keys = [(k, r) for k, r, _, _ in entries]
    if len(set(keys)) != len(keys):
        raise ValueError("duplicate prolongation column (subdomain, aggregate)")
    if not entries:
        raise ValueError("no columns to assemble")
    mats = [c if sp.issparse(c) else sp.csc_matrix(np.asarray(c).reshape(-1, 1))
            for _, _, c, _ in entries]
    P = sp.hstack(mats, format="csr")
    info = tuple(ColumnInfo(k, r, cent) for (k, r, _, cent) in entries)
    return Prolongation(P, kind, info, delta_h=delta_h)


def constraint_violation(prol: Prolongation, clusters: ClusterSet,
                         partition: Partition | None = None,
                         partial_mode: str = "complete") -> float:
    """Worst deviation of the aggregate means from their targets.

    Global kinds check ``S P = I`` over all aggregates; localized kinds
    check each column against the aggregates its own oversampled region
    constrains.
    """
    if not prol.kind.startswith("mc"):
        raise ValueError("constraint check applies to energy-minimized kinds only")
    if prol.kind.endswith("-loc"):
        if partition is None or partition.oversampled is None:
            raise ValueError("localized prolongation needs the oversampled partition")
        worst = 0.0
        P = prol.matrix.tocsc()
        for k in range(clusters.n_subdomains):
            region = partition.oversampled[k]
            scoped = build_constraints(clusters, scope=region, partial_mode=partial_mode)
            for r in range(len(clusters.aggregates[k])):
                c = clusters.column_index(k, r)
                psi_loc = np.asarray(P[:, c].toarray()).ravel()[region.ids]
                means = scoped.matrix @ psi_loc
                for idx, (j, b) in enumerate(scoped.rows):
                    target = 1.0 if (j, b) == (k, r) else 0.0
                    worst = max(worst, abs(means[idx] - target))
        return worst
    S = build_constraints(clusters).matrix
    E = S @ prol.matrix - sp.identity(prol.n_coarse, format="csr")
    return float(np.abs(E.toarray()).max())
