"""Weighted signed graphs and their discrete operators.

A :class:`WeightedGraph` carries vertex coordinates, signed edge weights,
optional per-vertex capacities and boundary data.  Operators built from it
(signed Laplacian, boundary-augmented system, restrictions) are plain
``scipy.sparse`` matrices: coordinate format during assembly, compressed
rows everywhere else.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .exceptions import IndefiniteOperatorError, SingularSystemError

__all__ = [
    "WeightedGraph",
    "IndexSet",
    "DirichletReduction",
    "assemble_signed_laplacian",
    "apply_boundary",
    "eliminate_dirichlet",
    "restrict_submatrix",
    "subgraph",
    "matrix_degrees",
    "guarded_degrees",
    "norm_D",
    "norm_A",
    "norm_L",
    "check_symmetric",
]

#: Relative tolerance used when checking that a matrix is symmetric.
SYMMETRY_RTOL = 1e-12

#: Relative floor substituted for zero vertex degrees (isolated vertices).
DEGREE_FLOOR_REL = 1e-12


@dataclass(frozen=True)
class IndexSet:
    """Ordered set of distinct fine-vertex ids with local/global maps.

    ``ids[local]`` gives the fine id of a local index; :meth:`local_of`
    inverts the map.  The order of ``ids`` is meaningful and preserved.
    """

    ids: np.ndarray
    n_global: int

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        object.__setattr__(self, "ids", ids)
        if ids.ndim != 1:
            raise ValueError("ids must be one-dimensional")
        if ids.size:
            if ids.min() < 0 or ids.max() >= self.n_global:
                raise ValueError("vertex id out of range")
            if np.unique(ids).size != ids.size:
                raise ValueError("duplicate vertex ids in index set")

    def __len__(self) -> int:
        return int(self.ids.size)

    @cached_property
    def _position(self) -> np.ndarray:
        pos = np.full(self.n_global, -1, dtype=np.int64)
        pos[self.ids] = np.arange(self.ids.size)
        return pos

    def local_of(self, global_ids) -> np.ndarray:
        """Map fine ids to local indices; raises ``KeyError`` on misses."""
        p = self._position[np.asarray(global_ids, dtype=np.int64)]
        if np.any(p < 0):
            raise KeyError("id not contained in index set")
        return p

    def contains(self, global_ids) -> np.ndarray:
        return self._position[np.asarray(global_ids, dtype=np.int64)] >= 0

    def complement(self) -> "IndexSet":
        mask = np.ones(self.n_global, dtype=bool)
        mask[self.ids] = False
        return IndexSet(np.flatnonzero(mask), self.n_global)

    @classmethod
    def full(cls, n: int) -> "IndexSet":
        return cls(np.arange(n, dtype=np.int64), n)


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected graph with signed edge weights.

    Parameters
    ----------
    n_vertices : int
        Number of vertices; all ids live in ``[0, n_vertices)``.
    edge_index : (m, 2) int array
        Edge endpoints.  Normalized so that ``i < j`` and edges are sorted
        lexicographically; duplicate edges and self-loops are rejected.
    edge_weight : (m,) float array
        Signed weights: conductances for network models (positive), negated
        off-diagonal operator entries for discretized diffusion (either sign).
    coords : (n, d) float array, optional
        Vertex positions, ``d`` in {2, 3}.  ``None`` for purely algebraic
        graphs; geometric operations are then unavailable.
    capacity : (n,) float array, optional
        Nonnegative per-vertex coefficient (volume / compressibility).
    robin : sequence of (vertex, alpha, value), optional
        Pointwise Robin boundary data, ``alpha >= 0``.
    dirichlet : sequence of (vertex, value), optional
        Vertices with prescribed values, eliminated before solving.
    """

    n_vertices: int
    edge_index: np.ndarray
    edge_weight: np.ndarray
    coords: np.ndarray | None = None
    capacity: np.ndarray | None = None
    robin: tuple = ()
    dirichlet: tuple = ()

    def __post_init__(self):
        n = self.n_vertices
        ij = np.asarray(self.edge_index, dtype=np.int64).reshape(-1, 2)
        w = np.asarray(self.edge_weight, dtype=np.float64).reshape(-1)
        if ij.shape[0] != w.shape[0]:
            raise ValueError("edge_index and edge_weight length mismatch")
        if ij.size and (ij.min() < 0 or ij.max() >= n):
            raise ValueError("edge endpoint out of range")
        if np.any(ij[:, 0] == ij[:, 1]):
            raise ValueError("self-loops are not allowed")
        # normalize orientation and ordering
        flip = ij[:, 0] > ij[:, 1]
        ij[flip] = ij[flip, ::-1]
        order = np.lexsort((ij[:, 1], ij[:, 0]))
        ij = ij[order]
        w = w[order]
        if ij.shape[0] > 1 and np.any(np.all(ij[1:] == ij[:-1], axis=1)):
            raise ValueError("duplicate edges are not allowed")
        object.__setattr__(self, "edge_index", ij)
        object.__setattr__(self, "edge_weight", w)

        if self.coords is not None:
            c = np.asarray(self.coords, dtype=np.float64)
            if c.shape != (n, 2) and c.shape != (n, 3):
                raise ValueError("coords must have shape (n, 2) or (n, 3)")
            object.__setattr__(self, "coords", c)
        if self.capacity is not None:
            cap = np.asarray(self.capacity, dtype=np.float64).reshape(-1)
            if cap.shape[0] != n:
                raise ValueError("capacity length mismatch")
            if np.any(cap < 0):
                raise ValueError("capacities must be nonnegative")
            object.__setattr__(self, "capacity", cap)

        robin = tuple(sorted((int(v), float(a), float(g)) for v, a, g in self.robin))
        for v, a, _ in robin:
            if not 0 <= v < n:
                raise ValueError("robin vertex out of range")
            if a < 0:
                raise ValueError("robin coefficient must be nonnegative")
        if len({v for v, _, _ in robin}) != len(robin):
            raise ValueError("duplicate robin vertex")
        object.__setattr__(self, "robin", robin)

        diri = tuple(sorted((int(v), float(g)) for v, g in self.dirichlet))
        for v, _ in diri:
            if not 0 <= v < n:
                raise ValueError("dirichlet vertex out of range")
        if len({v for v, _ in diri}) != len(diri):
            raise ValueError("duplicate dirichlet vertex")
        object.__setattr__(self, "dirichlet", diri)

    @classmethod
    def build(cls, n_vertices, edges, coords=None, capacity=None, robin=(), dirichlet=()):
        """Construct from an iterable of ``(i, j, w)`` triples."""
        rows = list(edges)
        if rows:
            arr = np.asarray(rows, dtype=np.float64).reshape(-1, 3)
            ij = arr[:, :2].astype(np.int64)
            w = arr[:, 2]
        else:
            ij = np.empty((0, 2), dtype=np.int64)
            w = np.empty(0)
        return cls(n_vertices, ij, w, coords=coords, capacity=capacity,
                   robin=robin, dirichlet=dirichlet)

    @property
    def n_edges(self) -> int:
        return int(self.edge_weight.size)

    @cached_property
    def degrees(self) -> np.ndarray:
        """Per-vertex degree ``d_i = sum_j |w_ij|``."""
        d = np.zeros(self.n_vertices)
        np.add.at(d, self.edge_index[:, 0], np.abs(self.edge_weight))
        np.add.at(d, self.edge_index[:, 1], np.abs(self.edge_weight))
        return d

    @cached_property
    def weight_matrix(self) -> sp.csr_matrix:
        """Symmetric sparse weight matrix ``W`` with ``W_ij = w_ij``."""
        i, j = self.edge_index[:, 0], self.edge_index[:, 1]
        w = self.edge_weight
        W = sp.coo_matrix(
            (np.concatenate([w, w]), (np.concatenate([i, j]), np.concatenate([j, i]))),
            shape=(self.n_vertices, self.n_vertices),
        )
        return W.tocsr()

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Unweighted symmetric adjacency pattern (data all ones)."""
        A = self.weight_matrix.copy()
        A.data = np.ones_like(A.data)
        return A

    def neighbors(self, v: int) -> np.ndarray:
        A = self.adjacency
        return A.indices[A.indptr[v]:A.indptr[v + 1]]


@dataclass(frozen=True)
class DirichletReduction:
    """Bookkeeping to restore a full vector after Dirichlet elimination."""

    free: IndexSet
    constrained: IndexSet
    values: np.ndarray

    def expand(self, u_free: np.ndarray) -> np.ndarray:
        u = np.zeros(self.free.n_global)
        u[self.free.ids] = u_free
        u[self.constrained.ids] = self.values
        return u


def assemble_signed_laplacian(graph: WeightedGraph) -> sp.csr_matrix:
    """Signed graph Laplacian: ``L_ii = sum_j |w_ij|``, ``L_ij = -w_ij``.

    Positive semidefinite for any sign pattern of the weights; for
    all-positive weights the rows sum to zero and the constant vector
    spans the kernel of each connected component.
    """
    n = graph.n_vertices
    i, j = graph.edge_index[:, 0], graph.edge_index[:, 1]
    w = graph.edge_weight
    rows = np.concatenate([i, j, np.arange(n)])
    cols = np.concatenate([j, i, np.arange(n)])
    vals = np.concatenate([-w, -w, graph.degrees])
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def apply_boundary(L: sp.spmatrix, graph: WeightedGraph,
                   dirichlet_follows: bool = False) -> tuple[sp.csr_matrix, np.ndarray]:
    """Add pointwise Robin terms: ``A = L + diag(alpha)``, ``f_i = alpha_i g_i``.

    Only diagonal entries are touched, so symmetry is preserved.  With no
    Robin vertex the operator stays singular; unless Dirichlet elimination
    is announced via ``dirichlet_follows`` (or the graph carries Dirichlet
    data) this raises :class:`SingularSystemError`.
    """
    n = graph.n_vertices
    if not graph.robin and not graph.dirichlet and not dirichlet_follows:
        raise SingularSystemError(
            "singular system: no Robin vertex and no Dirichlet elimination requested"
        )
    alpha = np.zeros(n)
    f = np.zeros(n)
    for v, a, g in graph.robin:
        alpha[v] += a
        f[v] += a * g
    A = (L.tocsr() + sp.diags(alpha)).tocsr()
    return A, f


def eliminate_dirichlet(A: sp.spmatrix, f: np.ndarray,
                        dirichlet: Sequence[tuple[int, float]]
                        ) -> tuple[sp.csr_matrix, np.ndarray, DirichletReduction]:
    """Restrict the system to free vertices, folding prescribed values into
    the right-hand side.  The returned reduction restores full vectors."""
    A = A.tocsr()
    n = A.shape[0]
    pairs = sorted((int(v), float(g)) for v, g in dirichlet)
    verts = np.array([v for v, _ in pairs], dtype=np.int64)
    vals = np.array([g for _, g in pairs])
    if verts.size:
        if verts.min() < 0 or verts.max() >= n:
            raise ValueError("dirichlet vertex out of range")
        if np.unique(verts).size != verts.size:
            raise ValueError("dirichlet vertices must be distinct")
    mask = np.ones(n, dtype=bool)
    mask[verts] = False
    free = np.flatnonzero(mask)
    A_ff = A[free][:, free].tocsr()
    f_int = np.asarray(f, dtype=np.float64)[free]
    if verts.size:
        f_int = f_int - A[free][:, verts] @ vals
    reduction = DirichletReduction(
        free=IndexSet(free, n), constrained=IndexSet(verts, n), values=vals
    )
    return A_ff, f_int, reduction


def restrict_submatrix(A: sp.spmatrix, rows: IndexSet, cols: IndexSet) -> sp.csr_matrix:
    """Entry-exact extraction ``A[rows, cols]`` in local ordering."""
    return A.tocsr()[rows.ids][:, cols.ids].tocsr()


def subgraph(graph: WeightedGraph, keep_ids) -> tuple[WeightedGraph, IndexSet]:
    """Induced subgraph on ``keep_ids`` (edges with both endpoints kept).

    Vertex data (coords, capacity, boundary) are restricted and re-indexed.
    Returns the subgraph and the index set mapping local to fine ids.
    """
    keep = IndexSet(np.asarray(keep_ids, dtype=np.int64), graph.n_vertices)
    inside = keep.contains(graph.edge_index[:, 0]) & keep.contains(graph.edge_index[:, 1])
    ij = keep.local_of(graph.edge_index[inside])
    w = graph.edge_weight[inside]
    coords = graph.coords[keep.ids] if graph.coords is not None else None
    capacity = graph.capacity[keep.ids] if graph.capacity is not None else None
    robin = [(int(keep.local_of([v])[0]), a, g)
             for v, a, g in graph.robin if keep.contains([v])[0]]
    diri = [(int(keep.local_of([v])[0]), g)
            for v, g in graph.dirichlet if keep.contains([v])[0]]
    g2 = WeightedGraph(len(keep), ij, w, coords=coords, capacity=capacity,
                       robin=robin, dirichlet=diri)
    return g2, keep


def check_symmetric(A: sp.spmatrix, rtol: float = SYMMETRY_RTOL) -> None:
    """Raise ``ValueError`` if ``A`` deviates from symmetry beyond ``rtol``."""
    D = (A - A.T).tocoo()
    if D.nnz == 0:
        return
    scale = max(1.0, np.abs(A.tocoo().data).max() if A.nnz else 0.0)
    worst = np.abs(D.data).max()
    if worst > rtol * scale:
        raise ValueError(f"matrix not symmetric: max |A - A^T| = {worst:.3e}")


def matrix_degrees(M: sp.spmatrix) -> np.ndarray:
    """Degrees read off a matrix: row sums of absolute off-diagonal entries."""
    C = M.tocoo()
    off = C.row != C.col
    d = np.zeros(M.shape[0])
    np.add.at(d, C.row[off], np.abs(C.data[off]))
    return d


def guarded_degrees(d: np.ndarray) -> np.ndarray:
    """Replace zero degrees by a small positive floor so that degree-scaled
    quantities stay finite; isolated vertices are reported."""
    d = np.asarray(d, dtype=np.float64).copy()
    zero = d == 0.0
    if np.any(zero):
        floor = DEGREE_FLOOR_REL * d.max() if d.max() > 0 else 1.0
        d[zero] = floor
        warnings.warn(
            f"{int(zero.sum())} isolated vertex degree(s) floored to {floor:.3e}",
            category=_repair_warning(),
        )
    return d


def _repair_warning():
    from .exceptions import RepairWarning

    return RepairWarning


def _quadratic_form(q: float, sq_norm: float, what: str) -> float:
    if q < -1e-12 * max(sq_norm, 1e-300):
        raise IndefiniteOperatorError(f"indefinite operator: {what} = {q:.3e} < 0")
    return np.sqrt(max(q, 0.0))


def norm_D(v: np.ndarray, A_or_L: sp.spmatrix) -> float:
    """Degree-weighted norm ``sqrt(sum_i d_i v_i^2)`` with degrees read off
    the operator's absolute off-diagonal row sums."""
    v = np.asarray(v, dtype=np.float64)
    d = matrix_degrees(A_or_L)
    return float(np.sqrt(np.sum(d * v * v)))


def norm_A(v: np.ndarray, A: sp.spmatrix) -> float:
    """Energy norm ``sqrt(v^T A v)`` for (semi)definite ``A``."""
    v = np.asarray(v, dtype=np.float64)
    q = float(v @ (A @ v))
    return _quadratic_form(q, float(v @ v), "v^T A v")


def norm_L(v: np.ndarray, graph: WeightedGraph) -> float:
    """Edge-difference norm ``sqrt(sum_ij w_ij (v_i - v_j)^2)``.

    Coincides with ``sqrt(v^T L v)`` for the signed Laplacian exactly when
    all weights are positive.
    """
    v = np.asarray(v, dtype=np.float64)
    i, j = graph.edge_index[:, 0], graph.edge_index[:, 1]
    diff = v[i] - v[j]
    q = float(np.sum(graph.edge_weight * diff * diff))
    return _quadratic_form(q, float(v @ v), "sum w_ij (v_i - v_j)^2")
