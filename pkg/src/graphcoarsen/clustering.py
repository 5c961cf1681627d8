"""Per-subdomain spectral clustering into aggregates with centroid nodes.

Within each subdomain the generalized eigenproblem ``L x = lambda D x`` is
solved on the local signed Laplacian (degrees recomputed from edges
interior to the subdomain), the lowest eigenvectors are row-normalized and
clustered by k-means, and each aggregate is represented by the member
vertex closest to the aggregate's coordinate mean.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .exceptions import RepairWarning
from .graph import IndexSet, WeightedGraph, guarded_degrees
from .partition import Partition

__all__ = [
    "SpectralEmbedding",
    "ClusterSet",
    "local_signed_laplacian",
    "generalized_eigs",
    "kmeans_embed",
    "select_centroids",
    "cluster_partition",
]


@dataclass(frozen=True)
class SpectralEmbedding:
    """Lowest generalized eigenpairs of a local signed Laplacian."""

    subdomain: int
    eigenvalues: np.ndarray
    vectors: np.ndarray  # (n_local, m), column r pairs with eigenvalues[r]

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=np.float64)
        if np.any(np.diff(ev) < -1e-12 * max(1.0, np.abs(ev).max())):
            raise ValueError("eigenvalues must be sorted ascending")
        object.__setattr__(self, "eigenvalues", ev)


def local_signed_laplacian(graph: WeightedGraph, omega: IndexSet
                           ) -> tuple[sp.csr_matrix, np.ndarray]:
    """Signed Laplacian of the induced subgraph, with its diagonal degrees.

    Degrees use only edges interior to ``omega``; isolated vertices get a
    small positive floor so the diagonal stays invertible.
    """
    if len(omega) == 0:
        raise ValueError("empty subdomain")
    inside = omega.contains(graph.edge_index[:, 0]) & omega.contains(graph.edge_index[:, 1])
    ij = omega.local_of(graph.edge_index[inside])
    w = graph.edge_weight[inside]
    n = len(omega)
    d_raw = np.zeros(n)
    if ij.size:
        np.add.at(d_raw, ij[:, 0], np.abs(w))
        np.add.at(d_raw, ij[:, 1], np.abs(w))
    rows = np.concatenate([ij[:, 0], ij[:, 1], np.arange(n)])
    cols = np.concatenate([ij[:, 1], ij[:, 0], np.arange(n)])
    vals = np.concatenate([-w, -w, d_raw])
    L = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    return L, guarded_degrees(d_raw)


def generalized_eigs(L: sp.spmatrix, d: np.ndarray, m: int,
                     subdomain: int = -1) -> SpectralEmbedding:
    """Lowest ``m`` pairs of ``L x = lambda D x`` via the symmetric
    reduction ``D^{-1/2} L D^{-1/2}`` and a dense solver.

    Subdomains are small by construction, so a dense solve is cheap and
    reproducible.
    """
    d = np.asarray(d, dtype=np.float64)
    n = L.shape[0]
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= {n}, got m = {m}")
    if np.any(d <= 0):
        raise ValueError("diagonal scaling must be positive")
    s = 1.0 / np.sqrt(d)
    M = (L.multiply(s[:, None]).multiply(s[None, :])).toarray()
    M = 0.5 * (M + M.T)
    vals, vecs = scipy.linalg.eigh(M)
    vals = vals[:m]
    phi = s[:, None] * vecs[:, :m]

    # defensive residual check; eigh is backward stable so this only fires
    # on genuinely broken inputs
    scale = np.abs(L).sum(axis=1).max() if L.nnz else 1.0
    res = np.abs(L @ phi - (d[:, None] * phi) * vals[None, :]).max(axis=0)
    if np.any(res > 1e-8 * max(float(scale), 1e-300)):
        raise RuntimeError("eigen residual beyond tolerance")
    return SpectralEmbedding(subdomain=subdomain, eigenvalues=vals, vectors=phi)


def _normalize_rows(X: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1)
    safe = norms.copy()
    safe[safe == 0.0] = 1.0  # zero rows stay zero
    return X / safe[:, None]


def _kmeans_pp(X: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((m, X.shape[1]))
    first = int(rng.integers(n))
    centers[0] = X[first]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for c in range(1, m):
        total = d2.sum()
        if total <= 0:
            # duplicate points; take the smallest index not yet used
            idx = int(np.argmax(d2 == d2.max()))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[c] = X[idx]
        d2 = np.minimum(d2, np.sum((X - centers[c]) ** 2, axis=1))
    return centers


def kmeans_embed(emb: SpectralEmbedding, m: int, seed: int = 0,
                 max_iter: int = 300, rtol: float = 1e-8) -> list[np.ndarray]:
    """Cluster the row-normalized embedding into ``m`` aggregates.

    Lloyd iterations with k-means++ seeding, deterministic per seed.  Empty
    clusters are repaired by re-seeding at the farthest point of the
    largest cluster.  Returns local member index arrays, one per aggregate,
    ordered by smallest member.
    """
    X = _normalize_rows(np.asarray(emb.vectors, dtype=np.float64))
    n = X.shape[0]
    if m < 1:
        raise ValueError("need m >= 1")
    if m == 1:
        return [np.arange(n, dtype=np.int64)]
    if m >= n:
        return [np.array([i], dtype=np.int64) for i in range(n)]

    rng = np.random.default_rng(seed)
    centers = _kmeans_pp(X, m, rng)
    prev_inertia = np.inf
    labels = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(d2, axis=1)

        counts = np.bincount(labels, minlength=m)
        if np.any(counts == 0):
            for empty in np.flatnonzero(counts == 0):
                big = int(np.argmax(counts))
                members = np.flatnonzero(labels == big)
                far = members[int(np.argmax(d2[members, big]))]
                centers[empty] = X[far]
                labels[far] = empty
                counts = np.bincount(labels, minlength=m)
            warnings.warn("empty cluster repaired by splitting the largest",
                          RepairWarning)
            d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)

        inertia = float(d2[np.arange(n), labels].sum())
        for c in range(m):
            members = labels == c
            if np.any(members):
                centers[c] = X[members].mean(axis=0)
        if abs(prev_inertia - inertia) < rtol * max(inertia, 1e-300):
            break
        prev_inertia = inertia

    groups = [np.flatnonzero(labels == c).astype(np.int64) for c in range(m)]
    groups.sort(key=lambda g: int(g[0]))
    return groups


def select_centroids(aggregates: list[IndexSet], coords: np.ndarray | None,
                     embedding_rows: np.ndarray | None = None,
                     mode: str = "physical") -> list[int]:
    """Representative vertex per aggregate.

    ``physical`` mode (default): coordinate mean of the members, then the
    member closest to it; ``spectral-mean`` uses the embedding-space mean
    with the physical argmin.  Ties break to the smallest vertex id.  With
    no coordinates available the member nearest the embedding mean is used
    (medoid fallback, reported).
    """
    if mode not in ("physical", "spectral-mean"):
        raise ValueError(f"unknown centroid mode: {mode}")
    use_embedding = coords is None or mode == "spectral-mean"
    if use_embedding and embedding_rows is None:
        raise ValueError("embedding rows required for this centroid mode")
    if coords is None:
        warnings.warn("no coordinates; falling back to embedding medoid",
                      RepairWarning)
    out = []
    for r, agg in enumerate(aggregates):
        members = np.sort(agg.ids)
        pts = embedding_rows[r] if use_embedding else coords[members]
        mu = pts.mean(axis=0)
        dist = np.linalg.norm(pts - mu, axis=1)
        out.append(int(members[int(np.argmin(dist))]))
    if len(set(out)) != len(out):
        raise RuntimeError("two aggregates selected the same centroid")
    return out


@dataclass(frozen=True)
class ClusterSet:
    """Aggregates and centroids for every subdomain.

    Coarse columns are ordered lexicographically by (subdomain, aggregate);
    :meth:`column_index` maps (k, r) to the column id.
    """

    n_vertices: int
    aggregates: tuple[tuple[IndexSet, ...], ...]
    centroids: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        seen = np.zeros(self.n_vertices, dtype=np.int64)
        for k, aggs in enumerate(self.aggregates):
            for r, agg in enumerate(aggs):
                if len(agg) == 0:
                    raise ValueError(f"empty aggregate ({k}, {r})")
                seen[agg.ids] += 1
                if not agg.contains([self.centroids[k][r]])[0]:
                    raise ValueError(f"centroid of ({k}, {r}) outside its aggregate")
        cents = [c for row in self.centroids for c in row]
        if len(set(cents)) != len(cents):
            raise ValueError("duplicate centroid")
        if np.any(seen > 1):
            raise ValueError("aggregates overlap")

    @property
    def n_subdomains(self) -> int:
        return len(self.aggregates)

    @property
    def n_coarse(self) -> int:
        return sum(len(aggs) for aggs in self.aggregates)

    @cached_property
    def columns(self) -> tuple[tuple[int, int], ...]:
        return tuple((k, r) for k, aggs in enumerate(self.aggregates)
                     for r in range(len(aggs)))

    def column_index(self, k: int, r: int) -> int:
        return self.columns.index((k, r))

    @cached_property
    def flat_aggregates(self) -> tuple[IndexSet, ...]:
        return tuple(agg for aggs in self.aggregates for agg in aggs)

    @cached_property
    def flat_centroids(self) -> np.ndarray:
        return np.array([c for row in self.centroids for c in row], dtype=np.int64)

    def labels(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-vertex (subdomain, aggregate, is_centroid) arrays for export."""
        sub = np.full(self.n_vertices, -1, dtype=np.int64)
        agg = np.full(self.n_vertices, -1, dtype=np.int64)
        cent = np.zeros(self.n_vertices, dtype=np.int64)
        for k, aggs in enumerate(self.aggregates):
            for r, a in enumerate(aggs):
                sub[a.ids] = k
                agg[a.ids] = r
        cent[self.flat_centroids] = 1
        return sub, agg, cent


def cluster_partition(graph: WeightedGraph, partition: Partition, m: int,
                      seed: int = 0, centroid_mode: str = "physical") -> ClusterSet:
    """Cluster every subdomain into (up to) ``m`` aggregates.

    The eigencount is clamped to the subdomain size when needed.  Each
    subdomain draws an independent seed stream from ``(seed, k)``, so
    results are deterministic and independent of evaluation order.
    """
    all_aggs = []
    all_cents = []
    for k in range(partition.n_subdomains):
        omega = partition.subdomain(k)
        m_k = min(m, len(omega))
        L, d = local_signed_laplacian(graph, omega)
        emb = generalized_eigs(L, d, m_k, subdomain=k)
        sub_seed = np.random.default_rng([seed, k]).integers(2 ** 63)
        groups = kmeans_embed(emb, m_k, seed=sub_seed)
        aggs = [IndexSet(np.sort(omega.ids[g]), graph.n_vertices) for g in groups]
        emb_rows = [_normalize_rows(emb.vectors)[np.sort(g)] for g in groups]
        cents = select_centroids(
            aggs,
            graph.coords,
            embedding_rows=emb_rows,
            mode=centroid_mode if graph.coords is not None else "physical",
        )
        all_aggs.append(tuple(aggs))
        all_cents.append(tuple(cents))
    return ClusterSet(graph.n_vertices, tuple(all_aggs), tuple(all_cents))
