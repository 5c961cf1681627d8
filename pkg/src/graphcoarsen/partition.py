"""Balanced graph partitioning and oversampled regions.

The partitioner does recursive coordinate bisection with pair-swap
boundary refinement on the absolute edge-cut (swaps keep sizes exact, so
balance survives refinement), and falls back to capacity-limited BFS
growth when the graph carries no coordinates.  Subdomain connectivity is
best effort: small stranded fragments are moved to a neighboring
subdomain when balance allows, otherwise reported.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .exceptions import DisconnectedGraphError, RepairWarning
from .graph import IndexSet, WeightedGraph

__all__ = ["Partition", "partition_balanced", "oversample", "graph_distance_oversample"]


@dataclass(frozen=True)
class Partition:
    """Disjoint cover of the vertex set into balanced subdomains."""

    n_vertices: int
    n_subdomains: int
    assignment: np.ndarray
    oversampled: tuple[IndexSet, ...] | None = None
    delta_h: float | None = None
    oversample_mode: str | None = None
    balance_tol: float = 0.1
    disconnected: tuple[int, ...] = ()

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        object.__setattr__(self, "assignment", a)
        if a.shape != (self.n_vertices,):
            raise ValueError("assignment must cover every vertex")
        counts = np.bincount(a, minlength=self.n_subdomains)
        if a.size and (a.min() < 0 or a.max() >= self.n_subdomains):
            raise ValueError("subdomain id out of range")
        if counts.size != self.n_subdomains or np.any(counts == 0):
            raise ValueError("every subdomain must be nonempty")
        if counts.sum() != self.n_vertices:
            raise ValueError("assignment does not cover the vertex set")
        lo, hi = counts.min(), counts.max()
        n, N = self.n_vertices, self.n_subdomains
        rounding = math_ceil_ratio(n, N)
        if hi / lo > max(1.0 + self.balance_tol, rounding) + 1e-12:
            raise ValueError(
                f"unbalanced partition: sizes in [{lo}, {hi}] exceed tolerance"
            )
        if self.oversampled is not None:
            if len(self.oversampled) != self.n_subdomains:
                raise ValueError("one oversampled set per subdomain required")
            for k, os_set in enumerate(self.oversampled):
                if not np.all(os_set.contains(self.subdomain(k).ids)):
                    raise ValueError(f"oversampled set {k} does not contain its subdomain")

    def subdomain(self, k: int) -> IndexSet:
        return IndexSet(np.flatnonzero(self.assignment == k), self.n_vertices)

    @property
    def subdomains(self) -> tuple[IndexSet, ...]:
        return tuple(self.subdomain(k) for k in range(self.n_subdomains))

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.n_subdomains)

    @property
    def balance(self) -> tuple[int, int, float]:
        s = self.sizes
        return int(s.min()), int(s.max()), float(s.mean())


def math_ceil_ratio(n: int, N: int) -> float:
    lo = n // N
    hi = lo + (1 if n % N else 0)
    return hi / max(lo, 1)


def _apportion(n: int, N: int) -> np.ndarray:
    """Target sizes: n // N each, the first n % N get one extra."""
    base = np.full(N, n // N, dtype=np.int64)
    base[: n % N] += 1
    return base


def _require_connected(graph: WeightedGraph) -> None:
    ncomp, labels = connected_components(graph.adjacency, directed=False)
    if ncomp > 1:
        sizes = np.bincount(labels)
        raise DisconnectedGraphError(
            f"graph has {ncomp} connected components with sizes {sizes.tolist()}"
        )


def _refine_bipartition(W: sp.csr_matrix, side: np.ndarray, max_swaps: int) -> None:
    """Pair-swap refinement of a bipartition, in place.

    ``gain[v]`` is the cut reduction from switching ``v`` alone; a swap of
    (a, b) across sides improves the cut by ``gain[a] + gain[b] - 2 w_ab``.
    Sizes never change.  Deterministic: maximal gain, ties to smaller id.
    """
    absW = W.copy()
    absW.data = np.abs(absW.data)
    ext = np.zeros(side.size)  # weight to the other side
    tot = np.asarray(absW.sum(axis=1)).ravel()
    for v in range(side.size):
        nbrs = absW.indices[absW.indptr[v]:absW.indptr[v + 1]]
        wts = absW.data[absW.indptr[v]:absW.indptr[v + 1]]
        ext[v] = wts[side[nbrs] != side[v]].sum()
    gain = 2 * ext - tot
    scale = max(absW.data.max() if absW.nnz else 1.0, 1e-300)

    for _ in range(max_swaps):
        a = _argmax_ties(gain, side)
        b = _argmax_ties(gain, ~side)
        if a < 0 or b < 0:
            break
        w_ab = 0.0
        cols = absW.indices[absW.indptr[a]:absW.indptr[a + 1]]
        hit = np.flatnonzero(cols == b)
        if hit.size:
            w_ab = absW.data[absW.indptr[a] + hit[0]]
        if gain[a] + gain[b] - 2 * w_ab <= 1e-12 * scale:
            break
        for v in (a, b):
            side[v] = ~side[v]
        for v in (a, b):
            nbrs = absW.indices[absW.indptr[v]:absW.indptr[v + 1]]
            wts = absW.data[absW.indptr[v]:absW.indptr[v + 1]]
            ext[v] = wts[side[nbrs] != side[v]].sum()
            gain[v] = 2 * ext[v] - tot[v]
            for u, w in zip(nbrs, wts):
                un = absW.indices[absW.indptr[u]:absW.indptr[u + 1]]
                uw = absW.data[absW.indptr[u]:absW.indptr[u + 1]]
                ext[u] = uw[side[un] != side[u]].sum()
                gain[u] = 2 * ext[u] - tot[u]


def _argmax_ties(values: np.ndarray, mask: np.ndarray) -> int:
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return -1
    sub = values[idx]
    best = sub.max()
    return int(idx[sub == best][0])


def _bisect_coords(graph, ids, targets, labels, out, refine_swaps):
    if len(targets) == 1:
        out[ids] = labels[0]
        return
    half = (len(targets) + 1) // 2
    n_left = int(np.sum(targets[:half]))
    coords = graph.coords[ids]
    extents = coords.max(axis=0) - coords.min(axis=0)
    axis = int(np.argmax(extents))
    order = np.lexsort((ids, coords[:, axis]))
    side = np.zeros(ids.size, dtype=bool)  # True = left block
    side[order[:n_left]] = True

    W = graph.weight_matrix[ids][:, ids].tocsr()
    _refine_bipartition(W, side, refine_swaps)

    _bisect_coords(graph, ids[side], targets[:half], labels[:half], out, refine_swaps)
    _bisect_coords(graph, ids[~side], targets[half:], labels[half:], out, refine_swaps)


def _bfs_growth(graph: WeightedGraph, targets: np.ndarray, seed: int) -> np.ndarray:
    """Capacity-limited multi-source BFS growth for coordinate-free graphs."""
    n = graph.n_vertices
    N = targets.size
    rng = np.random.default_rng(seed)
    adj = graph.adjacency

    # spread seeds by repeated farthest-point search in hop distance
    seeds = [int(rng.integers(n))]
    dist = _bfs_dist(adj, seeds[0])
    for _ in range(1, N):
        far = dist.max()
        cand = np.flatnonzero(dist == far)
        s = int(cand[0])
        seeds.append(s)
        dist = np.minimum(dist, _bfs_dist(adj, s))

    assign = np.full(n, -1, dtype=np.int64)
    remaining = targets.copy()
    frontiers = []
    for k, s in enumerate(seeds):
        assign[s] = k
        remaining[k] -= 1
        frontiers.append([s])

    active = True
    while active:
        active = False
        for k in range(N):
            if remaining[k] <= 0 or not frontiers[k]:
                continue
            new_frontier = []
            for v in frontiers[k]:
                for u in sorted(adj.indices[adj.indptr[v]:adj.indptr[v + 1]]):
                    if assign[u] < 0 and remaining[k] > 0:
                        assign[u] = k
                        remaining[k] -= 1
                        new_frontier.append(u)
            frontiers[k] = new_frontier
            if new_frontier:
                active = True

    # strand leftovers: attach to an adjacent subdomain with spare capacity,
    # else to the smallest adjacent subdomain
    leftovers = np.flatnonzero(assign < 0)
    guard = 0
    while leftovers.size and guard < n:
        guard += 1
        progress = False
        for v in leftovers:
            nbr_subs = {int(assign[u]) for u in graph.neighbors(v) if assign[u] >= 0}
            if not nbr_subs:
                continue
            spare = [k for k in sorted(nbr_subs) if remaining[k] > 0]
            k = spare[0] if spare else min(
                sorted(nbr_subs), key=lambda q: (np.sum(assign == q), q))
            assign[v] = k
            remaining[k] -= 1
            progress = True
        leftovers = np.flatnonzero(assign < 0)
        if not progress:
            break
    if leftovers.size:
        raise DisconnectedGraphError("BFS growth could not reach every vertex")
    return assign


def _bfs_dist(adj: sp.csr_matrix, source: int) -> np.ndarray:
    n = adj.shape[0]
    dist = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
    dist[source] = 0
    frontier = [source]
    d = 0
    while frontier:
        d += 1
        nxt = []
        for v in frontier:
            for u in adj.indices[adj.indptr[v]:adj.indptr[v + 1]]:
                if dist[u] > d:
                    dist[u] = d
                    nxt.append(u)
        frontier = nxt
    return dist


def _repair_fragments(graph, assign, N, balance_tol):
    """Move small disconnected fragments to adjacent subdomains when balance
    allows; return ids of subdomains left disconnected."""
    n = graph.n_vertices
    counts = np.bincount(assign, minlength=N)
    allowance = max(1.0 + balance_tol, math_ceil_ratio(n, N))
    disconnected = []
    for k in range(N):
        ids = np.flatnonzero(assign == k)
        sub = graph.adjacency[ids][:, ids]
        ncomp, labels = connected_components(sub, directed=False)
        if ncomp == 1:
            continue
        comp_sizes = np.bincount(labels)
        main = int(np.argmax(comp_sizes))
        moved_all = True
        for c in range(ncomp):
            if c == main:
                continue
            frag = ids[labels == c]
            nbr_subs = sorted({
                int(assign[u]) for v in frag for u in graph.neighbors(v)
                if assign[u] != k
            })
            moved = False
            for q in nbr_subs:
                new_counts = counts.copy()
                new_counts[k] -= frag.size
                new_counts[q] += frag.size
                if new_counts[k] > 0 and new_counts.max() / new_counts.min() <= allowance:
                    assign[frag] = q
                    counts = new_counts
                    moved = True
                    break
            moved_all = moved_all and moved
        if not moved_all:
            disconnected.append(k)
    if disconnected:
        warnings.warn(
            f"subdomains {disconnected} remain disconnected after refinement",
            RepairWarning,
        )
    return tuple(disconnected)


def partition_balanced(graph: WeightedGraph, n_subdomains: int, seed: int = 0,
                       balance_tol: float = 0.1, refine_swaps: int | None = None
                       ) -> Partition:
    """Split the graph into balanced subdomains, deterministic per seed.

    Requires a connected graph.  Sizes come out within one vertex of each
    other before fragment repair; repair keeps the max/min ratio within
    ``1 + balance_tol`` (or the unavoidable rounding ratio for tiny
    subdomains).
    """
    n = graph.n_vertices
    if not 1 <= n_subdomains <= n:
        raise ValueError("need 1 <= n_subdomains <= n_vertices")
    _require_connected(graph)
    targets = _apportion(n, n_subdomains)
    assign = np.full(n, -1, dtype=np.int64)
    if n_subdomains == 1:
        assign[:] = 0
    elif graph.coords is not None:
        if refine_swaps is None:
            refine_swaps = max(64, n // 10)
        _bisect_coords(graph, np.arange(n, dtype=np.int64), targets,
                       np.arange(n_subdomains), assign, refine_swaps)
    else:
        assign = _bfs_growth(graph, targets, seed)
    disconnected = _repair_fragments(graph, assign, n_subdomains, balance_tol)
    return Partition(n, n_subdomains, assign, balance_tol=balance_tol,
                     disconnected=disconnected)


def oversample(graph: WeightedGraph, partition: Partition, delta_h: float,
               mode: str = "vertex") -> Partition:
    """Fill the oversampled regions by Euclidean distance.

    ``vertex`` mode adds every vertex within ``delta_h`` of some subdomain
    member; ``closure`` mode additionally pulls in each whole subdomain
    that contains such a vertex.
    """
    if graph.coords is None:
        raise ValueError(
            "graph has no coordinates; use graph_distance_oversample instead"
        )
    if delta_h < 0:
        raise ValueError("delta_h must be nonnegative")
    if mode not in ("vertex", "closure"):
        raise ValueError(f"unknown oversample mode: {mode}")
    tree = cKDTree(graph.coords)
    oversampled = []
    for k in range(partition.n_subdomains):
        members = partition.subdomain(k).ids
        hits = tree.query_ball_point(graph.coords[members], r=delta_h)
        ids = set(members.tolist())
        for h in hits:
            ids.update(h)
        if mode == "closure":
            subs = np.unique(partition.assignment[sorted(ids)])
            ids.update(np.flatnonzero(np.isin(partition.assignment, subs)).tolist())
        oversampled.append(IndexSet(np.array(sorted(ids), dtype=np.int64),
                                    graph.n_vertices))
    return replace(partition, oversampled=tuple(oversampled), delta_h=delta_h,
                   oversample_mode=mode)


def graph_distance_oversample(graph: WeightedGraph, partition: Partition,
                              hops: int) -> Partition:
    """Coordinate-free oversampling: BFS layers around each subdomain."""
    if hops < 0:
        raise ValueError("hops must be nonnegative")
    adj = graph.adjacency
    oversampled = []
    for k in range(partition.n_subdomains):
        current = set(partition.subdomain(k).ids.tolist())
        frontier = set(current)
        for _ in range(hops):
            nxt = set()
            for v in frontier:
                nxt.update(adj.indices[adj.indptr[v]:adj.indptr[v + 1]].tolist())
            frontier = nxt - current
            if not frontier:
                break
            current |= frontier
        oversampled.append(IndexSet(np.array(sorted(current), dtype=np.int64),
                                    graph.n_vertices))
    return replace(partition, oversampled=tuple(oversampled), delta_h=float(hops),
                   oversample_mode="hops")
