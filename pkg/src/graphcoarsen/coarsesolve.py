"""Coarse-scale steady and transient solvers and error metrics.

The coarse operator is the symmetric triple product ``P^T A P`` with the
restriction fixed to ``P^T``; the reconstructed fine-scale approximation
is ``P u_c``.  Transient systems use backward Euler with one factorization
reused across the steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._solvers import RefinedLU
from .graph import norm_A
from .interpolation import Prolongation

__all__ = [
    "CoarseModel",
    "TransientConfig",
    "ParabolicResult",
    "galerkin_coarse",
    "solve_steady",
    "solve_fine",
    "solve_parabolic",
    "errors",
    "galerkin_residual",
    "coarse_initial",
]

#: Above this size the fine solver falls back to conjugate gradients.
DIRECT_SOLVE_LIMIT = 50_000


def _as_matrix(P) -> sp.csr_matrix:
    return P.matrix if isinstance(P, Prolongation) else P.tocsr()


@dataclass(frozen=True)
class CoarseModel:
    """Galerkin coarse system with the prolongation that produced it."""

    prolongation: Prolongation | sp.spmatrix
    operator: sp.csr_matrix
    rhs: np.ndarray
    capacity: sp.csr_matrix | None = None

    @property
    def n_coarse(self) -> int:
        return self.operator.shape[0]

    @property
    def matrix(self) -> sp.csr_matrix:
        return _as_matrix(self.prolongation)


@dataclass(frozen=True)
class TransientConfig:
    """Uniform backward-Euler time grid."""

    tau: float
    n_steps: int

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("time step must be positive")
        if self.n_steps < 1:
            raise ValueError("need at least one step")

    @property
    def total_time(self) -> float:
        return self.tau * self.n_steps

    @property
    def times(self) -> np.ndarray:
        return self.tau * np.arange(self.n_steps + 1)


@dataclass(frozen=True)
class ParabolicResult:
    """Trajectory on the fine space plus, for coarse runs, coarse states."""

    times: np.ndarray
    states: np.ndarray  # (n_steps + 1, n) fine-space values
    coarse_states: np.ndarray | None = None


def galerkin_coarse(A: sp.spmatrix, f: np.ndarray, P,
                    capacity: np.ndarray | sp.spmatrix | None = None) -> CoarseModel:
    """Assemble ``P^T A P`` and ``P^T f`` (plus ``P^T C P`` when asked).

    The triple product of a symmetric operator is symmetrized exactly after
    an asymmetry check at 1e-10 relative.
    """
    Pm = _as_matrix(P)
    if Pm.shape[0] != A.shape[0]:
        raise ValueError("prolongation and operator sizes do not match")
    A_c = (Pm.T @ (A @ Pm)).tocsr()
    asym = np.abs((A_c - A_c.T).tocoo().data)
    scale = max(np.abs(A_c.tocoo().data).max() if A_c.nnz else 0.0, 1e-300)
    if asym.size and asym.max() > 1e-10 * scale:
        raise ValueError("coarse operator lost symmetry beyond tolerance")
    A_c = ((A_c + A_c.T) * 0.5).tocsr()
    f_c = np.asarray(Pm.T @ np.asarray(f, dtype=np.float64)).ravel()
    C_c = None
    if capacity is not None:
        C = sp.diags(capacity) if np.ndim(capacity) == 1 else capacity
        C_c = (Pm.T @ (C @ Pm)).tocsr()
        C_c = ((C_c + C_c.T) * 0.5).tocsr()
    return CoarseModel(P, A_c, f_c, capacity=C_c)


def solve_steady(model: CoarseModel) -> tuple[np.ndarray, np.ndarray]:
    """Direct coarse solve; returns ``(u_c, P u_c)``."""
    lu = RefinedLU(model.operator.tocsc(), context="coarse operator")
    u_c = lu.solve(model.rhs)
    u_ms = np.asarray(model.matrix @ u_c).ravel()
    return u_c, u_ms


def solve_fine(A: sp.spmatrix, f: np.ndarray,
               direct_limit: int = DIRECT_SOLVE_LIMIT) -> np.ndarray:
    """Reference fine-scale solve: refined direct factorization at desk
    scale, diagonally preconditioned CG (rtol 1e-12) beyond it."""
    f = np.asarray(f, dtype=np.float64)
    if A.shape[0] <= direct_limit:
        return RefinedLU(A.tocsc(), context="fine operator").solve(f)
    M = spla.LinearOperator(A.shape, lambda x: x / A.diagonal())
    u, info = spla.cg(A, f, rtol=1e-12, maxiter=20 * A.shape[0], M=M)
    if info != 0:
        raise RuntimeError(f"CG did not converge (info = {info})")
    return u


def coarse_initial(P, u0: np.ndarray) -> np.ndarray:
    """Least-squares coarse representation of the initial state:
    ``argmin || u0 - P v ||`` via the normal equations."""
    Pm = _as_matrix(P)
    G = (Pm.T @ Pm).tocsc()
    return RefinedLU(G, context="normal equations").solve(
        np.asarray(Pm.T @ np.asarray(u0, dtype=np.float64)).ravel())


def solve_parabolic(capacity, A: sp.spmatrix, f: np.ndarray,
                    cfg: TransientConfig, P=None,
                    u0: np.ndarray | None = None) -> ParabolicResult:
    """Backward Euler for ``C u' + A u = f`` with diagonal capacity.

    Without ``P`` this integrates the fine system; with ``P`` the coarse
    system is assembled, the initial state is projected by least squares,
    and the returned states are the reconstructions ``P u_c``.
    """
    cap = np.asarray(capacity, dtype=np.float64).ravel() if np.ndim(capacity) <= 1 \
        else np.asarray(capacity.diagonal(), dtype=np.float64)
    if np.any(cap <= 0):
        raise ValueError("capacities must be positive")
    n = A.shape[0]
    f = np.asarray(f, dtype=np.float64)
    u_start = np.zeros(n) if u0 is None else np.asarray(u0, dtype=np.float64)

    if P is None:
        M = (sp.diags(cap / cfg.tau) + A).tocsc()
        lu = RefinedLU(M, context="time-step operator")
        states = np.empty((cfg.n_steps + 1, n))
        states[0] = u_start
        u = u_start
        for step in range(cfg.n_steps):
            u = lu.solve(cap * u / cfg.tau + f)
            states[step + 1] = u
        return ParabolicResult(cfg.times, states)

    model = galerkin_coarse(A, f, P, capacity=cap)
    Pm = _as_matrix(P)
    u_c = coarse_initial(P, u_start)
    M_c = (model.capacity / cfg.tau + model.operator).tocsc()
    lu = RefinedLU(M_c, context="coarse time-step operator")
    coarse_states = np.empty((cfg.n_steps + 1, model.n_coarse))
    coarse_states[0] = u_c
    for step in range(cfg.n_steps):
        u_c = lu.solve(np.asarray(model.capacity @ u_c).ravel() / cfg.tau + model.rhs)
        coarse_states[step + 1] = u_c
    states = np.asarray(coarse_states @ Pm.T)
    return ParabolicResult(cfg.times, states, coarse_states=coarse_states)


def errors(u: np.ndarray, u_ms: np.ndarray, A: sp.spmatrix) -> tuple[float, float]:
    """Relative errors in percent: Euclidean ``e1`` and energy ``e2``."""
    u = np.asarray(u, dtype=np.float64)
    u_ms = np.asarray(u_ms, dtype=np.float64)
    denom = np.linalg.norm(u)
    if denom == 0:
        raise ValueError("reference solution must be nonzero")
    e1 = 100.0 * np.linalg.norm(u - u_ms) / denom
    e2 = 100.0 * norm_A(u - u_ms, A) / norm_A(u, A)
    return float(e1), float(e2)


def galerkin_residual(P, A: sp.spmatrix, f: np.ndarray, u_ms: np.ndarray,
                      extended: bool = True) -> float:
    """Max-norm of the restricted residual ``P^T (f - A u_ms)``.

    The true value sits far below double-precision rounding of the fine
    matvec, so by default the residual is evaluated in extended precision
    (the identity itself is not affected, only its observability).
    """
    Pm = _as_matrix(P)
    dtype = np.longdouble if extended else np.float64
    Ax = _matvec(A, np.asarray(u_ms), dtype)
    r = np.asarray(f, dtype=dtype) - Ax
    return float(np.abs(_matvec(Pm.T.tocsr(), r, dtype)).max())


def _matvec(M: sp.spmatrix, x: np.ndarray, dtype) -> np.ndarray:
    C = M.tocoo()
    out = np.zeros(M.shape[0], dtype=dtype)
    np.add.at(out, C.row, C.data.astype(dtype) * x.astype(dtype)[C.col])
    return out
