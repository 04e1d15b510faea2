"""Dense two-phase tableau simplex.

Solves ``min c @ x  s.t.  A_ub @ x <= b_ub,  A_eq @ x == b_eq,  x >= 0``
and returns a basic optimal solution. Pivoting is Dantzig's rule with
lowest-index ties, switching to Bland's rule after a run of degenerate
pivots, so the result is a deterministic function of the input.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import LPInfeasibleError, LPUnboundedError


@dataclass(frozen=True)
class LPResult:
    x: np.ndarray
    objective: float
    basis: np.ndarray  # column index of the basic variable of each kept row
    iterations: int


def _run(T, basis, n_enter, tol, max_iter, iterate):
    status, it = iterate(T, basis, n_enter, tol, max_iter)
    if status == kernels.SIMPLEX_ITERATION_LIMIT:
        raise RuntimeError(f"simplex hit the iteration limit ({max_iter})")
    return status, it


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, *,
             tol=1e-9, max_iter=None, backend=None):
    """Minimize a linear objective over a polyhedron in standard inequality form.

    ``backend`` may be ``"numba"`` or ``"numpy"`` to pin a kernel; by default
    the package-wide selection applies.

    Raises LPInfeasibleError or LPUnboundedError.
    """
    c = np.asarray(c, dtype=np.float64)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=np.float64)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=np.float64)
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=np.float64)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=np.float64)
    if A_ub.shape != (b_ub.size, n) or A_eq.shape != (b_eq.size, n):
        raise ValueError("constraint shapes do not match the objective")

    if backend is None:
        iterate = kernels.simplex_iterate
    elif backend == "numpy":
        iterate = kernels.simplex_iterate_np
    elif backend == "numba":
        if kernels.simplex_iterate_nb is None:
            raise RuntimeError("numba backend unavailable")
        iterate = kernels.simplex_iterate_nb
    else:
        raise ValueError(f"unknown backend {backend!r}")

    m_ub, m_eq = b_ub.size, b_eq.size
    m = m_ub + m_eq
    if max_iter is None:
        max_iter = 50 * (m + n) + 1000

    # columns: structural | slacks | artificials | rhs
    flip_ub = b_ub < 0
    flip_eq = b_eq < 0
    need_art = np.concatenate([flip_ub, np.ones(m_eq, dtype=bool)])
    art_rows = np.flatnonzero(need_art)
    n_art = art_rows.size
    width = n + m_ub + n_art
    T = np.zeros((m + 1, width + 1))
    T[:m_ub, :n] = A_ub
    T[:m_ub, n:n + m_ub] = np.eye(m_ub)
    T[:m_ub, -1] = b_ub
    T[m_ub:m, :n] = A_eq
    T[m_ub:m, -1] = b_eq
    flip = np.concatenate([flip_ub, flip_eq])
    T[:m][flip] *= -1.0

    basis = np.empty(m, dtype=np.int64)
    basis[:m_ub] = n + np.arange(m_ub)
    for j, i in enumerate(art_rows):
        T[i, n + m_ub + j] = 1.0
        basis[i] = n + m_ub + j

    total_it = 0
    if n_art:
        # phase 1: minimize the sum of artificials
        T[m, :] = 0.0
        T[m, n + m_ub:width] = 1.0
        for i in art_rows:
            T[m] -= T[i]
        _, it = _run(T, basis, n + m_ub, tol, max_iter, iterate)
        total_it += it
        scale = 1.0 + np.abs(T[:m, -1]).max(initial=0.0)
        if -T[m, -1] > tol * scale:
            raise LPInfeasibleError(f"infeasible (phase-1 residual {-T[m, -1]:.3e})")

        # drive remaining artificials out; drop rows that are redundant
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if basis[i] >= n + m_ub:
                cand = np.flatnonzero(np.abs(T[i, :n + m_ub]) > tol)
                if cand.size == 0:
                    keep[i] = False
                    continue
                j = int(cand[0])
                T[i] /= T[i, j]
                for r in range(m + 1):
                    if r != i and T[r, j] != 0.0:
                        T[r] -= T[r, j] * T[i]
                        T[r, j] = 0.0
                basis[i] = j
        rows = np.concatenate([np.flatnonzero(keep), [m]])
        T = np.ascontiguousarray(T[rows])
        basis = np.ascontiguousarray(basis[keep])
        m = basis.size

    # phase 2 reduced costs
    cost = np.zeros(width)
    cost[:n] = c
    T[m, :] = 0.0
    T[m, :width] = cost
    for i in range(m):
        cb = cost[basis[i]]
        if cb != 0.0:
            T[m] -= cb * T[i]
    status, it = _run(T, basis, n + m_ub, tol, max_iter, iterate)
    total_it += it
    if status == kernels.SIMPLEX_UNBOUNDED:
        raise LPUnboundedError("objective is unbounded below")

    x_full = np.zeros(width)
    x_full[basis] = T[:m, -1]
    x = x_full[:n].copy()
    x[np.abs(x) < tol] = 0.0
    return LPResult(x=x, objective=float(c @ x), basis=basis.copy(), iterations=total_it)
