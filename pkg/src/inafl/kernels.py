"""Hot numeric kernels.

Each kernel exists twice: an explicit-loop body compiled with numba, and a
vectorized numpy body. Both follow the same operation order, so they agree
bit for bit on the inputs the package feeds them. The public names at the
bottom dispatch on ``inafl._jit.USE_NUMBA``.
"""
import numpy as np

from ._jit import USE_NUMBA, njit

SIMPLEX_OPTIMAL = 0
SIMPLEX_UNBOUNDED = 1
SIMPLEX_ITERATION_LIMIT = 2

# consecutive degenerate pivots before switching to Bland's rule for good
_BLAND_AFTER = 50
_RATIO_RTOL = 1e-12


# ---------------------------------------------------------------------------
# compensated weighted sum:  sum_k counts[k] * params[k, :]


def _weighted_sum_loop(counts, params):
    k, d = params.shape
    out = np.empty(d)
    for j in range(d):
        s = 0.0
        c = 0.0
        for i in range(k):
            x = counts[i] * params[i, j]
            t = s + x
            if abs(s) >= abs(x):
                c += (s - t) + x
            else:
                c += (x - t) + s
            s = t
        out[j] = s + c
    return out


def _weighted_sum_numpy(counts, params):
    k, d = params.shape
    s = np.zeros(d)
    c = np.zeros(d)
    for i in range(k):
        x = counts[i] * params[i]
        t = s + x
        c += np.where(np.abs(s) >= np.abs(x), (s - t) + x, (x - t) + s)
        s = t
    return s + c


# ---------------------------------------------------------------------------
# dense tableau simplex iterations
#
# T has shape (m + 1, n + 1): rows 0..m-1 are constraints, row m holds the
# reduced costs of a minimization, column n is the right-hand side. Only
# columns [0, n_enter) may enter the basis.


def _simplex_loop(T, basis, n_enter, tol, max_iter):
    m = T.shape[0] - 1
    rhs = T.shape[1] - 1
    it = 0
    streak = 0
    bland = False
    while it < max_iter:
        col = -1
        if bland:
            for j in range(n_enter):
                if T[m, j] < -tol:
                    col = j
                    break
        else:
            best = -tol
            for j in range(n_enter):
                if T[m, j] < best:
                    best = T[m, j]
                    col = j
        if col < 0:
            return SIMPLEX_OPTIMAL, it

        min_ratio = np.inf
        for i in range(m):
            if T[i, col] > tol:
                r = T[i, rhs] / T[i, col]
                if r < min_ratio:
                    min_ratio = r
        if min_ratio == np.inf:
            return SIMPLEX_UNBOUNDED, it
        window = min_ratio + _RATIO_RTOL * (1.0 + abs(min_ratio))
        row = -1
        for i in range(m):
            if T[i, col] > tol:
                r = T[i, rhs] / T[i, col]
                if r <= window and (row < 0 or basis[i] < basis[row]):
                    row = i

        piv = T[row, col]
        for j in range(rhs + 1):
            T[row, j] = T[row, j] / piv
        for i in range(m + 1):
            if i != row:
                f = T[i, col]
                if f != 0.0:
                    for j in range(rhs + 1):
                        T[i, j] = T[i, j] - f * T[row, j]
                    T[i, col] = 0.0
        T[row, col] = 1.0
        basis[row] = col

        if min_ratio <= tol:
            streak += 1
            if streak > _BLAND_AFTER:
                bland = True
        else:
            streak = 0
        it += 1
    return SIMPLEX_ITERATION_LIMIT, it


def _simplex_numpy(T, basis, n_enter, tol, max_iter):
    m = T.shape[0] - 1
    it = 0
    streak = 0
    bland = False
    while it < max_iter:
        rc = T[m, :n_enter]
        if bland:
            cand = np.flatnonzero(rc < -tol)
            if cand.size == 0:
                return SIMPLEX_OPTIMAL, it
            col = int(cand[0])
        else:
            col = int(np.argmin(rc)) if n_enter else 0
            if n_enter == 0 or not rc[col] < -tol:
                return SIMPLEX_OPTIMAL, it

        colv = T[:m, col]
        ok = colv > tol
        if not ok.any():
            return SIMPLEX_UNBOUNDED, it
        ratios = np.full(m, np.inf)
        ratios[ok] = T[:m, -1][ok] / colv[ok]
        min_ratio = ratios.min()
        window = min_ratio + _RATIO_RTOL * (1.0 + abs(min_ratio))
        tied = np.flatnonzero(ok & (ratios <= window))
        row = int(tied[np.argmin(basis[tied])])

        T[row] = T[row] / T[row, col]
        f = T[:, col].copy()
        f[row] = 0.0
        nz = np.flatnonzero(f)
        T[nz] = T[nz] - f[nz, None] * T[row]
        T[nz, col] = 0.0
        T[row, col] = 1.0
        basis[row] = col

        if min_ratio <= tol:
            streak += 1
            if streak > _BLAND_AFTER:
                bland = True
        else:
            streak = 0
        it += 1
    return SIMPLEX_ITERATION_LIMIT, it


# ---------------------------------------------------------------------------
# exhaustive min-max assignment search
#
# choices[k, :nchoice[k]] lists the columns user k may use. Assignments are
# visited in lexicographic order (user 0 most significant) and the first one
# reaching the minimum is kept. Per-column cost for a load s > 0 is
# D / (fr / s) + min(D / bk, D * s / bk), the equal-rate latency.


def _column_cost(D, fr, bk, s):
    rate = fr / s
    return D / rate + min(D / bk, D * s / bk)


_column_cost_nb = njit(_column_cost) if USE_NUMBA else _column_cost


def _bruteforce_loop(choices, nchoice, D, fr, bk):
    K = choices.shape[0]
    ncol = fr.shape[0]
    idx = np.zeros(K, dtype=np.int64)
    counts = np.zeros(ncol, dtype=np.int64)
    for k in range(K):
        counts[choices[k, 0]] += 1
    best = np.inf
    best_idx = np.zeros(K, dtype=np.int64)
    while True:
        obj = 0.0
        for c in range(ncol):
            s = counts[c]
            if s > 0:
                v = _column_cost_nb(D, fr[c], bk[c], float(s))
                if v > obj:
                    obj = v
        if obj < best:
            best = obj
            best_idx[:] = idx
        k = K - 1
        while k >= 0:
            counts[choices[k, idx[k]]] -= 1
            idx[k] += 1
            if idx[k] < nchoice[k]:
                counts[choices[k, idx[k]]] += 1
                break
            idx[k] = 0
            counts[choices[k, 0]] += 1
            k -= 1
        if k < 0:
            break
    out = np.empty(K, dtype=np.int64)
    for k in range(K):
        out[k] = choices[k, best_idx[k]]
    return best, out


def _bruteforce_numpy(choices, nchoice, D, fr, bk, chunk=1 << 16):
    K = choices.shape[0]
    ncol = fr.shape[0]
    total = int(np.prod(nchoice))
    shape = tuple(int(v) for v in nchoice)
    best = np.inf
    best_assign = None
    users = np.arange(K)
    for start in range(0, total, chunk):
        flat = np.arange(start, min(start + chunk, total))
        digits = np.stack(np.unravel_index(flat, shape), axis=1)
        cols = choices[users, digits]
        n = flat.size
        counts = np.zeros((n, ncol), dtype=np.int64)
        np.add.at(counts, (np.repeat(np.arange(n), K), cols.ravel()), 1)
        s = counts.astype(np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            cost = D / (fr / s) + np.minimum(D / bk, D * s / bk)
        cost[counts == 0] = 0.0
        obj = cost.max(axis=1)
        i = int(np.argmin(obj))
        if obj[i] < best:
            best = float(obj[i])
            best_assign = cols[i].astype(np.int64)
    return best, best_assign


# ---------------------------------------------------------------------------

if USE_NUMBA:
    weighted_sum_nb = njit(_weighted_sum_loop)
    simplex_iterate_nb = njit(_simplex_loop)
    bruteforce_nb = njit(_bruteforce_loop)
    weighted_sum = weighted_sum_nb
    simplex_iterate = simplex_iterate_nb
    bruteforce = bruteforce_nb
else:
    weighted_sum_nb = simplex_iterate_nb = bruteforce_nb = None
    weighted_sum = _weighted_sum_numpy
    simplex_iterate = _simplex_numpy
    bruteforce = _bruteforce_numpy

weighted_sum_np = _weighted_sum_numpy
simplex_iterate_np = _simplex_numpy
bruteforce_np = _bruteforce_numpy
