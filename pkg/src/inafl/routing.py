"""Joint user association and fronthaul rate allocation.

Given an association, splitting each edge's fronthaul evenly among its users
is optimal, so the search is over associations only. The min-max problem is
relaxed to a linear program whose optimum ``y_dagger`` lower-bounds every
association. The fractional association is then rounded row by row
(randomized rounding) to a feasible one.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (InfeasibleInstanceError, InvalidInputError,
                     MalformedSolutionError, SizeGuardError)
from .lp import solve_lp
from .network import association_from_assignment, column_loads, total_latency

DEFAULT_TRIALS = 16
BRUTEFORCE_LIMIT = 10**7
_BINARY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class RoutingInstance:
    topo: object  # Topology
    size: object  # ModelSize
    selected_users: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.selected_users is None:
            sel = np.arange(self.topo.n_users)
        else:
            sel = np.asarray(self.selected_users, dtype=np.int64).ravel()
            if sel.size and (sel.min() < 0 or sel.max() >= self.topo.n_users):
                raise InvalidInputError("selected user index out of range")
            if np.unique(sel).size != sel.size:
                raise InvalidInputError("selected users must be distinct")
        object.__setattr__(self, "selected_users", sel)
        object.__setattr__(self, "view", self.topo.subset(sel))

    @property
    def K(self):
        return self.selected_users.size


@dataclass(frozen=True, eq=False)
class FractionalSolution:
    A_frac: np.ndarray  # (K, n_columns) in [0, 1]
    y: float
    gamma: np.ndarray  # per column; 0 on the direct-cloud column
    iterations: int = 0
    aggregated: bool = True


@dataclass(frozen=True, eq=False)
class RoutingSolution:
    A: np.ndarray  # (K, n_columns) bool
    R: np.ndarray  # (K, n_columns) bits/s
    objective: float
    topo: object  # the Topology (column layout) A refers to
    ina_enabled: bool = True
    y_dagger: float = None
    method: str = ""

    @property
    def assignment(self):
        return self.A.argmax(axis=1)

    def report(self, size):
        return total_latency(self.A, self.R, size, self.topo, self.ina_enabled)


def recover_rates(A, topo):
    """Equal split of each column's fronthaul among the users associated with it."""
    A = np.asarray(A, dtype=bool)
    loads = column_loads(A)
    fr = topo.column_fronthaul()
    R = np.zeros(A.shape)
    busy = loads > 0
    per_user = np.zeros_like(fr)
    per_user[busy] = fr[busy] / loads[busy]
    R[A] = np.broadcast_to(per_user, A.shape)[A]
    return R


def p2_objective(A, instance):
    """Worst column latency of ``A`` under equal-split rates and edge aggregation."""
    topo = instance.view
    loads = column_loads(A)
    D = instance.size.bits
    fr = topo.column_fronthaul()
    bk = topo.column_backhaul()
    worst = 0.0
    for c in range(loads.size):
        s = int(loads[c])
        if s:
            rate = fr[c] / s
            worst = max(worst, float(D / rate + min(D / bk[c], D * s / bk[c])))
    return worst


def _solution(A, instance, method, y_dagger=None):
    topo = instance.view
    return RoutingSolution(A=A, R=recover_rates(A, topo), objective=p2_objective(A, instance),
                           topo=topo, ina_enabled=True, y_dagger=y_dagger, method=method)


# ---------------------------------------------------------------------------
# linear relaxation


def _user_classes(reach, aggregate):
    """Group users with identical allowed-column sets.

    Returns (class rows, inverse index, class sizes). Without aggregation every
    user is its own class.
    """
    if not aggregate:
        K = reach.shape[0]
        return reach, np.arange(K), np.ones(K, dtype=np.int64)
    rows, inverse, counts = np.unique(reach, axis=0, return_inverse=True, return_counts=True)
    return rows, inverse.ravel(), counts.astype(np.int64)


def build_p4(instance, aggregate=True):
    """Assemble the relaxed min-max LP.

    Variables are ``x[g, c]`` (users of class g sent to column c, allowed pairs
    only), then ``y``, then one ``gamma`` per column with a backhaul leg.
    Besides the upper bounds on gamma, each gamma is bounded below by
    ``D/bk * load / N_c`` (N_c = users able to reach column c). That is the
    convex envelope of the integer backhaul term, so the LP stays a relaxation
    while pinning gamma to its true value on single-user columns.
    """
    topo = instance.view
    D = instance.size.bits
    fr = topo.column_fronthaul()
    bk = topo.column_backhaul()
    reach = topo.column_reachable()
    ncol = topo.n_columns
    classes, inverse, sizes = _user_classes(reach, aggregate)

    pairs = [(g, c) for g in range(classes.shape[0]) for c in np.flatnonzero(classes[g])]
    nx = len(pairs)
    has_gamma = np.isfinite(bk)
    gamma_idx = np.full(ncol, -1)
    gamma_idx[has_gamma] = nx + 1 + np.arange(int(has_gamma.sum()))
    y_idx = nx
    nv = nx + 1 + int(has_gamma.sum())

    col_of = np.array([c for _, c in pairs], dtype=np.int64)
    grp_of = np.array([g for g, _ in pairs], dtype=np.int64)

    reach_count = np.zeros(ncol)
    for g in range(classes.shape[0]):
        reach_count[classes[g]] += sizes[g]

    A_eq = np.zeros((classes.shape[0], nv))
    if nx:
        A_eq[grp_of, np.arange(nx)] = 1.0
    b_eq = sizes.astype(np.float64)

    ub_rows, b_ub = [], []
    for c in range(ncol):
        on_c = np.flatnonzero(col_of == c)
        row = np.zeros(nv)
        row[on_c] = D / fr[c]
        row[y_idx] = -1.0
        if has_gamma[c]:
            row[gamma_idx[c]] = 1.0
        ub_rows.append(row)
        b_ub.append(0.0)
        if not has_gamma[c]:
            continue
        unit = D / bk[c]
        row = np.zeros(nv)
        row[gamma_idx[c]] = 1.0
        ub_rows.append(row)
        b_ub.append(unit)
        row = np.zeros(nv)
        row[gamma_idx[c]] = 1.0
        row[on_c] = -unit
        ub_rows.append(row)
        b_ub.append(0.0)
        if reach_count[c] > 0:
            row = np.zeros(nv)
            row[on_c] = unit / reach_count[c]
            row[gamma_idx[c]] = -1.0
            ub_rows.append(row)
            b_ub.append(0.0)

    c_vec = np.zeros(nv)
    c_vec[y_idx] = 1.0
    layout = dict(pairs=pairs, col_of=col_of, grp_of=grp_of, inverse=inverse, sizes=sizes,
                  y_idx=y_idx, gamma_idx=gamma_idx, n_classes=classes.shape[0])
    return c_vec, np.array(ub_rows), np.array(b_ub), A_eq, b_eq, layout


def _fill_rows(amounts, n_users):
    """Spread per-column amounts (summing to n_users) over users in order.

    User i covers the interval [i, i+1) of the cumulative amount line, so at
    most one user per column boundary ends up fractional.
    """
    bounds = np.concatenate([[0.0], np.cumsum(amounts)])
    bounds *= n_users / bounds[-1]
    snapped = np.round(bounds)
    close = np.abs(bounds - snapped) <= 1e-9 * max(1.0, n_users)
    bounds[close] = snapped[close]
    i = np.arange(n_users, dtype=np.float64)[:, None]
    lo = np.maximum(i, bounds[None, :-1])
    hi = np.minimum(i + 1.0, bounds[None, 1:])
    return np.clip(hi - lo, 0.0, 1.0)


def solve_lp_p4(instance, aggregate=True, backend=None):
    """Optimal solution of the relaxed routing LP.

    With ``aggregate`` the LP is written over classes of users sharing the same
    reachable columns (the LP depends on users only through these classes) and
    mapped back to users by ordered filling, which keeps the number of
    fractional rows small. ``aggregate=False`` solves the per-user LP directly.
    """
    instance.view.check_reachability()
    topo = instance.view
    ncol = topo.n_columns
    K = instance.K
    c_vec, A_ub, b_ub, A_eq, b_eq, lay = build_p4(instance, aggregate)
    res = solve_lp(c_vec, A_ub, b_ub, A_eq, b_eq, backend=backend)
    x = res.x

    per_class = np.zeros((lay["n_classes"], ncol))
    nx = len(lay["pairs"])
    per_class[lay["grp_of"], lay["col_of"]] = x[:nx]

    A_frac = np.zeros((K, ncol))
    inverse = lay["inverse"]
    for g in range(lay["n_classes"]):
        users = np.flatnonzero(inverse == g)
        A_frac[users] = _fill_rows(per_class[g], users.size)

    gamma = np.zeros(ncol)
    has = lay["gamma_idx"] >= 0
    gamma[has] = x[lay["gamma_idx"][has]]
    return FractionalSolution(A_frac=A_frac, y=float(x[lay["y_idx"]]), gamma=gamma,
                              iterations=res.iterations, aggregated=aggregate)


# ---------------------------------------------------------------------------
# rounding


def is_binary(A_frac, tol=_BINARY_TOL):
    return bool(np.all((A_frac <= tol) | (A_frac >= 1.0 - tol)))


def round_rows(A_frac, rng):
    """Pick exactly one column per row with probabilities given by the row."""
    P = np.clip(np.asarray(A_frac, dtype=np.float64), 0.0, None)
    mass = P.sum(axis=1)
    dead = np.flatnonzero(~(mass > 0))
    if dead.size:
        raise MalformedSolutionError(f"row {int(dead[0])} has no probability mass")
    P = P / mass[:, None]
    cum = np.cumsum(P, axis=1)
    u = rng.random(P.shape[0])
    pick = (cum <= u[:, None]).sum(axis=1)
    last_positive = P.shape[1] - 1 - np.argmax(P[:, ::-1] > 0, axis=1)
    return np.minimum(pick, last_positive)


def randomized_round(frac, instance, rng_seed):
    """Turn a fractional association into a binary one, one row at a time.

    A binary ``frac`` is kept as is; otherwise each user independently picks a
    single column with the probabilities of its row.
    """
    ncol = instance.view.n_columns
    A_frac = np.asarray(frac.A_frac, dtype=np.float64)
    if A_frac.shape != (instance.K, ncol):
        raise MalformedSolutionError("fractional solution does not match the instance")
    if is_binary(A_frac):
        A = A_frac >= 0.5
        if not np.all(A.sum(axis=1) == 1):
            raise MalformedSolutionError("binary solution is not row-stochastic")
    else:
        pick = round_rows(A_frac, np.random.default_rng(rng_seed))
        A = association_from_assignment(pick, ncol)
    return _solution(A, instance, "randomized_round", y_dagger=frac.y)


def solve_inc(instance, rng_seed=0, num_rounding_trials=DEFAULT_TRIALS, aggregate=True):
    """LP relaxation once, then the best of ``num_rounding_trials`` roundings.

    Trial t draws from the seed ``(rng_seed, t)``; ties go to the lowest trial.
    """
    if num_rounding_trials < 1:
        raise InvalidInputError("need at least one rounding trial")
    frac = solve_lp_p4(instance, aggregate=aggregate)
    return best_rounding(frac, instance, rng_seed, num_rounding_trials)


def best_rounding(frac, instance, rng_seed, num_rounding_trials):
    best = None
    for t in range(num_rounding_trials):
        sol = randomized_round(frac, instance, [int(rng_seed), t])
        if best is None or sol.objective < best.objective:
            best = sol
        if is_binary(frac.A_frac):
            break
    return RoutingSolution(A=best.A, R=best.R, objective=best.objective, topo=best.topo,
                           ina_enabled=True, y_dagger=frac.y, method="inc")


# ---------------------------------------------------------------------------
# exact search and baselines


def solve_bruteforce(instance, limit=BRUTEFORCE_LIMIT, backend=None):
    """Exhaustive minimizer of the equal-rate objective.

    Ties resolve to the lexicographically smallest assignment vector (user 0's
    column index most significant).
    """
    topo = instance.view
    topo.check_reachability()
    reach = topo.column_reachable()
    nchoice = reach.sum(axis=1).astype(np.int64)
    total = math.prod(int(v) for v in nchoice)
    if total > limit:
        raise SizeGuardError(f"{total} assignments exceed the enumeration limit {limit}")
    K = instance.K
    if K == 0:
        A = np.zeros((0, topo.n_columns), dtype=bool)
        return _solution(A, instance, "bruteforce")
    width = int(nchoice.max())
    choices = np.zeros((K, width), dtype=np.int64)
    for k in range(K):
        cols = np.flatnonzero(reach[k])
        choices[k, :cols.size] = cols
    if backend == "numpy":
        fn = kernels.bruteforce_np
    elif backend == "numba":
        fn = kernels.bruteforce_nb
    else:
        fn = kernels.bruteforce
    _, assign = fn(choices, nchoice, float(instance.size.bits),
                   topo.column_fronthaul(), topo.column_backhaul())
    A = association_from_assignment(assign, topo.n_columns)
    return _solution(A, instance, "bruteforce")


def assign_only_cloud(instance):
    """Every user uploads straight to the cloud over its shared uplink."""
    topo = instance.view.with_direct_cloud(True)
    A = np.zeros((instance.K, topo.n_columns), dtype=bool)
    A[:, 0] = True
    R = recover_rates(A, topo)
    rep = total_latency(A, R, instance.size, topo, ina_enabled=False)
    return RoutingSolution(A=A, R=R, objective=rep.total, topo=topo, ina_enabled=False,
                           method="only_cloud")


def assign_nearest_edge(instance):
    """Each user joins its geometrically nearest reachable edge; edges just forward."""
    topo = instance.view.with_direct_cloud(False)
    if topo.user_xy is None or topo.edge_xy is None:
        raise InvalidInputError("nearest-edge association needs user and edge coordinates")
    dist = np.linalg.norm(topo.user_xy[:, None, :] - topo.edge_xy[None, :, :], axis=2)
    dist = np.where(topo.reachable, dist, np.inf)
    if instance.K:
        dead = np.flatnonzero(np.isinf(dist).all(axis=1))
        if dead.size:
            raise InfeasibleInstanceError(f"user {int(dead[0])} cannot reach any edge node")
    A = association_from_assignment(np.argmin(dist, axis=1) if instance.K else [],
                                    topo.n_columns)
    R = recover_rates(A, topo)
    rep = total_latency(A, R, instance.size, topo, ina_enabled=False)
    return RoutingSolution(A=A, R=R, objective=rep.total, topo=topo, ina_enabled=False,
                           method="non_inc")


def theorem2_bound(K, y_dagger):
    """Approximation factor ``2 ln K / y_dagger + 3`` (y_dagger in seconds)."""
    if K < 2:
        raise InvalidInputError("the bound needs K >= 2")
    if not y_dagger > 0:
        raise InvalidInputError("the bound needs a positive LP value")
    return 2.0 * math.log(K) / y_dagger + 3.0
