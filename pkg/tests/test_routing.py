import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import D232, line_topology
from inafl import routing
from inafl.errors import (InfeasibleInstanceError, InvalidInputError, MalformedSolutionError,
                          SizeGuardError)
from inafl.network import GBPS, Topology, association_from_assignment, total_latency
from inafl.selftest import random_instance

T = 1.856  # D / (1 Gb/s) for D = 232 MB


def _inst(*args, **kw):
    return routing.RoutingInstance(line_topology(*args, **kw), D232)


def _brute_p2(inst):
    """Independent exhaustive minimum of the equal-split objective."""
    reach = inst.view.column_reachable()
    best = math.inf
    for combo in itertools.product(*[np.flatnonzero(r) for r in reach]):
        A = association_from_assignment(combo, inst.view.n_columns)
        best = min(best, routing.p2_objective(A, inst))
    return best


def test_equal_split_rates():
    topo = line_topology(4, 1)
    R = routing.recover_rates(np.ones((4, 1), dtype=bool), topo)
    np.testing.assert_allclose(R, 0.25 * GBPS)
    R = routing.recover_rates(np.ones((1, 1), dtype=bool), line_topology(1, 1))
    assert R[0, 0] == GBPS


def test_p2_all_on_one_edge():
    inst = _inst(4, 1)
    assert routing.p2_objective(np.ones((4, 1), dtype=bool), inst) == pytest.approx(4 * T + T)
    assert routing.p2_objective(np.ones((4, 1), dtype=bool), inst) == pytest.approx(9.28)


def test_p2_one_user_per_edge():
    inst = _inst(3, 3)
    assert routing.p2_objective(np.eye(3, dtype=bool), inst) == pytest.approx(2 * T)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_p2_equals_total_latency_exactly(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng)
    reach = inst.view.column_reachable()
    pick = [rng.choice(np.flatnonzero(r)) for r in reach]
    A = association_from_assignment(pick, inst.view.n_columns)
    rep = total_latency(A, routing.recover_rates(A, inst.view), inst.size, inst.view, True)
    assert routing.p2_objective(A, inst) == rep.total


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_equal_split_beats_random_rates(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng)
    topo = inst.view
    pick = [rng.choice(np.flatnonzero(r)) for r in topo.column_reachable()]
    A = association_from_assignment(pick, topo.n_columns)
    eq = total_latency(A, routing.recover_rates(A, topo), inst.size, topo, True).fronthaul
    fr = topo.column_fronthaul()
    for _ in range(20):
        R = np.zeros(A.shape)
        for c in np.flatnonzero(A.any(axis=0)):
            users = np.flatnonzero(A[:, c])
            R[users, c] = rng.dirichlet(np.ones(users.size)) * fr[c] * rng.uniform(0.5, 1.0)
        alt = total_latency(A, R, inst.size, topo, True).fronthaul
        assert np.all(eq <= alt * (1 + 1e-12))


def test_lp_single_user():
    frac = routing.solve_lp_p4(_inst(1, 1))
    assert frac.y == pytest.approx(2 * T)
    np.testing.assert_allclose(frac.A_frac, [[1.0]])


def test_lp_symmetric_two_by_two_lower_bounds_optimum():
    inst = _inst(2, 2)
    frac = routing.solve_lp_p4(inst)
    np.testing.assert_allclose(frac.A_frac.sum(axis=1), 1.0)
    # fronthaul term of one user plus half a backhaul leg, the envelope value
    assert frac.y == pytest.approx(T + T / 2)
    assert frac.y <= _brute_p2(inst) == pytest.approx(2 * T)


def test_lp_unreachable_user_named():
    reach = np.array([[True, False], [False, False], [True, True]])
    with pytest.raises(InfeasibleInstanceError, match="user 1"):
        routing.solve_lp_p4(_inst(3, 2, reach=reach))


@pytest.mark.parametrize("seed", range(30))
def test_lp_aggregated_matches_per_user(seed, backend):
    inst = random_instance(np.random.default_rng(seed))
    agg = routing.solve_lp_p4(inst, aggregate=True, backend=backend)
    full = routing.solve_lp_p4(inst, aggregate=False, backend=backend)
    assert agg.y == pytest.approx(full.y, rel=1e-9)
    for frac in (agg, full):
        np.testing.assert_allclose(frac.A_frac.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(frac.A_frac[~inst.view.column_reachable()] == 0)


@pytest.mark.parametrize("seed", range(40))
def test_lp_is_lower_bound(seed):
    inst = random_instance(np.random.default_rng(1000 + seed), K_max=6)
    frac = routing.solve_lp_p4(inst)
    assert frac.y <= _brute_p2(inst) * (1 + 1e-9)


def test_fill_rows_is_row_stochastic():
    rows = routing._fill_rows(np.array([1.5, 0.0, 2.5]), 4)
    np.testing.assert_allclose(rows.sum(axis=1), 1.0)
    np.testing.assert_allclose(rows.sum(axis=0), [1.5, 0.0, 2.5])
    assert np.count_nonzero((rows > 0) & (rows < 1)) == 2


def _frac(A, y=1.0):
    A = np.asarray(A, dtype=float)
    return routing.FractionalSolution(A_frac=A, y=y, gamma=np.zeros(A.shape[1]))


def test_round_binary_input_verbatim():
    inst = _inst(3, 2)
    A = np.array([[1, 0], [0, 1], [1, 0]], dtype=float)
    sol = routing.randomized_round(_frac(A), inst, 123)
    np.testing.assert_array_equal(sol.A, A.astype(bool))


def test_round_half_half_frequencies():
    rng = np.random.default_rng(2024)
    picks = routing.round_rows(np.full((100_000, 2), 0.5), rng)
    share = np.mean(picks == 0)
    assert abs(share - 0.5) <= 0.01


def test_round_deterministic_row():
    inst = _inst(1, 2)
    for seed in range(50):
        sol = routing.randomized_round(_frac([[1.0, 0.0]]), inst, seed)
        assert sol.assignment[0] == 0
    # a nonbinary matrix with a point-mass row must still honor it
    picks = routing.round_rows(np.array([[1.0, 0.0], [0.3, 0.7]] * 500), np.random.default_rng(0))
    assert np.all(picks[::2] == 0)


def test_round_zero_row_rejected():
    inst = _inst(2, 2)
    with pytest.raises(MalformedSolutionError):
        routing.randomized_round(_frac([[0.0, 0.0], [0.4, 0.6]]), inst, 0)


def test_round_shape_mismatch_rejected():
    with pytest.raises(MalformedSolutionError):
        routing.randomized_round(_frac([[0.5, 0.5]]), _inst(2, 2), 0)


def test_round_never_uses_unreachable_column():
    reach = np.array([[True, False, True], [False, True, True]] * 20)
    inst = _inst(40, 3, reach=reach)
    frac = routing.solve_lp_p4(inst)
    for t in range(10):
        sol = routing.randomized_round(frac, inst, [7, t])
        assert not np.any(sol.A & ~reach)


def test_single_trial_is_one_rounding():
    inst = random_instance(np.random.default_rng(5), K_max=8)
    frac = routing.solve_lp_p4(inst)
    one = routing.solve_inc(inst, rng_seed=9, num_rounding_trials=1)
    raw = routing.randomized_round(frac, inst, [9, 0])
    np.testing.assert_array_equal(one.A, raw.A)
    assert one.objective == raw.objective


@pytest.mark.parametrize("seed", range(20))
def test_inc_bracketed_by_bounds(seed):
    inst = random_instance(np.random.default_rng(50 + seed))
    sol = routing.solve_inc(inst, rng_seed=seed)
    assert sol.y_dagger <= sol.objective * (1 + 1e-9)
    assert sol.objective == routing.p2_objective(sol.A, inst)
    assert np.all(sol.A.sum(axis=1) == 1)


def test_more_trials_never_hurt():
    inst = random_instance(np.random.default_rng(77), K_max=8)
    objs = [routing.solve_inc(inst, 3, n).objective for n in (1, 4, 16)]
    assert objs[0] >= objs[1] >= objs[2]


def test_inc_deterministic():
    inst = random_instance(np.random.default_rng(8))
    a = routing.solve_inc(inst, rng_seed=4)
    b = routing.solve_inc(inst, rng_seed=4)
    assert a.A.tobytes() == b.A.tobytes() and a.R.tobytes() == b.R.tobytes()
    assert a.objective == b.objective


def test_trials_must_be_positive():
    with pytest.raises(InvalidInputError):
        routing.solve_inc(_inst(1, 1), num_rounding_trials=0)


def test_bruteforce_single_user_argmin():
    topo = Topology([1 * GBPS, 2 * GBPS, 1.5 * GBPS], [1 * GBPS, 1 * GBPS, 4 * GBPS],
                    2 * GBPS, 2 * GBPS, np.ones((1, 3), dtype=bool))
    inst = routing.RoutingInstance(topo, D232)
    costs = [D232.bits / f + D232.bits / b for f, b in zip(topo.fronthaul, topo.backhaul)]
    sol = routing.solve_bruteforce(inst)
    assert sol.assignment[0] == int(np.argmin(costs))
    assert sol.objective == pytest.approx(min(costs))


def test_bruteforce_three_users_two_edges():
    sol = routing.solve_bruteforce(_inst(3, 2))
    assert sorted(np.bincount(sol.assignment, minlength=2)) == [1, 2]
    assert sol.objective == pytest.approx(3 * T)
    # ties go to the lexicographically smallest vector
    np.testing.assert_array_equal(sol.assignment, [0, 0, 1])


@pytest.mark.parametrize("seed", range(25))
def test_bruteforce_matches_independent_enumeration(seed, backend):
    inst = random_instance(np.random.default_rng(300 + seed), K_max=6)
    sol = routing.solve_bruteforce(inst, backend=backend)
    assert sol.objective == _brute_p2(inst)


def test_bruteforce_size_guard():
    with pytest.raises(SizeGuardError):
        routing.solve_bruteforce(_inst(20, 3), limit=10**6)


def test_only_cloud_closed_form():
    for K in (1, 10, 1000):
        sol = routing.assign_only_cloud(_inst(K, 9))
        assert sol.objective == pytest.approx(K * D232.bits / (2 * GBPS))
    assert routing.assign_only_cloud(_inst(1000, 9)).objective == pytest.approx(928.0, rel=0.01)


def test_nearest_edge_tie_goes_to_lowest_index():
    topo = Topology([GBPS, GBPS], [GBPS, GBPS], 2 * GBPS, 2 * GBPS, np.ones((1, 2), dtype=bool),
                    edge_xy=[[0.0, 0.0], [10.0, 0.0]], user_xy=[[5.0, 3.0]])
    sol = routing.assign_nearest_edge(routing.RoutingInstance(topo, D232))
    assert sol.assignment[0] == 0


def test_nearest_edge_single_edge_formula():
    K = 7
    sol = routing.assign_nearest_edge(_inst(K, 1))
    assert sol.objective == pytest.approx(K * T + K * T)


def test_nearest_edge_respects_reachability():
    topo = Topology([GBPS, GBPS], [GBPS, GBPS], 2 * GBPS, 2 * GBPS, np.array([[False, True]]),
                    edge_xy=[[0.0, 0.0], [10.0, 0.0]], user_xy=[[1.0, 0.0]])
    assert routing.assign_nearest_edge(routing.RoutingInstance(topo, D232)).assignment[0] == 1
    dead = Topology([GBPS], [GBPS], 2 * GBPS, 2 * GBPS, np.array([[True], [False]]),
                    edge_xy=[[0.0, 0.0]], user_xy=[[1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(InfeasibleInstanceError, match="user 1"):
        routing.assign_nearest_edge(routing.RoutingInstance(dead, D232))


@pytest.mark.parametrize("seed", range(20))
def test_non_inc_never_beats_inc_association(seed):
    inst = random_instance(np.random.default_rng(seed), direct_cloud=False)
    non = routing.assign_nearest_edge(inst)
    # same association with edge aggregation on can only be faster
    assert routing.p2_objective(non.A, inst) <= non.objective


def test_theorem2_bound_values():
    assert routing.theorem2_bound(math.e ** 2, 1.0) == pytest.approx(7.0)
    with pytest.raises(InvalidInputError):
        routing.theorem2_bound(1, 1.0)
    with pytest.raises(InvalidInputError):
        routing.theorem2_bound(10, 0.0)


def test_selected_users_subset():
    topo = line_topology(5, 2)
    inst = routing.RoutingInstance(topo, D232, selected_users=[4, 1])
    assert inst.K == 2 and inst.view.n_users == 2
    with pytest.raises(InvalidInputError):
        routing.RoutingInstance(topo, D232, selected_users=[1, 1])
    with pytest.raises(InvalidInputError):
        routing.RoutingInstance(topo, D232, selected_users=[5])


@pytest.mark.parametrize("seed", range(15))
def test_lp_matches_highs(seed):
    optimize = pytest.importorskip("scipy.optimize")
    inst = random_instance(np.random.default_rng(900 + seed), K_max=30, M_max=4)
    c, A_ub, b_ub, A_eq, b_eq, _ = routing.build_p4(inst, aggregate=False)
    ref = optimize.linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, method="highs")
    assert ref.status == 0
    assert routing.solve_lp_p4(inst, aggregate=False).y == pytest.approx(ref.fun, rel=1e-9)
    assert routing.solve_lp_p4(inst, aggregate=True).y == pytest.approx(ref.fun, rel=1e-9)
