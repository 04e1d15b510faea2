"""Oracle-equivalence checks runnable from the command line.

Each check pits one code path against an independent one on seeded random
inputs and returns ``(name, passed, detail)``.
"""
import math

import numpy as np

from . import ina, routing
from .flcore import global_aggregate_star
from .network import GBPS, ModelSize, Topology, total_latency


def random_instance(rng, K_max=8, M_max=3, uniform=None, direct_cloud=None, size_mb=None):
    """Small random routing instance with every user able to reach something."""
    K = int(rng.integers(1, K_max + 1))
    M = int(rng.integers(1, M_max + 1))
    if uniform is None:
        uniform = bool(rng.integers(2))
    if direct_cloud is None:
        direct_cloud = bool(rng.integers(2))
    if uniform:
        fr = np.full(M, 1.0 * GBPS)
        bk = np.full(M, 1.0 * GBPS)
        wu = 2.0 * GBPS
    else:
        fr = rng.uniform(0.5, 2.0, M) * GBPS
        bk = rng.uniform(0.5, 2.0, M) * GBPS
        wu = rng.uniform(0.5, 2.0) * GBPS
    reach = rng.random((K, M)) < 0.7
    for k in np.flatnonzero(~reach.any(axis=1)):
        reach[k, rng.integers(M)] = True
    topo = Topology(fr, bk, 2.0 * GBPS, wu, reach,
                    edge_xy=rng.uniform(0, 500, (M, 2)), user_xy=rng.uniform(0, 500, (K, 2)),
                    allow_direct_cloud=direct_cloud)
    if size_mb is None:
        size_mb = float(rng.choice([33.0, 88.0, 232.0, 528.0]))
    return routing.RoutingInstance(topo, ModelSize.from_megabytes(size_mb))


def random_messages(rng, K_max=64, d_max=256):
    K = int(rng.integers(1, K_max + 1))
    d = int(rng.integers(1, d_max + 1))
    counts = rng.integers(1, 500, K)
    params = rng.normal(0.0, 1.0, (K, d))
    return [ina.make_local_message(int(n), w) for n, w in zip(counts, params)]


def random_partition(rng, K, M_max=8):
    M = int(rng.integers(1, min(K, M_max) + 1))
    groups = np.concatenate([np.arange(M), rng.integers(0, M, K - M)])
    rng.shuffle(groups)
    return groups


def max_rel_error(got, want):
    got, want = np.asarray(got), np.asarray(want)
    diff = np.abs(got - want)
    denom = np.abs(want)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(diff == 0, 0.0, diff / denom)
    return float(rel.max()) if rel.size else 0.0


def check_codec(seed, n=200):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        msgs = random_messages(rng, 8, 64)
        m = msgs[0] if rng.integers(2) else ina.edge_aggregate(msgs)
        if ina.decode_message(ina.encode_message(m)) != m:
            return "codec round trip", False, "decoded message differs"
    return "codec round trip", True, f"{n} messages"


def check_ina_partition(seed, n=200):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        msgs = random_messages(rng)
        groups = random_partition(rng, len(msgs))
        got, edges = ina.aggregate_partition(msgs, groups)
        want = global_aggregate_star([(m.count, m.params) for m in msgs])
        worst = max(worst, max_rel_error(got, want))
        if len(edges) != len(set(groups.tolist())):
            return "INA partition invariance", False, "cloud message count != nonempty groups"
    return "INA partition invariance", worst <= 1e-9, f"max rel err {worst:.2e}"


def check_lp_sandwich(seed, n=100):
    rng = np.random.default_rng(seed)
    for i in range(n):
        inst = random_instance(rng)
        frac = routing.solve_lp_p4(inst)
        opt = routing.solve_bruteforce(inst).objective
        alg = routing.randomized_round(frac, inst, [seed, i]).objective
        tol = 1e-9 * max(1.0, opt)
        if not (frac.y <= opt + tol and opt <= alg + tol):
            return "LP sandwich", False, f"instance {i}: y={frac.y} opt={opt} alg={alg}"
    return "LP sandwich", True, f"{n} instances"


def check_lp_aggregation(seed, n=50):
    rng = np.random.default_rng(seed)
    for i in range(n):
        inst = random_instance(rng)
        a = routing.solve_lp_p4(inst, aggregate=True).y
        b = routing.solve_lp_p4(inst, aggregate=False).y
        if not math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-12):
            return "LP class aggregation", False, f"instance {i}: {a} vs {b}"
    return "LP class aggregation", True, f"{n} instances"


def check_p2_vs_total(seed, n=200):
    rng = np.random.default_rng(seed)
    for i in range(n):
        inst = random_instance(rng)
        reach = inst.view.column_reachable()
        pick = np.array([rng.choice(np.flatnonzero(row)) for row in reach], dtype=np.int64)
        A = np.zeros(reach.shape, dtype=bool)
        A[np.arange(inst.K), pick] = True
        R = routing.recover_rates(A, inst.view)
        t = total_latency(A, R, inst.size, inst.view, True).total
        if t != routing.p2_objective(A, inst):
            return "equal-rate objective", False, f"instance {i} differs"
    return "equal-rate objective", True, f"{n} associations"


CHECKS = (check_codec, check_ina_partition, check_lp_sandwich, check_lp_aggregation,
          check_p2_vs_total)


def run_all(seed=0):
    return [chk(seed) for chk in CHECKS]
