"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat N]

Compilation is excluded: every numba kernel runs once before timing.
"""
import argparse
import time

import numpy as np

from inafl import kernels, routing
from inafl.harness import ScenarioConfig, generate_topology
from inafl.network import ModelSize


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def lp_cases():
    for K in (25, 50, 100, 200):
        topo = generate_topology(ScenarioConfig(K=K, seed=1))
        inst = routing.RoutingInstance(topo, ModelSize.from_megabytes(232))
        yield f"simplex, per-user LP, K={K}", (
            lambda b, inst=inst: routing.solve_lp_p4(inst, aggregate=False, backend=b))


def brute_cases():
    for K in (6, 8, 9):
        topo = generate_topology(ScenarioConfig(K=K, seed=2, grid=(2, 2), area_m=200,
                                                radius_m=200))
        inst = routing.RoutingInstance(topo, ModelSize.from_megabytes(232))
        n = int(np.prod(topo.column_reachable().sum(axis=1)))
        yield f"brute force, {n} assignments", (
            lambda b, inst=inst: routing.solve_bruteforce(inst, backend=b))


def sum_cases():
    rng = np.random.default_rng(0)
    for K, d in ((64, 256), (1000, 10_000)):
        counts = rng.integers(1, 1000, K).astype(np.float64)
        params = rng.normal(size=(K, d))
        fns = {"numba": kernels.weighted_sum_nb, "numpy": kernels.weighted_sum_np}
        yield f"weighted sum, K={K} d={d}", (
            lambda b, c=counts, p=params: fns[b](c, p))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if kernels.simplex_iterate_nb is None:
        raise SystemExit("numba is unavailable or disabled; nothing to compare")

    print(f"{'case':<40}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for make in (lp_cases, brute_cases, sum_cases):
        for name, run in make():
            run("numba")  # compile
            t_nb = best_of(lambda: run("numba"), args.repeat)
            t_np = best_of(lambda: run("numpy"), args.repeat)
            print(f"{name:<40}{t_nb * 1e3:>12.2f}{t_np * 1e3:>12.2f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
