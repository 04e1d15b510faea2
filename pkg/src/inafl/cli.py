"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 infeasible instance,
4 failed internal check.
"""
import argparse
import csv
import sys
from pathlib import Path

from . import harness, routing, selftest
from .errors import ConfigError, InfeasibleInstanceError, InvalidInputError
from .network import ModelSize

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 2, 3, 4


def _int_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("values must be positive")
    return vals


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value scenario file (defaults if omitted)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--trials", type=int, help="override the rounding trial count")
    common.add_argument("--out", help="CSV output path (stdout if omitted)")
    common.add_argument("--workers", type=int, default=1, help="process pool size for sweeps")
    common.add_argument("--timing", action="store_true",
                        help="fill the wallclock_ms column (makes output run-dependent)")

    p = argparse.ArgumentParser(prog="inafl", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sk = sub.add_parser("sweep-k", parents=[common], help="latency vs number of users")
    sk.add_argument("--k-values", type=_int_list, default=list(harness.DEFAULT_K_SWEEP))
    sm = sub.add_parser("sweep-model", parents=[common], help="latency vs model size")
    sm.add_argument("--models", default=",".join(harness.MODEL_CATALOG))
    so = sub.add_parser("sweep-overhead", parents=[common], help="cloud traffic and load")
    so.add_argument("--k-values", type=_int_list, default=list(harness.DEFAULT_OVERHEAD_SWEEP))
    sub.add_parser("solve", parents=[common], help="solve one scenario and print it")
    sub.add_parser("selftest", parents=[common], help="run the oracle-equivalence checks")
    return p


def _load(args):
    cfg = harness.load_config(args.config) if args.config else harness.ScenarioConfig()
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.trials is not None:
        over["trials"] = args.trials
    return cfg.replace(**over) if over else cfg


def _emit_csv(results, args):
    if args.out:
        path = Path(args.out)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            harness.write_results_csv(results, fh, args.timing)
        if any(r.assignment is not None for r in results):
            audit = path.with_name(path.stem + ".assign.csv")
            with open(audit, "w", newline="", encoding="utf-8") as fh:
                harness.write_assignments_csv(results, fh)
    else:
        harness.write_results_csv(results, sys.stdout, args.timing)


def _solve(cfg, args):
    cfg = cfg.replace(methods=("inc", "inc_lb"))
    topo = harness.generate_topology(cfg)
    inst = routing.RoutingInstance(topo, ModelSize.from_megabytes(cfg.size_mb))
    sol = routing.solve_inc(inst, cfg.seed, cfg.trials)
    lines = [
        f"scenario {cfg.scenario_id()}  K={cfg.K}  D={cfg.size_mb:g} MB  seed={cfg.seed}",
        f"objective_s {sol.objective!r}",
        f"lp_lower_bound_s {sol.y_dagger!r}",
        f"gap {sol.objective / sol.y_dagger - 1.0:.6%}",
    ]
    if cfg.K >= 2:
        lines.append(f"theorem2_factor {routing.theorem2_bound(cfg.K, sol.y_dagger)!r}")
    loads = sol.A.sum(axis=0)
    lines.append("loads " + " ".join(f"{lab}:{int(n)}"
                                     for lab, n in zip(sol.topo.column_labels(), loads)))
    if cfg.K <= harness.AUDIT_MAX_K:
        lines.append("assignment " + " ".join(str(int(c)) for c in sol.assignment))
    sys.stdout.write("\n".join(lines) + "\n")
    if args.out:
        _emit_csv(harness.run_point(cfg), args)


def _selftest(cfg, args):
    seed = args.seed if args.seed is not None else 0
    rows = selftest.run_all(seed)
    for name, ok, detail in rows:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("check", "passed", "detail"))
            for name, ok, detail in rows:
                w.writerow((name, int(ok), detail))
    return EXIT_OK if all(ok for _, ok, _ in rows) else EXIT_INTERNAL


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "selftest":
            return _selftest(cfg, args)
        if args.command == "solve":
            _solve(cfg, args)
            return EXIT_OK
        if args.command == "sweep-k":
            res = harness.run_latency_sweep(cfg, args.k_values, args.workers)
        elif args.command == "sweep-model":
            models = [m.strip() for m in args.models.split(",") if m.strip()]
            unknown = [m for m in models if m not in harness.MODEL_CATALOG]
            if unknown:
                raise ConfigError(f"unknown models: {', '.join(unknown)}")
            res = harness.run_model_sweep(cfg, models, args.workers)
        else:
            res = harness.run_overhead_sweep(cfg, args.k_values, args.workers)
        _emit_csv(res, args)
        return EXIT_OK
    except (ConfigError, InvalidInputError) as exc:
        print(f"inafl: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleInstanceError as exc:
        print(f"inafl: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except AssertionError as exc:
        print(f"inafl: internal check failed: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def _entry():
    sys.exit(main())


if __name__ == "__main__":
    _entry()
