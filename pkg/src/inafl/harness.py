"""Scenario generation, configuration files, sweeps and CSV output."""
import csv
import dataclasses
import hashlib
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import routing
from .errors import ConfigError
from .network import (GBPS, ModelSize, Topology, association_from_assignment,
                      cloud_overhead, total_latency)

MODEL_CATALOG = {
    "VGG16": 528.0,
    "ResNet152": 232.0,
    "Xception": 88.0,
    "DenseNet121": 33.0,
}

METHODS = ("only_cloud", "non_inc", "inc", "inc_lb")
OVERHEAD_METHODS = ("only_cloud", "non_inc", "inc")
DEFAULT_K_SWEEP = (200, 400, 600, 800, 1000)
DEFAULT_OVERHEAD_SWEEP = tuple(range(100, 1001, 100))
AUDIT_MAX_K = 100
CSV_COLUMNS = ("scenario_id", "method", "K", "D_mb", "objective_s", "lp_lower_bound_s",
               "bound_factor", "cloud_rx_bytes", "cloud_agg_inputs", "seed", "wallclock_ms")

_SAMPLE_BATCH = 4096
_MAX_EMPTY_BATCHES = 64


@dataclass(frozen=True)
class ScenarioConfig:
    area_m: float = 500.0
    grid: tuple = (3, 3)
    radius_m: float = 150.0
    K: int = 1000
    model: str = "ResNet152"
    D_mb: float = None
    bfr_gbps: float = 1.0
    bbk_gbps: float = 1.0
    wd_gbps: float = 2.0
    wu_gbps: float = 2.0
    allow_direct_cloud: bool = True
    seed: int = 0
    trials: int = routing.DEFAULT_TRIALS
    methods: tuple = METHODS

    def __post_init__(self):
        if self.model is not None and self.D_mb is not None:
            raise ConfigError("give either model or D_mb, not both")
        if self.model is None and self.D_mb is None:
            raise ConfigError("one of model or D_mb is required")
        if self.model is not None and self.model not in MODEL_CATALOG:
            raise ConfigError(f"unknown model {self.model!r}; known: {', '.join(MODEL_CATALOG)}")
        for name in ("area_m", "radius_m", "bfr_gbps", "bbk_gbps", "wd_gbps", "wu_gbps"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be a positive number, got {v!r}")
        if self.D_mb is not None and not self.D_mb > 0:
            raise ConfigError("D_mb must be positive")
        if len(self.grid) != 2 or min(self.grid) < 1:
            raise ConfigError(f"grid must be two positive integers, got {self.grid!r}")
        if int(self.K) != self.K or self.K < 1:
            raise ConfigError("K must be a positive integer")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError("trials must be a positive integer")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigError(f"unknown methods {bad}; known: {', '.join(METHODS)}")

    @property
    def size_mb(self):
        return self.D_mb if self.D_mb is not None else MODEL_CATALOG[self.model]

    @property
    def n_edges(self):
        return self.grid[0] * self.grid[1]

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def scenario_id(self):
        """Short hash of every field that shapes the scenario (methods excluded)."""
        key = dataclasses.asdict(self)
        key.pop("methods")
        key["size_mb"] = self.size_mb
        text = ";".join(f"{k}={key[k]!r}" for k in sorted(key))
        return hashlib.sha1(text.encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# config files: flat ``key = value`` lines, '#' starts a comment

_KEYS = ("area_m", "grid", "radius_m", "K", "model", "D_mb", "bfr_gbps", "bbk_gbps",
         "wd_gbps", "wu_gbps", "allow_direct_cloud", "seed", "trials", "methods")


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_grid(text):
    parts = text.lower().replace(" ", "").split("x")
    if len(parts) == 1:
        n = int(parts[0])
        return (n, n)
    if len(parts) == 2:
        return (int(parts[0]), int(parts[1]))
    raise ValueError(f"bad grid {text!r}")


def parse_config(text):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            if key == "grid":
                values[key] = _parse_grid(val)
            elif key in ("K", "seed", "trials"):
                values[key] = int(val)
            elif key == "allow_direct_cloud":
                values[key] = _parse_bool(val)
            elif key == "model":
                values[key] = val
            elif key == "methods":
                values[key] = tuple(m.strip() for m in val.split(",") if m.strip())
            else:
                values[key] = float(val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    if "D_mb" in values and "model" not in values:
        values["model"] = None
    return ScenarioConfig(**values)


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    return parse_config(text)


# ---------------------------------------------------------------------------
# topology


def edge_positions(config):
    """Equal-margin lattice: centers of a rows x cols partition of the square."""
    rows, cols = config.grid
    xs = (np.arange(cols) + 0.5) * config.area_m / cols
    ys = (np.arange(rows) + 0.5) * config.area_m / rows
    return np.array([(x, y) for y in ys for x in xs])


def generate_topology(config):
    """Users uniform over the union of coverage disks inside the area.

    Candidates are drawn in fixed-size batches and accepted in order, so a
    smaller K yields a prefix of the users of a larger K with the same seed.
    """
    edges = edge_positions(config)
    rng = np.random.default_rng(config.seed)
    r2 = config.radius_m ** 2
    users = []
    have = 0
    empty = 0
    while have < config.K:
        cand = rng.uniform(0.0, config.area_m, size=(_SAMPLE_BATCH, 2))
        d2 = ((cand[:, None, :] - edges[None, :, :]) ** 2).sum(axis=2)
        ok = cand[(d2 <= r2).any(axis=1)]
        if ok.size == 0:
            empty += 1
            if empty >= _MAX_EMPTY_BATCHES:
                raise ConfigError("coverage union inside the area is empty")
            continue
        users.append(ok)
        have += len(ok)
    user_xy = np.concatenate(users)[:config.K]
    d2 = ((user_xy[:, None, :] - edges[None, :, :]) ** 2).sum(axis=2)
    M = len(edges)
    return Topology(
        fronthaul=np.full(M, config.bfr_gbps * GBPS),
        backhaul=np.full(M, config.bbk_gbps * GBPS),
        downlink=config.wd_gbps * GBPS,
        uplink=config.wu_gbps * GBPS,
        reachable=d2 <= r2,
        edge_xy=edges, user_xy=user_xy,
        allow_direct_cloud=config.allow_direct_cloud)


# ---------------------------------------------------------------------------
# experiments


@dataclass(frozen=True)
class ExperimentResult:
    scenario_id: str
    method: str
    K: int
    D_mb: float
    objective_s: float
    lp_lower_bound_s: float = None
    bound_factor: float = None
    cloud_rx_bytes: int = None
    cloud_agg_inputs: int = None
    seed: int = 0
    wallclock_ms: float = None
    assignment: tuple = field(default=None, compare=False)

    def csv_row(self, timing=False):
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, float):
                return repr(v)
            return str(v)

        row = [fmt(getattr(self, c)) for c in CSV_COLUMNS]
        if not timing:
            row[-1] = ""
        return row


def _ms(t0):
    return (time.perf_counter() - t0) * 1e3


def run_point(config):
    """Every method of ``config.methods`` on one topology draw."""
    topo = generate_topology(config)
    size = ModelSize.from_megabytes(config.size_mb)
    inst = routing.RoutingInstance(topo, size)
    sid = config.scenario_id()
    K = config.K
    audit = K <= AUDIT_MAX_K
    out = []

    def emit(method, sol, t_ms, lb=None):
        nbytes, inputs = cloud_overhead(sol.A, size, sol.ina_enabled)
        out.append(ExperimentResult(
            scenario_id=sid, method=method, K=K, D_mb=config.size_mb,
            objective_s=float(sol.objective),
            lp_lower_bound_s=lb, bound_factor=_factor(K, lb),
            cloud_rx_bytes=nbytes, cloud_agg_inputs=inputs, seed=config.seed,
            wallclock_ms=t_ms,
            assignment=tuple(int(v) for v in sol.assignment) if audit else None))

    frac = None
    lp_ms = None
    if "inc" in config.methods or "inc_lb" in config.methods:
        t0 = time.perf_counter()
        frac = routing.solve_lp_p4(inst)
        lp_ms = _ms(t0)

    for method in config.methods:
        t0 = time.perf_counter()
        if method == "only_cloud":
            emit(method, routing.assign_only_cloud(inst), _ms(t0))
        elif method == "non_inc":
            emit(method, routing.assign_nearest_edge(inst), _ms(t0))
        elif method == "inc":
            sol = routing.best_rounding(frac, inst, config.seed, config.trials)
            emit(method, sol, lp_ms + _ms(t0), lb=frac.y)
        elif method == "inc_lb":
            out.append(ExperimentResult(
                scenario_id=sid, method=method, K=K, D_mb=config.size_mb,
                objective_s=frac.y, lp_lower_bound_s=frac.y,
                bound_factor=_factor(K, frac.y), seed=config.seed, wallclock_ms=lp_ms))
    return out


def _factor(K, lb):
    if lb is None or K < 2 or not lb > 0:
        return None
    return routing.theorem2_bound(K, lb)


def run_points(configs, workers=1):
    """Run sweep points, serially or in a process pool; output order is input order."""
    configs = list(configs)
    if workers <= 1 or len(configs) <= 1:
        chunks = [run_point(c) for c in configs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(run_point, configs))
    return [r for chunk in chunks for r in chunk]


def run_latency_sweep(config, K_values=DEFAULT_K_SWEEP, workers=1):
    return run_points([config.replace(K=int(k)) for k in K_values], workers)


def run_model_sweep(config, models=tuple(MODEL_CATALOG), workers=1):
    cfgs = [config.replace(model=m, D_mb=None) for m in models]
    return run_points(cfgs, workers)


def run_overhead_sweep(config, K_values=DEFAULT_OVERHEAD_SWEEP, workers=1):
    cfgs = [config.replace(K=int(k), methods=OVERHEAD_METHODS) for k in K_values]
    return run_points(cfgs, workers)


# ---------------------------------------------------------------------------
# output


def write_results_csv(results, fh, timing=False):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in results:
        w.writerow(r.csv_row(timing))


def results_csv_text(results, timing=False):
    buf = io.StringIO()
    write_results_csv(results, buf, timing)
    return buf.getvalue()


def write_assignments_csv(results, fh):
    """Per-user association of every audited row (K <= AUDIT_MAX_K)."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(("scenario_id", "method", "user", "column"))
    for r in results:
        if r.assignment is None:
            continue
        for k, c in enumerate(r.assignment):
            w.writerow((r.scenario_id, r.method, k, c))


def audit_objective(config, method, assignment):
    """Recompute a row's latency from its stored association."""
    topo = generate_topology(config)
    if method == "only_cloud":
        topo, ina = topo.with_direct_cloud(True), False
    elif method == "non_inc":
        topo, ina = topo.with_direct_cloud(False), False
    else:
        ina = True
    A = association_from_assignment(assignment, topo.n_columns)
    R = routing.recover_rates(A, topo)
    return total_latency(A, R, ModelSize.from_megabytes(config.size_mb), topo, ina).total
