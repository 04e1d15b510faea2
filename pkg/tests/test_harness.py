import io
from pathlib import Path

import numpy as np
import pytest

from inafl import harness
from inafl.errors import ConfigError
from inafl.harness import ScenarioConfig

DEFAULT_CFG = Path(__file__).resolve().parents[1] / "configs" / "default.cfg"


def test_parse_full_config():
    cfg = harness.parse_config("""
        # comment line
        area_m = 400
        grid = 2x3
        radius_m = 120   # trailing comment
        K = 50
        D_mb = 100.5
        bfr_gbps = 1.5
        bbk_gbps = 0.5
        wd_gbps = 3
        wu_gbps = 4
        allow_direct_cloud = false
        seed = 11
        trials = 4
        methods = inc, inc_lb
    """)
    assert cfg.grid == (2, 3) and cfg.n_edges == 6
    assert cfg.model is None and cfg.size_mb == 100.5
    assert cfg.allow_direct_cloud is False
    assert (cfg.K, cfg.seed, cfg.trials) == (50, 11, 4)
    assert cfg.methods == ("inc", "inc_lb")


def test_shipped_config_loads():
    cfg = harness.load_config(DEFAULT_CFG)
    assert cfg.K == 1000 and cfg.model == "ResNet152" and cfg.n_edges == 9


@pytest.mark.parametrize("text", [
    "colour = blue",
    "K = 5\nK = 6",
    "K = five",
    "K = 0",
    "seed = -1",
    "grid = 3x3x3",
    "model = AlexNet",
    "model = VGG16\nD_mb = 10",
    "bfr_gbps = 0",
    "wu_gbps = nan",
    "allow_direct_cloud = maybe",
    "trials = 0",
    "methods = inc, magic",
    "K",
])
def test_bad_configs_rejected(text):
    with pytest.raises(ConfigError):
        harness.parse_config(text)


def test_missing_config_file():
    with pytest.raises(ConfigError, match="cannot read"):
        harness.load_config("/nonexistent/inafl.cfg")


def test_edge_lattice_coordinates():
    xy = harness.edge_positions(ScenarioConfig())
    levels = [500 / 6, 250.0, 2500 / 6]
    assert xy.shape == (9, 2)
    np.testing.assert_allclose(sorted(set(np.round(xy[:, 0], 9))), levels)
    np.testing.assert_allclose(sorted(set(np.round(xy[:, 1], 9))), levels)


def test_generated_users_reach_an_edge(default_topology):
    topo = default_topology
    assert topo.n_users == 1000
    assert topo.reachable.any(axis=1).all()
    assert np.all((topo.user_xy >= 0) & (topo.user_xy <= 500))
    d = np.linalg.norm(topo.user_xy[:, None] - topo.edge_xy[None], axis=2)
    np.testing.assert_array_equal(topo.reachable, d <= 150)


def test_topology_deterministic_and_prefix():
    a = harness.generate_topology(ScenarioConfig(K=300, seed=4))
    b = harness.generate_topology(ScenarioConfig(K=300, seed=4))
    c = harness.generate_topology(ScenarioConfig(K=120, seed=4))
    assert a.user_xy.tobytes() == b.user_xy.tobytes()
    np.testing.assert_array_equal(c.user_xy, a.user_xy[:120])
    d = harness.generate_topology(ScenarioConfig(K=300, seed=5))
    assert not np.array_equal(a.user_xy, d.user_xy)


def test_users_cover_the_union_uniformly():
    # with one disk fully inside the area, the share inside the inner half-radius is 1/4
    cfg = ScenarioConfig(area_m=400, grid=(1, 1), radius_m=150, K=20000, seed=1)
    topo = harness.generate_topology(cfg)
    r = np.linalg.norm(topo.user_xy - 200.0, axis=1)
    assert abs(np.mean(r <= 75) - 0.25) < 0.01


def test_scenario_id_tracks_scenario_not_methods():
    a = ScenarioConfig()
    assert a.scenario_id() == ScenarioConfig().scenario_id()
    assert a.scenario_id() == a.replace(methods=("inc",)).scenario_id()
    assert a.scenario_id() != a.replace(seed=1).scenario_id()
    assert a.scenario_id() != a.replace(K=999).scenario_id()


def _by_method(rows):
    return {r.method: r for r in rows}


def test_run_point_default():
    rows = _by_method(harness.run_point(ScenarioConfig(seed=0)))
    assert set(rows) == set(harness.METHODS)
    assert len({r.scenario_id for r in rows.values()}) == 1
    oc, non, inc, lb = (rows[m].objective_s for m in harness.METHODS)
    assert oc == pytest.approx(928.0, rel=1e-12)
    assert lb <= inc <= non <= oc
    assert inc <= 1.05 * lb
    assert rows["inc"].bound_factor == pytest.approx(2 * np.log(1000) / lb + 3)
    assert rows["only_cloud"].cloud_rx_bytes == 232 * 10**9
    assert rows["inc"].cloud_agg_inputs <= 10


def test_latency_sweep_rows():
    res = harness.run_latency_sweep(ScenarioConfig(seed=1))
    assert len(res) == 20
    assert [r.K for r in res[::4]] == list(harness.DEFAULT_K_SWEEP)


@pytest.mark.parametrize("seed", range(3))
def test_gaps_grow_with_K(seed):
    res = harness.run_latency_sweep(ScenarioConfig(seed=seed))
    by_k = {}
    for r in res:
        by_k.setdefault(r.K, {})[r.method] = r.objective_s
    ks = sorted(by_k)
    cloud_gap = [by_k[k]["only_cloud"] - by_k[k]["inc"] for k in ks]
    edge_gap = [by_k[k]["non_inc"] - by_k[k]["inc"] for k in ks]
    assert all(np.diff(cloud_gap) >= 0)
    assert all(np.diff(edge_gap) >= 0)
    for k in ks:
        assert by_k[k]["inc"] <= by_k[k]["non_inc"] <= by_k[k]["only_cloud"]


def test_model_sweep_vgg16_ratios():
    res = harness.run_model_sweep(ScenarioConfig(seed=0), ["VGG16"])
    rows = _by_method(res)
    inc = rows["inc"].objective_s
    assert 3.5 <= rows["only_cloud"].objective_s / inc <= 5.5
    assert 2.0 <= rows["non_inc"].objective_s / inc <= 3.4


def test_model_sweep_scales_with_D():
    res = harness.run_model_sweep(ScenarioConfig(seed=2, K=200))
    cloud = {r.D_mb: r.objective_s for r in res if r.method == "only_cloud"}
    for mb, obj in cloud.items():
        assert obj == pytest.approx(cloud[232.0] * mb / 232.0, rel=1e-12)


def test_overhead_sweep_counters():
    res = harness.run_overhead_sweep(ScenarioConfig(seed=3))
    assert {r.method for r in res} == set(harness.OVERHEAD_METHODS)
    inc_bytes = set()
    for r in res:
        if r.method == "inc":
            assert r.cloud_agg_inputs <= 10
            inc_bytes.add(r.cloud_rx_bytes)
        else:
            assert r.cloud_agg_inputs == r.K
            assert r.cloud_rx_bytes == r.K * 232 * 10**6
    assert inc_bytes <= {9 * 232 * 10**6, 10 * 232 * 10**6}


def test_audit_recomputes_objectives():
    cfg = ScenarioConfig(K=60, seed=9)
    for r in harness.run_point(cfg):
        if r.method == "inc_lb":
            assert r.assignment is None
            continue
        assert len(r.assignment) == 60
        assert harness.audit_objective(cfg, r.method, r.assignment) == pytest.approx(
            r.objective_s, rel=1e-12)


def test_large_runs_skip_assignments():
    rows = harness.run_point(ScenarioConfig(K=101, seed=0, methods=("only_cloud",)))
    assert rows[0].assignment is None


def test_csv_format():
    res = harness.run_point(ScenarioConfig(K=20, seed=0))
    text = harness.results_csv_text(res)
    lines = text.splitlines()
    assert lines[0] == ",".join(harness.CSV_COLUMNS)
    assert len(lines) == 1 + len(harness.METHODS)
    assert all(line.endswith(",") for line in lines[1:])  # wallclock left blank
    timed = harness.results_csv_text(res, timing=True).splitlines()
    assert not timed[1].endswith(",")
    buf = io.StringIO()
    harness.write_assignments_csv(res, buf)
    assert len(buf.getvalue().splitlines()) == 1 + 3 * 20


def test_parallel_matches_serial():
    cfgs = [ScenarioConfig(K=k, seed=5) for k in (50, 150)]
    a = harness.results_csv_text(harness.run_points(cfgs, 1))
    b = harness.results_csv_text(harness.run_points(cfgs, 2))
    assert a == b
