import numpy as np
import pytest

from aggrnet import CALIBRATED_NOISE, ChannelParams, NetworkConfig, build_tables
from aggrnet import throughput as tp
from aggrnet.errors import InstabilityError, InvalidParameterError
from aggrnet.simulator import (SimConfig, dominance_violations, dominant_run, estimate_stability, run)
from aggrnet.stability import StabilityRegion


def net(m=1, t=0.3, gamma=0.5, alpha=0.8):
    cfg = NetworkConfig.symmetric(m, t, alpha, gamma, CALIBRATED_NOISE)
    return cfg, build_tables(cfg)


def test_config_validation():
    with pytest.raises(InvalidParameterError):
        SimConfig(slots=100, warmup=100)
    with pytest.raises(InvalidParameterError):
        SimConfig(mode="other")
    with pytest.raises(InvalidParameterError):
        SimConfig(replications=0)
    assert SimConfig(slots=1000).warmup_slots == 100


def test_tables_required():
    cfg, _ = net()
    with pytest.raises(InvalidParameterError):
        run(cfg, None, SimConfig(slots=10_000))


def test_zero_traffic():
    cfg, tb = net(t=0.0)
    st = run(cfg, tb, SimConfig(slots=20_000))
    assert st.lam.tolist() == [0.0, 0.0] and st.t_direct.tolist() == [0.0, 0.0]
    assert st.mean_queue.tolist() == [0.0, 0.0] and st.goodput == 0.0
    assert estimate_stability(st) == "stable"


def test_deterministic_and_worker_independent():
    cfg, tb = net(m=3, t=0.2)
    a = run(cfg, tb, SimConfig(slots=50_000, seed=9, replications=3))
    b = run(cfg, tb, SimConfig(slots=50_000, seed=9, replications=3, workers=3))
    for name in ("t_direct", "lam", "mean_sojourn", "mu", "slope"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    c = run(cfg, tb, SimConfig(slots=50_000, seed=10, replications=3))
    assert not np.array_equal(a.lam, c.lam)


def test_work_conservation_and_sojourn():
    cfg, tb = net(m=4, t=0.25, gamma=1.2)
    st = run(cfg, tb, SimConfig(slots=100_000, seed=2, replications=2, trace=True))
    assert np.array_equal(st.enqueued, st.dequeued + st.final)
    assert np.all(st.mean_sojourn >= 1.0)
    tr = st.traces[0]
    q = tr["q"]
    # queue recursion: next = previous - departure + arrivals
    assert np.array_equal(q[1:], q[:-1] - tr["departures"][1:] + tr["arrivals"][1:])


def test_single_sensor_direct_throughput():
    cfg = NetworkConfig(1, 0, 1.0, 0.0, channel=ChannelParams(0.5, CALIBRATED_NOISE))
    tb = build_tables(cfg)
    st = run(cfg, tb, SimConfig(slots=10**6, seed=4))
    p = tb.p_dir[0][1, 0]
    assert abs(st.t_direct[0] - p) < 3 * st.t_direct_se[0] + 1e-12


def test_littles_law_and_rates():
    cfg, tb = net(m=1, t=0.5)
    st = run(cfg, tb, SimConfig(slots=400_000, seed=5, replications=2))
    np.testing.assert_allclose(st.mean_queue, st.lam * st.mean_sojourn, rtol=2e-3)
    lam = tp.arrival_rate(1, cfg, tb)
    assert np.all(np.abs(st.lam - lam) < 4 * st.lam_se)
    for v in (st.t_direct, st.t_relayed, st.lam, st.mu, st.p_empty):
        assert np.all((0 <= v) & (v <= 1))


def test_full_sinr_mode_matches_tables_for_one_sensor():
    # one sensor per area: the exact joint tables are the full SINR model
    cfg, tb = net(m=1, t=0.4, gamma=0.5)
    ind = run(cfg, tb, SimConfig(slots=300_000, seed=1))
    full = run(cfg, None, SimConfig(slots=300_000, seed=1, mode="full-sinr"))
    for name in ("t_direct", "t_relayed", "lam"):
        d = np.abs(getattr(ind, name) - getattr(full, name))
        se = np.hypot(getattr(ind, name + "_se"), getattr(full, name + "_se"))
        assert np.all(d < 4 * se)


def test_full_sinr_correlation_is_visible():
    # with many sensors the shared interference breaks the independence assumption
    cfg, tb = net(m=6, t=0.4, gamma=0.2)
    full = run(cfg, None, SimConfig(slots=300_000, seed=1, mode="full-sinr"))
    pred = np.array([tp.arrival_pmf(1, cfg, tb)[k] for k in range(len(full.arrival_pmf[0]))])
    z = np.abs(full.arrival_pmf[0] - pred) / np.maximum(full.arrival_pmf_se[0], 1e-12)
    assert z.max() > 5


def test_dominance_pathwise():
    cfg, tb = net(m=1, t=0.55, gamma=0.5)
    for sat in (1, 2):
        assert dominance_violations(cfg, tb, SimConfig(slots=100_000, seed=3), sat) == 0


def test_dominant_constant_service():
    cfg, tb = net(m=1, t=0.4, gamma=0.5)
    reg = StabilityRegion.from_config(cfg, tb)
    st = dominant_run(cfg, tb, SimConfig(slots=10**6, seed=8), saturated=1)
    assert abs(st.mu[1] - reg.a[1]) < 3 * st.mu_se[1]


def test_dominance_degenerate():
    cfg, tb = net(m=1, t=0.4, gamma=0.5)
    cfg = cfg.with_(alpha1=0.0)
    st = dominant_run(cfg, tb, SimConfig(slots=300_000, seed=8), saturated=1)
    assert abs(st.mu[1] - cfg.alpha2 * tb.p_rel_single[1]) < 3 * st.mu_se[1]


def test_unstable_drift():
    cfg, tb = net(m=1, t=0.9, gamma=2.0)
    st = run(cfg, tb, SimConfig(slots=400_000, seed=6))
    assert estimate_stability(st) == "unstable"
    reg = StabilityRegion.from_config(cfg, tb)
    drift = st.lam - np.array(reg.a)  # both queues busy from early on
    assert np.all(np.abs(st.slope - drift) < 3 * st.slope_se + 3 * st.lam_se)


def test_queue_cap():
    cfg, tb = net(m=1, t=0.9, gamma=2.0)
    with pytest.raises(InstabilityError):
        run(cfg, tb, SimConfig(slots=200_000, queue_cap=1000))


def test_stable_classification_reference_point():
    cfg, tb = net(m=4, t=0.2, gamma=0.2)
    st = run(cfg, tb, SimConfig(slots=10**6, seed=1))
    assert estimate_stability(st) == "stable"
    lam = tp.arrival_rate(1, cfg, tb)
    assert np.all(np.abs(st.lam - lam) < 3 * st.lam_se)


def test_summary_and_trace_csv(tmp_path):
    cfg, tb = net()
    st = run(cfg, tb, SimConfig(slots=5_000, trace=True))
    st.to_csv(tmp_path / "s.csv")
    st.write_trace(tmp_path / "t.csv")
    assert (tmp_path / "s.csv").read_text().startswith("metric,value,stderr")
    assert len((tmp_path / "t.csv").read_text().splitlines()) == 5_001


def test_stability_region_agrees_with_simulation_on_grid():
    from aggrnet.stability import is_stable
    base = NetworkConfig(1, 1, 0.1, 0.1, 0.8, 0.8, channel=ChannelParams(2.0, CALIBRATED_NOISE))
    tb = build_tables(base)  # tables do not depend on the access probabilities
    conclusive = disagree = 0
    for i, t1 in enumerate(np.linspace(0.2, 0.7, 5)):
        for j, t2 in enumerate(np.linspace(0.2, 0.7, 5)):
            cfg = base.with_(t1=t1, t2=t2)
            lam = tp.arrival_rate(1, cfg, tb), tp.arrival_rate(2, cfg, tb)
            label = estimate_stability(run(cfg, tb, SimConfig(slots=300_000, seed=5 * i + j)))
            if label != "inconclusive":
                conclusive += 1
                disagree += (label == "stable") != is_stable(lam[0], lam[1], cfg, tb)
    assert disagree == 0 and conclusive >= 20
