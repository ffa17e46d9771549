import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aggrnet import CALIBRATED_NOISE, ChannelParams, NetworkConfig, build_tables
from aggrnet import throughput as tp
from oracles import enumerate_throughput


def cfg_of(m1, m2, t1=0.3, t2=0.2, gamma=0.5):
    return NetworkConfig(m1, m2, t1, t2, 0.8, 0.6, channel=ChannelParams(gamma, CALIBRATED_NOISE))


@pytest.mark.parametrize("m1,m2", [(1, 0), (0, 2), (1, 1), (2, 3), (3, 3), (4, 2)])
@pytest.mark.parametrize("gamma", [0.2, 1.2])
def test_matches_enumeration(m1, m2, gamma):
    cfg = cfg_of(m1, m2, gamma=gamma)
    tb = build_tables(cfg)
    ref = enumerate_throughput(cfg, tb)
    for a in (1, 2):
        assert tp.direct_throughput(a, cfg, tb) == pytest.approx(ref["t_direct"][a - 1], abs=1e-12)
        assert tp.relayed_throughput(a, cfg, tb) == pytest.approx(ref["t_relayed"][a - 1], abs=1e-12)
        np.testing.assert_allclose(tp.arrival_pmf(a, cfg, tb), ref["arrival_pmf"][a - 1], atol=1e-12)


def test_zero_access():
    cfg = cfg_of(5, 5, 0.0, 0.0)
    tb = build_tables(cfg)
    assert tp.direct_throughput(1, cfg, tb) == 0.0
    assert tp.arrival_rate(2, cfg, tb) == 0.0
    assert tp.network_throughput(cfg, tb) == 0.0


def test_single_sensor_always_on():
    cfg = cfg_of(1, 0, 1.0, 0.0)
    tb = build_tables(cfg)
    assert tp.direct_throughput(1, cfg, tb) == pytest.approx(tb.p_dir[0][1, 0])
    assert tp.relayed_throughput(1, cfg, tb) == pytest.approx((1 - tb.p_dir[0][1, 0]) * tb.p_agg[0][1])


def test_network_throughput_needs_mu_for_unstable():
    cfg = cfg_of(3, 3)
    tb = build_tables(cfg)
    with pytest.raises(Exception):
        tp.network_throughput(cfg, tb, stable=(False, True), mu=None)


def test_unstable_queue_contributes_service_rate():
    cfg = NetworkConfig.symmetric(20, 0.2, 0.8, 2.0, CALIBRATED_NOISE).with_(m=8)
    tb = build_tables(cfg)
    rep = tp.throughput_report(cfg, tb)
    assert not all(rep.stable)
    direct = cfg.m1 * rep.t_direct[0] + cfg.m2 * rep.t_direct[1]
    assert rep.network == pytest.approx(direct + sum(rep.mu))


def test_aggregators_help_at_high_threshold():
    cfg = NetworkConfig.symmetric(20, 0.1, 0.8, 2.0, CALIBRATED_NOISE)
    rep = tp.throughput_report(cfg, build_tables(cfg))
    assert rep.network >= 5 * rep.no_aggregator


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 12), st.integers(0, 12), st.floats(0, 1), st.floats(0, 1), st.floats(0.1, 3))
def test_pmf_properties(m1, m2, t1, t2, gamma):
    cfg = NetworkConfig(m1, m2, t1, t2, channel=ChannelParams(gamma))
    tb = build_tables(cfg)
    for a, m in ((1, m1), (2, m2)):
        pmf = tp.arrival_pmf(a, cfg, tb)
        assert pmf.min() >= -1e-15
        assert pmf.sum() == pytest.approx(1.0, abs=1e-12)
        # every arrival is a relayed sensor packet
        assert tp.arrival_rate(a, cfg, tb) == pytest.approx(m * tp.relayed_throughput(a, cfg, tb), abs=1e-12)
        assert 0.0 <= tp.relayed_fraction(a, cfg, tb) <= 1.0
