import numpy as np
import pytest

from aggrnet import CALIBRATED_NOISE, NetworkConfig, build_tables
from aggrnet.bvp import KernelParams
from aggrnet.delay import (SymmetricParams, bound_gap, delay_bounds, exact_delay,
                           symmetric_arrival_rate)
from aggrnet.errors import InstabilityError, InvalidParameterError, NoTrafficError
from aggrnet.throughput import arrival_rate
from oracles import chain_delays, queue_chain


def setup(gamma, t, alpha=0.8):
    cfg = NetworkConfig.symmetric(1, t, alpha, gamma, CALIBRATED_NOISE)
    tb = build_tables(cfg)
    return cfg, tb, SymmetricParams.from_tables(cfg, tb)


def chain_for(cfg, tb, n=120):
    relay = tb.joint2["relay"]
    sink = tb.joint2["sink"]
    r = tb.p_agg[0][1]
    t = cfg.t1
    lam = arrival_rate(1, cfg, tb)
    lam12 = t * t * sink.neither * r * r
    pi = queue_chain(lam, lam, lam12, cfg.alpha1, cfg.alpha2, tb.p_rel_single[0],
                     tb.p_rel_single[1], relay.only_a, relay.only_b, relay.both, n=n)
    return pi, lam


def test_arrival_rate_agrees_with_throughput():
    cfg, tb, p = setup(0.5, 0.3)
    assert symmetric_arrival_rate(p) == pytest.approx(arrival_rate(1, cfg, tb), abs=1e-15)


@pytest.mark.parametrize("gamma,t", [(0.2, 0.5), (0.5, 0.4), (0.5, 0.6)])
def test_bounds_bracket_chain(gamma, t):
    cfg, tb, p = setup(gamma, t)
    b = delay_bounds(p)
    pi, lam = chain_for(cfg, tb)
    d = chain_delays(pi, lam, lam)[0]
    assert b.lower <= d <= b.upper
    # with the exact busy probability the relation is an identity
    both = pi[1:, 1:].sum()
    assert exact_delay(p, both) == pytest.approx(d, rel=1e-9)


@pytest.mark.parametrize("gamma,t", [(1.2, 0.3), (2.0, 0.3)])
def test_capture_exact(gamma, t):
    cfg, tb, p = setup(gamma, t)
    b = delay_bounds(p)
    assert b.gap == 0.0 and b.exact == b.lower
    pi, lam = chain_for(cfg, tb)
    assert chain_delays(pi, lam, lam)[0] == pytest.approx(b.exact, rel=1e-9)


def test_gap_identity():
    cfg, tb, p = setup(0.5, 0.4)
    b = delay_bounds(p)
    lam = b.lam
    mu = p.service
    expected = abs((p.d + p.alpha ** 2 * p.r0D) * p.alpha ** 2 * p.r0D / (2 * lam * p.alpha * p.r1D * (mu - lam)))
    assert b.gap == pytest.approx(expected, rel=1e-12)
    assert bound_gap(p) == pytest.approx(b.gap, rel=1e-15)


def test_uncorrected_formula_disagrees_with_chain():
    cfg, tb, p = setup(2.0, 0.3)
    old = delay_bounds(p, formula="uncorrected").lower
    pi, lam = chain_for(cfg, tb)
    assert abs(old / chain_delays(pi, lam, lam)[0] - 1) > 1.0


def test_no_traffic_and_instability():
    _, _, p = setup(0.5, 0.0)
    with pytest.raises(NoTrafficError):
        delay_bounds(p)
    _, _, p = setup(2.0, 0.9)
    with pytest.raises(InstabilityError):
        delay_bounds(p)


def test_validation():
    with pytest.raises(InvalidParameterError):
        SymmetricParams(0.8, 0.2, 1.2, 0.9, 0.1, 0.1, 0.0, 0.9, 0.3, 0.0)
    with pytest.raises(InvalidParameterError):
        delay_bounds(setup(0.5, 0.3)[2], formula="other")
    with pytest.raises(InvalidParameterError):
        exact_delay(setup(0.5, 0.3)[2], 1.5)
    cfg = NetworkConfig.symmetric(2, 0.2)
    with pytest.raises(InvalidParameterError):
        SymmetricParams.from_tables(cfg, build_tables(cfg))


def test_complement_mode_breaks_rate_consistency():
    cfg, tb, p = setup(0.5, 0.4)
    q = SymmetricParams(**{**p.__dict__, "sbar0_mode": "complement"})
    assert abs(symmetric_arrival_rate(q) - arrival_rate(1, cfg, tb)) > 1e-3


def test_kernel_params_agree_with_symmetric_view():
    cfg, tb, p = setup(1.2, 0.3)
    kp = KernelParams.from_network(cfg, tb)
    assert kp.lam1 == pytest.approx(symmetric_arrival_rate(p), rel=1e-14)
    assert kp.lam12 == pytest.approx(p.joint_arrival, rel=1e-14)
    assert kp.a1 == pytest.approx(p.service, rel=1e-14)
