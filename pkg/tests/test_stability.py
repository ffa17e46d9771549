import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aggrnet import CALIBRATED_NOISE, ChannelParams, NetworkConfig, build_tables
from aggrnet.stability import (StabilityRegion, classify_sensor_counts, closure_margin, is_stable,
                               network_service_state, pareto_front, region_closure, service_rate)

CFG = NetworkConfig(1, 1, 0.2, 0.2, 0.7, 0.5, channel=ChannelParams(0.5, CALIBRATED_NOISE))
TB = build_tables(CFG)


def test_service_rate_limits():
    e1 = CFG.alpha1 * TB.p_rel_single[0]
    assert service_rate(1, CFG, TB, 1.0) == pytest.approx(e1)
    cfg0 = CFG.with_(alpha2=0.0)
    for pe in (0.0, 0.3, 1.0):
        assert service_rate(1, cfg0, TB, pe) == pytest.approx(e1)


def test_origin_and_axis():
    assert is_stable(0.0, 0.0, CFG, TB)
    e1 = CFG.alpha1 * TB.p_rel_single[0]
    assert not is_stable(e1 + 1e-9, 0.0, CFG, TB)
    assert is_stable(e1 - 1e-9, 0.0, CFG, TB)


def test_boundary_is_unstable():
    reg = StabilityRegion.from_config(CFG, TB)
    lam2 = 0.5 * reg.a[1]
    lam1 = reg.e[0] + reg.d[0] * lam2 / reg.a[1]
    # exactly on R1's line, and outside R2
    assert reg.e[1] + reg.d[1] * lam1 / reg.a[0] < lam2 or lam1 >= reg.a[0]
    assert not is_stable(lam1, lam2, reg)
    assert is_stable(lam1 - 1e-9, lam2, reg)


def test_swap_symmetry():
    r = StabilityRegion.from_rates(0.7, 0.4, [0.9, 0.8], [0.5, 0.3])
    s = StabilityRegion.from_rates(0.4, 0.7, [0.8, 0.9], [0.3, 0.5])
    assert np.allclose(r.e, s.e[::-1]) and np.allclose(r.a, s.a[::-1])
    pts = np.random.default_rng(0).uniform(0, 0.8, (200, 2))
    assert np.array_equal(r.contains(pts[:, 0], pts[:, 1]), s.contains(pts[:, 1], pts[:, 0]))


def test_no_interference_gives_rectangle():
    reg = StabilityRegion.from_rates(0.6, 0.5, [0.9, 0.8], [0.9, 0.8])
    assert reg.d == pytest.approx((0.0, 0.0))
    assert reg.contains(0.6 * 0.9 - 1e-9, 0.5 * 0.8 - 1e-9)
    assert not reg.contains(0.6 * 0.9 + 1e-9, 0.01)


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_monotone(l1, l2, s1, s2):
    reg = StabilityRegion.from_config(CFG, TB)
    l1, l2 = 0.6 * l1, 0.6 * l2
    if reg.contains(l1, l2):
        assert reg.contains(l1 * s1, l2 * s2)


def test_closure_single_alpha():
    front, alphas = region_closure(CFG, TB, resolution=1)
    reg = StabilityRegion.from_rates(1.0, 1.0, TB.p_rel_single, TB.p_rel_both)
    np.testing.assert_allclose(pareto_front(reg.boundary(16)), front)
    assert np.all(alphas == 1.0)


def test_closure_margin_sign():
    assert closure_margin(0.01, 0.01, TB) > 0
    assert closure_margin(1.0, 1.0, TB) < 0


def test_network_service_state_stable():
    flags, mu = network_service_state(CFG, TB)
    assert flags == (True, True)
    assert all(0 < m <= 1 for m in mu)


def test_classification_zero_access():
    tpl = NetworkConfig.symmetric(1, 0.1, 0.8, 0.5, CALIBRATED_NOISE)
    assert all(lab == "stable" for _, _, lab in classify_sensor_counts(tpl, 2.0, 0.0, range(1, 31)))


def test_classification_first_row():
    tpl = NetworkConfig.symmetric(1, 0.1, 0.8, 0.5, CALIBRATED_NOISE)
    labels = {m: lab for m, _, lab in classify_sensor_counts(tpl, 0.2, 0.2, range(1, 31))}
    assert [m for m in labels if labels[m] == "stable"] == list(range(1, 7))


def test_invalid_rate():
    with pytest.raises(Exception):
        is_stable(-0.1, 0.0, CFG, TB)
