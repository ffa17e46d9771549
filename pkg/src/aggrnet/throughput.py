"""Per-sensor throughput, aggregator arrival statistics and network throughput."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import comb

from .errors import ConsistencyError, InvalidParameterError


def _binom_pmf(k, n, p):
    # scipy.stats.binom overflows for subnormal p; sensor counts are small, so direct products suffice
    k, n = np.broadcast_arrays(np.asarray(k), np.asarray(n))
    j = np.clip(n - k, 0, None)
    with np.errstate(under="ignore"):
        w = comb(n, k) * np.power(p, k) * np.power(1.0 - p, j)
    return np.where((k >= 0) & (k <= n), w, 0.0)


def _area(cfg, tables, area):
    """Return (M_own, M_other, t_own, t_other, P_dir[own, other], P_agg) for ``area`` in {1, 2}."""
    if area == 1:
        return cfg.m1, cfg.m2, cfg.t1, cfg.t2, tables.p_dir[0], tables.p_agg[0]
    if area == 2:
        return cfg.m2, cfg.m1, cfg.t2, cfg.t1, tables.p_dir[1].T, tables.p_agg[1]
    raise ValueError(f"area must be 1 or 2, got {area!r}")


def direct_throughput(area: int, cfg, tables) -> float:
    """Probability per slot that a given sensor of ``area`` is decoded by the sink."""
    m, mo, t, to, pd, _ = _area(cfg, tables, area)
    if m == 0:
        return 0.0
    wi = _binom_pmf(np.arange(m), m - 1, t)  # other transmitters in own area
    wj = _binom_pmf(np.arange(mo + 1), mo, to)
    return float(t * wi @ pd[1:, :] @ wj)


def relayed_throughput(area: int, cfg, tables) -> float:
    """Probability per slot that a given sensor's packet misses the sink but reaches its aggregator."""
    m, mo, t, to, pd, pa = _area(cfg, tables, area)
    if m == 0:
        return 0.0
    wi = _binom_pmf(np.arange(m), m - 1, t)
    wj = _binom_pmf(np.arange(mo + 1), mo, to)
    q = (1.0 - pd[1:, :]) * pa[1:, None]
    return float(t * wi @ q @ wj)


def arrival_pmf(area: int, cfg, tables) -> np.ndarray:
    """Distribution of the number of packets entering the aggregator of ``area`` in a slot."""
    m, mo, t, to, pd, pa = _area(cfg, tables, area)
    out = np.zeros(m + 1)
    if m == 0:
        out[0] = 1.0
        return out
    s = np.arange(1, m + 1)
    ws = _binom_pmf(s, m, t)
    wj = _binom_pmf(np.arange(mo + 1), mo, to)
    q = (1.0 - pd[1:, :]) * pa[1:, None]  # (s, j) relay probability per transmitter
    k = np.arange(m + 1)
    # P(k arrivals | s, j) = Bin(k; s, q[s, j])
    cond = _binom_pmf(k[None, None, :], s[:, None, None], q[:, :, None])
    out = np.einsum("s,j,sjk->k", ws, wj, cond)
    out[0] = 0.0
    tail = out[1:].sum()
    if tail > 1.0 + 1e-9:
        raise ConsistencyError(f"arrival probabilities sum to {tail} > 1")
    out[0] = max(1.0 - tail, 0.0)
    return out


def arrival_rate(area: int, cfg, tables) -> float:
    pmf = arrival_pmf(area, cfg, tables)
    return float(np.arange(pmf.size) @ pmf)


def relayed_fraction(area: int, cfg, tables) -> float:
    td = direct_throughput(area, cfg, tables)
    tr = relayed_throughput(area, cfg, tables)
    tot = td + tr
    return tr / tot if tot > 0 else 0.0


def no_aggregator_throughput(cfg, tables) -> float:
    return cfg.m1 * direct_throughput(1, cfg, tables) + cfg.m2 * direct_throughput(2, cfg, tables)


def network_throughput(cfg, tables, stable=None, mu=None) -> float:
    """Packets per slot delivered to the sink.

    ``stable`` is a pair of flags; an unstable aggregator contributes its
    service rate ``mu[k]`` instead of its relayed throughput. When omitted both
    are evaluated with :mod:`aggrnet.stability`.
    """
    if stable is None:
        from .stability import network_service_state
        stable, mu = network_service_state(cfg, tables)
    elif not all(stable) and (mu is None or any(m is None for m, s in zip(mu, stable) if not s)):
        raise InvalidParameterError("service rate required for every unstable aggregator")
    total = 0.0
    for k, m in ((1, cfg.m1), (2, cfg.m2)):
        total += m * direct_throughput(k, cfg, tables)
        total += m * relayed_throughput(k, cfg, tables) if stable[k - 1] else mu[k - 1]
    return float(total)


@dataclass
class ThroughputReport:
    t_direct: tuple
    t_relayed: tuple
    t_total: tuple
    arrival_pmf: tuple
    lam: tuple
    relayed_fraction: tuple
    stable: tuple
    mu: tuple
    network: float
    no_aggregator: float


def throughput_report(cfg, tables) -> ThroughputReport:
    from .stability import network_service_state
    stable, mu = network_service_state(cfg, tables)
    td = (direct_throughput(1, cfg, tables), direct_throughput(2, cfg, tables))
    tr = (relayed_throughput(1, cfg, tables), relayed_throughput(2, cfg, tables))
    return ThroughputReport(
        t_direct=td,
        t_relayed=tr,
        t_total=(td[0] + tr[0], td[1] + tr[1]),
        arrival_pmf=(arrival_pmf(1, cfg, tables), arrival_pmf(2, cfg, tables)),
        lam=(arrival_rate(1, cfg, tables), arrival_rate(2, cfg, tables)),
        relayed_fraction=(relayed_fraction(1, cfg, tables), relayed_fraction(2, cfg, tables)),
        stable=tuple(stable),
        mu=tuple(mu),
        network=network_throughput(cfg, tables, stable, mu),
        no_aggregator=no_aggregator_throughput(cfg, tables),
    )
