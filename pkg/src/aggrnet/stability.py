"""Stability of the two interacting aggregator queues.

Each aggregator transmits its head-of-line packet with probability alpha_k when
non-empty. With ``e_k = alpha_k p_k`` (service when the other queue is empty)
and ``a_k`` (service when both are non-empty) the stability region is the union
of two polytopes obtained from the dominant systems.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import InvalidParameterError
from .throughput import arrival_rate


def _rates(alpha1, alpha2, p_single, p_both):
    """Service probabilities (e, a) for both aggregators."""
    al = np.array([alpha1, alpha2], dtype=float)
    p = np.asarray(p_single, dtype=float)
    m = np.asarray(p_both, dtype=float)
    e = al * p
    a = al * ((1.0 - al[::-1]) * p + al[::-1] * m)
    return e, a


def service_rate(i: int, cfg, tables, p_other_empty: float) -> float:
    """Mean service probability of aggregator ``i`` given P(other queue empty)."""
    if i not in (1, 2):
        raise ValueError("aggregator index must be 1 or 2")
    if not 0.0 <= p_other_empty <= 1.0:
        raise InvalidParameterError("p_other_empty must lie in [0, 1]")
    e, a = _rates(cfg.alpha1, cfg.alpha2, tables.p_rel_single, tables.p_rel_both)
    k = i - 1
    return float(p_other_empty * e[k] + (1.0 - p_other_empty) * a[k])


@dataclass(frozen=True)
class StabilityRegion:
    """R = R1 u R2 with
    R1: lam1 < e1 + d1 lam2 / a2,  lam2 < a2
    R2: lam2 < e2 + d2 lam1 / a1,  lam1 < a1
    where d_k = a_k - e_k <= 0.
    """
    e: tuple
    a: tuple

    @classmethod
    def from_rates(cls, alpha1, alpha2, p_single, p_both):
        e, a = _rates(alpha1, alpha2, p_single, p_both)
        return cls(tuple(e), tuple(a))

    @classmethod
    def from_config(cls, cfg, tables, alpha=None):
        a1, a2 = (cfg.alpha1, cfg.alpha2) if alpha is None else alpha
        return cls.from_rates(a1, a2, tables.p_rel_single, tables.p_rel_both)

    @property
    def d(self):
        return (self.a[0] - self.e[0], self.a[1] - self.e[1])

    def margin(self, lam1, lam2):
        """Signed distance-like margin: > 0 strictly inside, < 0 outside."""
        return _margin(self.e[0], self.e[1], self.a[0], self.a[1],
                       np.asarray(lam1, dtype=float), np.asarray(lam2, dtype=float))

    def contains(self, lam1, lam2, strict=True):
        m = self.margin(lam1, lam2)
        return m > 0 if strict else m >= 0

    def boundary(self, n=2):
        """Upper-right boundary polyline (0, e2) -> (a1, a2) -> (e1, 0), ``n`` points per segment."""
        s = np.linspace(0.0, 1.0, n)
        p0 = np.array([0.0, self.e[1]])
        pc = np.array(self.a)
        p1 = np.array([self.e[0], 0.0])
        seg1 = p0 + s[:, None] * (pc - p0)
        seg2 = pc + s[1:, None] * (p1 - pc)
        return np.vstack([seg1, seg2])

    def rows(self):
        """Region description rows (sub_region, intercept, slope, cap)."""
        e1, e2 = self.e
        a1, a2 = self.a
        d1, d2 = self.d
        return [(1, e1, -d1 / a2 if a2 else 0.0, a2), (2, e2, -d2 / a1 if a1 else 0.0, a1)]


def is_stable(lam1, lam2, cfg, tables=None) -> bool:
    """Strict membership (boundary counts as unstable).

    ``cfg`` is a network configuration (with its ``tables``) or a ready
    :class:`StabilityRegion`.
    """
    if lam1 < 0 or lam2 < 0:
        raise InvalidParameterError("arrival rates must be non-negative")
    region = cfg if isinstance(cfg, StabilityRegion) else StabilityRegion.from_config(cfg, tables)
    return bool(region.contains(lam1, lam2, strict=True))


def network_service_state(cfg, tables):
    """Per-queue stability flags and service rates at the configured load.

    An unstable queue is always busy; a stable queue then sees the constant
    service of the dominant system.
    """
    lam = (arrival_rate(1, cfg, tables), arrival_rate(2, cfg, tables))
    reg = StabilityRegion.from_config(cfg, tables)
    e, a = reg.e, reg.a
    if is_stable(lam[0], lam[1], reg):
        mu = (service_rate(1, cfg, tables, 1.0 - lam[1] / a[1]) if a[1] else e[0],
              service_rate(2, cfg, tables, 1.0 - lam[0] / a[0]) if a[0] else e[1])
        return (True, True), mu
    for k in (0, 1):
        j = 1 - k
        if a[j] > 0 and lam[j] < a[j]:
            pe = 1.0 - lam[j] / a[j]
            mu_k = pe * e[k] + (1.0 - pe) * a[k]
            if lam[k] >= mu_k:
                flags = [True, True]
                flags[k] = False
                mu = [0.0, 0.0]
                mu[k], mu[j] = mu_k, a[j]
                return tuple(flags), tuple(mu)
    return (False, False), (a[0], a[1])


def _alpha_grid(resolution):
    if int(resolution) < 1:
        raise InvalidParameterError("resolution must be >= 1")
    return np.arange(1, int(resolution) + 1) / int(resolution)


def pareto_front(points: np.ndarray) -> np.ndarray:
    """Non-dominated points (maximisation in both coordinates), sorted by the first coordinate."""
    pts = np.asarray(points, dtype=float)
    order = np.lexsort((-pts[:, 1], -pts[:, 0]))
    pts = pts[order]
    keep = []
    best = -np.inf
    for p in pts:
        if p[1] > best:
            keep.append(p)
            best = p[1]
    return np.array(keep)[::-1]


def region_closure(cfg, tables, resolution=50, samples=16):
    """Frontier of the union of regions over the alpha grid {1/n, ..., 1}^2.

    Only the aggregator link probabilities of ``tables`` matter; ``cfg`` is
    accepted for symmetry with the other operations. Returns
    (frontier points, alphas) where ``alphas[k]`` generated point ``k``.
    """
    p_single, p_both = tables.p_rel_single, tables.p_rel_both
    grid = _alpha_grid(resolution)
    pts, tags = [], []
    for a1 in grid:
        for a2 in grid:
            b = StabilityRegion.from_rates(a1, a2, p_single, p_both).boundary(samples)
            pts.append(b)
            tags.append(np.tile([a1, a2], (len(b), 1)))
    pts = np.vstack(pts)
    tags = np.vstack(tags)
    front = pareto_front(pts)
    # map each frontier point back to an alpha that produced it
    idx = [int(np.argmin(np.abs(pts - f).sum(axis=1))) for f in front]
    return front, tags[idx]


def _margin(e1, e2, a1, a2, lam1, lam2):
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = np.minimum(e1 + (a1 - e1) * lam2 / a2 - lam1, a2 - lam2)
        r2 = np.minimum(e2 + (a2 - e2) * lam1 / a1 - lam2, a1 - lam1)
    r1 = np.where(a2 > 0, r1, -np.inf)
    r2 = np.where(a1 > 0, r2, -np.inf)
    return np.maximum(r1, r2)


def closure_margin(lam1, lam2, tables, grid=201):
    """max over alpha in [0, 1]^2 of the region margin at (lam1, lam2).

    Non-negative iff the point lies in the closure of the union of regions.
    """
    p = np.asarray(tables.p_rel_single, dtype=float)
    m = np.asarray(tables.p_rel_both, dtype=float)

    def margin(al1, al2):
        e1, e2 = al1 * p[0], al2 * p[1]
        a1 = al1 * ((1 - al2) * p[0] + al2 * m[0])
        a2 = al2 * ((1 - al1) * p[1] + al1 * m[1])
        return _margin(e1, e2, a1, a2, lam1, lam2)

    g = np.linspace(0.0, 1.0, grid)
    A1, A2 = np.meshgrid(g, g, indexing="ij")
    vals = margin(A1, A2)
    i, j = np.unravel_index(np.argmax(vals), vals.shape)
    best = float(vals[i, j])
    res = minimize(lambda v: -float(margin(*np.clip(v, 0.0, 1.0))), x0=[A1[i, j], A2[i, j]],
                   method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000})
    return max(best, float(-res.fun))


def classify_sensor_counts(template, gamma=None, t=None, counts=range(1, 31)):
    """Label each symmetric sensor count M as 'stable'/'unstable'.

    ``template`` supplies geometry, alpha and noise; ``gamma`` and ``t`` override
    its threshold and access probability. Returns a list of (M, lam, label).
    """
    from .channel import build_tables
    kw = {}
    if gamma is not None:
        kw["gamma"] = gamma
    if t is not None:
        kw["t"] = t
    base = template.with_(**kw)
    if not (base.t1 == base.t2 and base.alpha1 == base.alpha2):
        raise InvalidParameterError("sensor-count classification needs a symmetric template")
    out = []
    for m in counts:
        cfg = base.with_(m=int(m))
        tables = build_tables(cfg)
        lam1 = arrival_rate(1, cfg, tables)
        lam2 = arrival_rate(2, cfg, tables)
        out.append((int(m), lam1, "stable" if is_stable(lam1, lam2, cfg, tables) else "unstable"))
    return out
