"""Mean queueing delay bounds for the symmetric two-aggregator system.

One sensor per area, identical links. Each aggregator receives at most one
packet per slot. The mean delay is D = S - phi where phi depends on
P(N1 > 0, N2 > 0) through a known sign, so letting that probability range over
[0, 1] brackets D. When the aggregators cannot both be decoded in one slot
(r0 = 0) phi vanishes and S is exact.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

from .errors import ConsistencyError, InstabilityError, InvalidParameterError, NoTrafficError

SBAR0_MODES = ("neither", "complement")


@dataclass(frozen=True)
class SymmetricParams:
    """Symmetric link probabilities.

    s1R, s2R: sensor decoded by its aggregator (other-area sensor silent / active)
    s1D: sensor decoded by the sink when transmitting alone
    s2D: exactly this sensor decoded when both sensors transmit
    s0D: both sensors decoded in the same slot
    r1D: aggregator decoded alone; r2D: exactly this aggregator decoded when
    both transmit; r0D: both aggregators decoded.
    sbar0_mode: 'neither' uses 1 - s0D - 2 s2D for the no-sensor-decoded
    probability, 'complement' uses 1 - s0D.
    """
    alpha: float
    t: float
    s1R: float
    s2R: float
    s1D: float
    s2D: float
    s0D: float
    r1D: float
    r2D: float
    r0D: float
    sbar0_mode: str = "neither"

    def __post_init__(self):
        for name in ("alpha", "t", "s1R", "s2R", "s1D", "s2D", "s0D", "r1D", "r2D", "r0D"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidParameterError(f"{name} must lie in [0, 1], got {v!r}")
        if self.sbar0_mode not in SBAR0_MODES:
            raise InvalidParameterError(f"sbar0_mode must be one of {SBAR0_MODES}")
        if self.r2D + self.r0D > self.r1D + 1e-12:
            warnings.warn("aggregator success with interference exceeds the interference-free value")

    @classmethod
    def from_tables(cls, cfg, tables, sbar0_mode="neither"):
        """Specialise a symmetric one-sensor-per-area configuration."""
        if cfg.m1 != 1 or cfg.m2 != 1 or not cfg.is_symmetric:
            raise InvalidParameterError("symmetric closed form needs one sensor per area and symmetric links")
        sink = tables.joint2["sink"]
        relay = tables.joint2["relay"]
        s_r = float(tables.p_agg[0][1])
        return cls(alpha=cfg.alpha1, t=cfg.t1, s1R=s_r, s2R=s_r,
                   s1D=float(tables.p_dir[0][1, 0]), s2D=sink.only_a, s0D=sink.both,
                   r1D=float(tables.p_rel_single[0]), r2D=relay.only_a, r0D=relay.both,
                   sbar0_mode=sbar0_mode)

    @property
    def sbar0(self) -> float:
        if self.sbar0_mode == "neither":
            return max(1.0 - self.s0D - 2.0 * self.s2D, 0.0)
        return 1.0 - self.s0D

    @property
    def ahat(self) -> float:
        return (1.0 - self.alpha) * self.r1D + self.alpha * self.r2D

    @property
    def d(self) -> float:
        return self.alpha ** 2 * (self.r2D - self.r1D)

    @property
    def service(self) -> float:
        """Service probability of one aggregator when both queues are busy."""
        return self.alpha * (self.ahat + self.alpha * self.r0D)

    @property
    def joint_arrival(self) -> float:
        """P(both aggregators receive a packet in the same slot)."""
        return self.t ** 2 * self.sbar0 * self.s2R ** 2


@dataclass(frozen=True)
class DelayBounds:
    lam: float
    lower: float
    upper: float
    gap: float
    exact: Optional[float] = None


def symmetric_arrival_rate(p: SymmetricParams) -> float:
    t = p.t
    return t * t * p.s2R * (p.sbar0 + p.s2D) + t * (1.0 - t) * (1.0 - p.s1D) * p.s1R


def _terms(p: SymmetricParams, formula: str):
    lam = symmetric_arrival_rate(p)
    if lam <= 0.0:
        raise NoTrafficError("arrival rate is zero; mean delay undefined")
    mu = p.service
    if lam >= mu:
        raise InstabilityError(f"arrival rate {lam:.6g} >= service rate {mu:.6g}")
    a, r0, r1, d = p.alpha, p.r0D, p.r1D, p.d
    k = d + a * a * r0
    lj = p.joint_arrival
    if formula == "derived":
        if r1 <= 0.0:
            raise InvalidParameterError("r1D must be positive")
        den = 2.0 * lam * a * r1 * (mu - lam)
        s = (2.0 * lam * mu - 2.0 * a * r1 * lam * lam - k * lj) / den
    elif formula == "uncorrected":
        den = 2.0 * lam * a * (mu - lam)
        lb = 1.0 - lam
        s = (lam * lb * (d + a * p.ahat + 2 * a * a * r0) - k * (2 * lam * (1 + 2 * lb) + lj)) / den
    else:
        raise InvalidParameterError(f"unknown formula {formula!r}")
    phi_coef = k * a * a * r0 / den  # phi = phi_coef * P(N1 > 0, N2 > 0)
    return lam, s, phi_coef


def bound_gap(p: SymmetricParams, formula: str = "derived") -> float:
    """|upper - lower| for the symmetric bounds."""
    _, _, phi_coef = _terms(p, formula)
    return abs(phi_coef)


def delay_bounds(p: SymmetricParams, formula: str = "derived") -> DelayBounds:
    """Lower/upper bounds on the mean delay (slots) at one aggregator.

    ``formula="uncorrected"`` evaluates an older expression for S that does not
    satisfy the functional equation; kept for comparison only.
    """
    lam, s, phi_coef = _terms(p, formula)
    gap = abs(phi_coef)
    # D = S - phi_coef * P(N1>0, N2>0)
    if phi_coef < 0:
        lower, upper = s, s + gap
    elif phi_coef > 0:
        lower, upper = s - gap, s
    else:
        lower = upper = s
    if lower <= 0.0 and formula == "derived":
        raise ConsistencyError(f"non-positive delay bound {lower!r}; inconsistent parameters")
    exact = s if phi_coef == 0 else None
    return DelayBounds(lam=lam, lower=lower, upper=upper, gap=upper - lower, exact=exact)


def exact_delay(p: SymmetricParams, p_both_busy: float) -> float:
    """Mean delay given P(N1 > 0, N2 > 0) (e.g. from simulation or a chain solve)."""
    if not 0.0 <= p_both_busy <= 1.0:
        raise InvalidParameterError("p_both_busy must lie in [0, 1]")
    _, s, phi_coef = _terms(p, "derived")
    return s - phi_coef * p_both_busy
