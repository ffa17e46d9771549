"""Link-level reception probabilities under Rayleigh block fading.

A transmission succeeds when its SINR at the receiver reaches the threshold
``gamma``. Fading is exponential with mean ``fading * power * distance**-theta``,
independent across links and slots.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConsistencyError, InvalidGeometryError, InvalidParameterError, TableSizeError


@dataclass(frozen=True)
class LinkGeometry:
    distance: float
    tx_power: float
    path_loss_exp: float = 4.0
    fading: float = 1.0  # mean of the exponential power gain

    def __post_init__(self):
        for name in ("distance", "tx_power", "path_loss_exp", "fading"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise InvalidGeometryError(f"{name} must be positive and finite, got {v!r}")

    @property
    def mean_power(self) -> float:
        """Mean received power v*h."""
        return self.fading * received_power_factor(self)


@dataclass(frozen=True)
class ChannelParams:
    gamma: float
    noise_power: float = 0.0

    def __post_init__(self):
        if not self.gamma > 0 or not np.isfinite(self.gamma):
            raise InvalidParameterError(f"SINR threshold must be positive, got {self.gamma!r}")
        if self.noise_power < 0 or not np.isfinite(self.noise_power):
            raise InvalidParameterError(f"noise power must be >= 0, got {self.noise_power!r}")


class JointOutcome(NamedTuple):
    both: float
    only_a: float
    only_b: float
    neither: float

    @property
    def marginal_a(self) -> float:
        return self.both + self.only_a

    @property
    def marginal_b(self) -> float:
        return self.both + self.only_b


def received_power_factor(link: LinkGeometry) -> float:
    return link.tx_power * link.distance ** (-link.path_loss_exp)


def _success(mean_target, mean_interf, gamma, noise):
    """Vectorised success probability from mean received powers."""
    mean_target = np.asarray(mean_target, dtype=float)
    p = np.exp(-gamma * noise / mean_target)
    for m in mean_interf:
        p = p / (1.0 + gamma * m / mean_target)
    return p


def marginal_success(target: LinkGeometry, interferers: Sequence[LinkGeometry], channel: ChannelParams) -> float:
    """P(SINR >= gamma) for ``target`` with the given set of active interferers."""
    return float(_success(target.mean_power, [l.mean_power for l in interferers],
                          channel.gamma, channel.noise_power))


def _joint_from_means(va, vb, gamma, noise):
    a, b = 1.0 / va, 1.0 / vb
    ma = float(_success(va, [vb], gamma, noise))
    mb = float(_success(vb, [va], gamma, noise))
    if gamma >= 1.0:
        both = 0.0
    else:
        # X ~ Exp(a), Y ~ Exp(b); both decoded iff X >= g(Y + n) and Y >= g(X + n),
        # i.e. Y > y* and g(Y + n) <= X <= (Y - g n)/g. Integrate over Y.
        ys = gamma * noise / (1.0 - gamma)
        k1, k2 = b + a * gamma, b + a / gamma
        both = (b / k1) * np.exp(-a * gamma * noise - k1 * ys) - (b / k2) * np.exp(a * noise - k2 * ys)
        both = float(min(max(both, 0.0), ma, mb))
    only_a = ma - both
    only_b = mb - both
    neither = 1.0 - ma - mb + both
    return JointOutcome(both, only_a, only_b, max(neither, 0.0))


def joint_two_tx(link_a: LinkGeometry, link_b: LinkGeometry, channel: ChannelParams) -> JointOutcome:
    """Exact outcome probabilities when two transmitters hit one receiver."""
    return _joint_from_means(link_a.mean_power, link_b.mean_power, channel.gamma, channel.noise_power)


def joint_two_tx_mc(link_a: LinkGeometry, link_b: LinkGeometry, channel: ChannelParams,
                    n: int = 10**7, seed: int = 0, chunk: int = 10**6) -> JointOutcome:
    """Monte Carlo estimate of :func:`joint_two_tx`."""
    rng = np.random.Generator(np.random.Philox(seed))
    va, vb = link_a.mean_power, link_b.mean_power
    g, eta = channel.gamma, channel.noise_power
    counts = np.zeros(4)
    left = n
    while left > 0:
        k = min(chunk, left)
        x = rng.exponential(va, k)
        y = rng.exponential(vb, k)
        sa = x >= g * (y + eta)
        sb = y >= g * (x + eta)
        counts += [np.sum(sa & sb), np.sum(sa & ~sb), np.sum(~sa & sb), np.sum(~sa & ~sb)]
        left -= k
    return JointOutcome(*(counts / n))


@dataclass
class SuccessTables:
    """Per-slot reception probabilities for every contention state.

    p_agg[a][i]     area-a sensor decoded at its aggregator with i same-area transmitters
    p_dir[a][i, j]  area-a sensor decoded at the sink with i area-1 and j area-2 transmitters
    p_rel_single[k] aggregator k decoded at the sink when transmitting alone
    p_rel_both[k]   aggregator k decoded when both aggregators transmit (marginal)
    p_rel_joint     both aggregators decoded in the same slot
    joint2          exact outcomes for the two-transmitter cases ('sink', 'relay', 'agg1', 'agg2')
    """
    p_agg: list
    p_dir: list
    p_rel_single: np.ndarray
    p_rel_both: np.ndarray
    p_rel_joint: float
    joint2: dict = field(default_factory=dict)

    @property
    def m1(self) -> int:
        return self.p_dir[0].shape[0] - 1

    @property
    def m2(self) -> int:
        return self.p_dir[0].shape[1] - 1

    @property
    def p_rel_only(self) -> np.ndarray:
        """Exclusive success of each aggregator when both transmit."""
        return np.asarray(self.p_rel_both) - self.p_rel_joint

    def validate(self, tol: float = 1e-12) -> None:
        arrays = list(self.p_agg) + list(self.p_dir) + [np.asarray(self.p_rel_single), np.asarray(self.p_rel_both)]
        for arr in arrays:
            arr = np.asarray(arr)
            if np.any(arr < -tol) or np.any(arr > 1 + tol) or not np.all(np.isfinite(arr)):
                raise ConsistencyError("success probability outside [0, 1]")
        for a in range(2):
            if np.any(np.diff(self.p_agg[a]) > tol):
                raise ConsistencyError("aggregator success must not increase with contention")
            pd = self.p_dir[a]
            if np.any(np.diff(pd[1:, :], axis=1) > tol) or np.any(np.diff(pd[:, 1:], axis=0) > tol):
                raise ConsistencyError("sink success must not increase with contention")
        if np.any(np.asarray(self.p_rel_both) > np.asarray(self.p_rel_single) + tol):
            raise ConsistencyError("relay success with interference exceeds interference-free value")
        for name, jo in self.joint2.items():
            if abs(sum(jo) - 1.0) > 1e-9 or min(jo) < -tol:
                raise ConsistencyError(f"joint outcome '{name}' does not form a distribution")

    def to_csv(self, path) -> None:
        """Write all tables in long format to a path or an open text file."""
        rows = []
        for a in range(2):
            for i, v in enumerate(self.p_agg[a]):
                rows.append(("p_agg", a + 1, i, "", repr(float(v))))
            pd = self.p_dir[a]
            for i in range(pd.shape[0]):
                for j in range(pd.shape[1]):
                    rows.append(("p_dir", a + 1, i, j, repr(float(pd[i, j]))))
            rows.append(("p_rel_single", a + 1, "", "", repr(float(self.p_rel_single[a]))))
            rows.append(("p_rel_both", a + 1, "", "", repr(float(self.p_rel_both[a]))))
        rows.append(("p_rel_joint", "", "", "", repr(float(self.p_rel_joint))))
        for name in sorted(self.joint2):
            for lab, v in zip(JointOutcome._fields, self.joint2[name]):
                rows.append((f"joint_{name}_{lab}", "", "", "", repr(float(v))))
        if hasattr(path, "write"):
            self._write(path, rows)
        else:
            with open(path, "w", newline="") as fh:
                self._write(fh, rows)

    @staticmethod
    def _write(fh, rows):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("table", "area", "i", "j", "value"))
        w.writerows(rows)


def build_tables(cfg, max_cells: int = 10**6) -> SuccessTables:
    """Tabulate success probabilities for a :class:`~aggrnet.network.NetworkConfig`."""
    m1, m2 = cfg.m1, cfg.m2
    if (m1 + 1) * (m2 + 1) > max_cells:
        raise TableSizeError(f"table with {(m1 + 1) * (m2 + 1)} cells exceeds cap {max_cells}")
    g, eta = cfg.channel.gamma, cfg.channel.noise_power
    geo = cfg.geometry
    vs = [l.mean_power for l in geo.sensor_sink]
    va = [l.mean_power for l in geo.sensor_agg]
    vr = [l.mean_power for l in geo.agg_sink]
    counts = (m1, m2)

    p_agg = []
    for a in range(2):
        i = np.arange(counts[a] + 1)
        p = np.exp(-g * eta / va[a]) / (1.0 + g) ** np.maximum(i - 1, 0)
        p[0] = 1.0
        p_agg.append(p)

    i = np.arange(m1 + 1)[:, None]
    j = np.arange(m2 + 1)[None, :]
    p_dir = []
    for a, (own, other) in enumerate(((i, j), (j, i))):
        ratio = vs[1 - a] / vs[a]
        p = np.exp(-g * eta / vs[a]) / (1.0 + g) ** np.maximum(own - 1, 0) / (1.0 + g * ratio) ** other
        p = np.where(own == 0, 1.0, p)
        p_dir.append(np.broadcast_to(p, (m1 + 1, m2 + 1)).copy())

    relay = _joint_from_means(vr[0], vr[1], g, eta)
    p_rel_single = np.exp(-g * eta / np.asarray(vr))
    p_rel_both = np.array([relay.marginal_a, relay.marginal_b])
    joint2 = {
        "sink": _joint_from_means(vs[0], vs[1], g, eta),
        "relay": relay,
        "agg1": _joint_from_means(va[0], va[0], g, eta),
        "agg2": _joint_from_means(va[1], va[1], g, eta),
    }
    tables = SuccessTables(p_agg, p_dir, p_rel_single, p_rel_both, relay.both, joint2)
    tables.validate()
    return tables
