"""Slot-level Monte Carlo simulation of the sensor / aggregator / sink network.

Everything that does not depend on queue state (sensor transmissions, link
outcomes, aggregator coin flips and aggregator link outcomes) is drawn in
vectorised chunks; the queue recursion itself runs in a compiled loop.
Within a slot the head-of-line departure happens before the new arrivals are
enqueued, so a packet spends at least one slot in the queue.

Random numbers come from the Philox4x64 counter-based generator. Replication
``r`` uses the r-th child of ``SeedSequence(seed).spawn``, so every
replication is reproducible on its own and independent of the worker count.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numba
import numpy as np

from .errors import InstabilityError, InvalidParameterError

MODES = ("independent", "full-sinr")
DOMINANT = ("none", "queue1", "queue2")

# columns of the per-block accumulator filled by the queue kernel
_Q1, _Q2, _BUSY1, _BUSY2, _DEP1, _DEP2, _SOJ1, _SOJ2, _BOTH, _ENQ1, _ENQ2, _SLOTS = range(12)
_NACC = 12


@dataclass(frozen=True)
class SimConfig:
    slots: int = 10**6
    warmup: Optional[int] = None  # default: 10% of slots
    seed: int = 0
    replications: int = 1
    mode: str = "independent"
    dominant: str = "none"  # 'queue1' / 'queue2': that queue transmits dummies when empty
    batches: int = 20  # batch-means blocks per replication
    growth_points: int = 200  # queue-length samples per replication for the drift regression
    queue_cap: int = 10**7
    trace: bool = False
    workers: int = 1
    chunk: int = 1 << 16

    def __post_init__(self):
        if self.slots < 1 or self.replications < 1:
            raise InvalidParameterError("slots and replications must be >= 1")
        if self.warmup is not None and not 0 <= self.warmup < self.slots:
            raise InvalidParameterError("warmup must satisfy 0 <= warmup < slots")
        if self.mode not in MODES:
            raise InvalidParameterError(f"mode must be one of {MODES}")
        if self.dominant not in DOMINANT:
            raise InvalidParameterError(f"dominant must be one of {DOMINANT}")
        if self.batches < 2 or self.growth_points < self.batches or self.growth_points % self.batches:
            raise InvalidParameterError("growth_points must be a multiple of batches (>= 2)")
        if self.measured < self.growth_points:
            raise InvalidParameterError("too few measured slots for the requested blocks")

    @property
    def warmup_slots(self) -> int:
        return self.slots // 10 if self.warmup is None else int(self.warmup)

    @property
    def measured(self) -> int:
        return self.slots - self.warmup_slots


@dataclass
class SimStats:
    """Estimates pooled over replications; ``*_se`` are standard errors.

    Per-area quantities are length-2 arrays (area / aggregator 1 and 2).
    """
    slots: int
    replications: int
    t_direct: np.ndarray
    t_direct_se: np.ndarray
    t_relayed: np.ndarray
    t_relayed_se: np.ndarray
    arrival_pmf: list
    arrival_pmf_se: list
    lam: np.ndarray
    lam_se: np.ndarray
    mu: np.ndarray  # departures per busy slot
    mu_se: np.ndarray
    mean_queue: np.ndarray
    mean_queue_se: np.ndarray
    mean_sojourn: np.ndarray
    mean_sojourn_se: np.ndarray
    p_empty: np.ndarray
    p_empty_se: np.ndarray
    p_both_busy: float
    p_both_busy_se: float
    goodput: float  # packets per slot reaching the sink
    goodput_se: float
    slope: np.ndarray  # queue growth per slot over the last half
    slope_se: np.ndarray
    max_queue: np.ndarray
    enqueued: np.ndarray  # (replications, 2), whole run including warmup
    dequeued: np.ndarray
    final: np.ndarray
    growth_t: np.ndarray = field(repr=False)  # block centres (slots)
    growth_q: np.ndarray = field(repr=False)  # (replications, growth_points, 2)
    traces: list = field(default_factory=list, repr=False)

    def summary_rows(self):
        rows = []
        for k in range(2):
            for name in ("t_direct", "t_relayed", "lam", "mu", "mean_queue", "mean_sojourn", "p_empty", "slope"):
                rows.append((f"{name}_{k + 1}", float(getattr(self, name)[k]), float(getattr(self, name + "_se")[k])))
        rows.append(("p_both_busy", self.p_both_busy, self.p_both_busy_se))
        rows.append(("goodput", self.goodput, self.goodput_se))
        return rows

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("metric", "value", "stderr"))
            for name, v, se in self.summary_rows():
                w.writerow((name, repr(v), repr(se)))

    def write_trace(self, path, replication=0):
        if not self.traces:
            raise InvalidParameterError("run with trace=True to export a trace")
        tr = self.traces[replication]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("slot", "q1", "q2", "arrivals1", "arrivals2", "departures1", "departures2"))
            w.writerows(zip(range(len(tr["q"])), tr["q"][:, 0], tr["q"][:, 1],
                            tr["arrivals"][:, 0], tr["arrivals"][:, 1],
                            tr["departures"][:, 0], tr["departures"][:, 1]))


@numba.njit(nogil=True, cache=True)
def _queue_kernel(start, warmup, measured, nblocks, arr1, arr2, tx1, tx2, ok1a, ok2a, ok1b, ok2b,
                  sat1, sat2, buf1, buf2, state, acc, maxq, cap, trace_q, trace_d):
    """Advance both queues over one chunk. Returns -1 or the slot where a queue exceeded ``cap``.

    state = [head1, len1, head2, len2, enq1, enq2, deq1, deq2]; buffers are ring buffers
    of arrival slots with capacity >= len + arrivals in the chunk.
    """
    c1 = buf1.shape[0]
    c2 = buf2.shape[0]
    h1, n1, h2, n2 = state[0], state[1], state[2], state[3]
    tracing = trace_q.shape[0] > 0
    for i in range(arr1.shape[0]):
        g = start + i
        b1 = n1 > 0
        b2 = n2 > 0
        t1 = (b1 or sat1) and tx1[i]
        t2 = (b2 or sat2) and tx2[i]
        s1 = False
        s2 = False
        if t1 and t2:
            s1 = ok1b[i]
            s2 = ok2b[i]
        elif t1:
            s1 = ok1a[i]
        elif t2:
            s2 = ok2a[i]
        meas = g >= warmup
        blk = 0
        if meas:
            blk = (g - warmup) * nblocks // measured
            acc[blk, 0] += n1
            acc[blk, 1] += n2
            acc[blk, 11] += 1
            if b1:
                acc[blk, 2] += 1
            if b2:
                acc[blk, 3] += 1
            if b1 and b2:
                acc[blk, 8] += 1
            if n1 > maxq[0]:
                maxq[0] = n1
            if n2 > maxq[1]:
                maxq[1] = n2
        d1 = 0
        d2 = 0
        if s1 and b1:
            stamp = buf1[h1]
            h1 = (h1 + 1) % c1
            n1 -= 1
            d1 = 1
            state[6] += 1
            if meas:
                acc[blk, 4] += 1
                acc[blk, 6] += g - stamp
        if s2 and b2:
            stamp = buf2[h2]
            h2 = (h2 + 1) % c2
            n2 -= 1
            d2 = 1
            state[7] += 1
            if meas:
                acc[blk, 5] += 1
                acc[blk, 7] += g - stamp
        for _ in range(arr1[i]):
            buf1[(h1 + n1) % c1] = g
            n1 += 1
        for _ in range(arr2[i]):
            buf2[(h2 + n2) % c2] = g
            n2 += 1
        state[4] += arr1[i]
        state[5] += arr2[i]
        if meas:
            acc[blk, 9] += arr1[i]
            acc[blk, 10] += arr2[i]
        if tracing:
            trace_q[g, 0] = n1
            trace_q[g, 1] = n2
            trace_d[g, 0] = d1
            trace_d[g, 1] = d2
        if n1 > cap or n2 > cap:
            state[0], state[1], state[2], state[3] = h1, n1, h2, n2
            return g
    state[0], state[1], state[2], state[3] = h1, n1, h2, n2
    return -1


def _grow(buf, head, n, need):
    """Unroll a ring buffer into a larger array (head becomes 0)."""
    cap = buf.shape[0]
    new = np.empty(max(need, 2 * cap), dtype=buf.dtype)
    idx = (head + np.arange(n)) % cap
    new[:n] = buf[idx]
    return new


class _Sampler:
    """Per-slot draws that do not depend on the queues."""

    def __init__(self, cfg, tables, sim: SimConfig):
        self.cfg = cfg
        self.mode = sim.mode
        self.m = (cfg.m1, cfg.m2)
        self.t = (cfg.t1, cfg.t2)
        self.alpha = (cfg.alpha1, cfg.alpha2)
        g = cfg.channel.gamma
        self.gamma, self.noise = g, cfg.channel.noise_power
        geo = cfg.geometry
        self.vs = np.array([l.mean_power for l in geo.sensor_sink])
        self.va = np.array([l.mean_power for l in geo.sensor_agg])
        self.vr = np.array([l.mean_power for l in geo.agg_sink])
        if sim.mode == "independent":
            if tables is None:
                raise InvalidParameterError("independent-success mode needs success tables")
            if tables.m1 != cfg.m1 or tables.m2 != cfg.m2:
                raise InvalidParameterError("tables were built for different sensor counts")
            self.tables = tables
            p = np.asarray(tables.p_rel_single, dtype=float)
            rel = tables.joint2["relay"]
            self.p_alone = p
            # outcome partition of one uniform: [0, only2) 2 decoded, [only2, only2 + both) both,
            # [.., + only1) 1 decoded. Alone, queue 1 is read from the shifted uniform so that
            # success with interference implies success without it.
            self.cut = (rel.only_b, rel.only_b + rel.both, rel.only_b + rel.both + rel.only_a)

    def sensors(self, rng, c):
        """(direct counts (c, 2), relayed counts (c, 2))."""
        if self.mode == "independent":
            return self._sensors_independent(rng, c)
        return self._sensors_sinr(rng, c)

    def _sensors_independent(self, rng, c):
        tb = self.tables
        n = np.stack([rng.binomial(self.m[a], self.t[a], c) for a in range(2)], axis=1)
        direct = np.empty((c, 2), dtype=np.int64)
        relayed = np.empty((c, 2), dtype=np.int64)
        pair = (n[:, 0] == 1) & (n[:, 1] == 1)
        u = rng.random(c)
        sink = tb.joint2["sink"]
        # one sensor per area: joint sink outcome
        ja = np.where(u < sink.both + sink.only_a, 1, 0)
        jb = np.where((u < sink.both) | ((u >= sink.both + sink.only_a) & (u < sink.marginal_a + sink.only_b)), 1, 0)
        for a in range(2):
            pd = tb.p_dir[a][n[:, 0], n[:, 1]]
            d = rng.binomial(n[:, a], pd)
            d = np.where(pair, ja if a == 0 else jb, d)
            direct[:, a] = d
            relayed[:, a] = rng.binomial(n[:, a] - d, tb.p_agg[a][n[:, a]])
        return direct, relayed

    def _sensors_sinr(self, rng, c):
        g, eta = self.gamma, self.noise
        m1, m2 = self.m
        area = np.repeat([0, 1], [m1, m2])
        tx = rng.random((c, m1 + m2)) < np.asarray(self.t)[area]
        xs = rng.exponential(1.0, (c, m1 + m2)) * self.vs[area] * tx
        tot = xs.sum(axis=1, keepdims=True)
        sink_ok = tx & (xs >= g * (tot - xs + eta))
        xa = rng.exponential(1.0, (c, m1 + m2)) * self.va[area] * tx
        direct = np.empty((c, 2), dtype=np.int64)
        relayed = np.empty((c, 2), dtype=np.int64)
        for a in range(2):
            cols = area == a
            own = xa[:, cols]
            agg_ok = tx[:, cols] & (own >= g * (own.sum(axis=1, keepdims=True) - own + eta))
            direct[:, a] = sink_ok[:, cols].sum(axis=1)
            relayed[:, a] = (agg_ok & ~sink_ok[:, cols]).sum(axis=1)
        return direct, relayed

    def aggregators(self, rng, c):
        """(tx1, tx2, ok1 alone, ok2 alone, ok1 both, ok2 both) boolean arrays."""
        tx1 = rng.random(c) < self.alpha[0]
        tx2 = rng.random(c) < self.alpha[1]
        if self.mode == "independent":
            u = rng.random(c)
            c0, c1, c2 = self.cut
            p1, p2 = self.p_alone
            ok2a = u < p2
            ok1a = np.mod(u - c0, 1.0) < p1
            ok2b = u < c1
            ok1b = (u >= c0) & (u < c2)
        else:
            g, eta = self.gamma, self.noise
            x1 = rng.exponential(self.vr[0], c)
            x2 = rng.exponential(self.vr[1], c)
            ok1a = x1 >= g * eta
            ok2a = x2 >= g * eta
            ok1b = x1 >= g * (x2 + eta)
            ok2b = x2 >= g * (x1 + eta)
        return tx1, tx2, ok1a, ok2a, ok1b, ok2b


def _replicate(cfg, tables, sim: SimConfig, seed_seq):
    rng = np.random.Generator(np.random.Philox(seed_seq))
    sampler = _Sampler(cfg, tables, sim)
    warm, meas, nb = sim.warmup_slots, sim.measured, sim.growth_points
    acc = np.zeros((nb, _NACC))
    mpmf = [np.zeros((nb, m + 1)) for m in (cfg.m1, cfg.m2)]
    sensor_acc = np.zeros((nb, 4))  # direct1, direct2, relayed1, relayed2
    state = np.zeros(8, dtype=np.int64)
    maxq = np.zeros(2, dtype=np.int64)
    bufs = [np.empty(1024, dtype=np.int64), np.empty(1024, dtype=np.int64)]
    if sim.trace:
        trace_q = np.zeros((sim.slots, 2), dtype=np.int64)
        trace_d = np.zeros((sim.slots, 2), dtype=np.int64)
        trace_a = np.zeros((sim.slots, 2), dtype=np.int64)
    else:
        trace_q = np.zeros((0, 2), dtype=np.int64)
        trace_d = trace_q
    sat1, sat2 = sim.dominant == "queue1", sim.dominant == "queue2"
    start = 0
    while start < sim.slots:
        c = min(sim.chunk, sim.slots - start)
        direct, relayed = sampler.sensors(rng, c)
        aggs = sampler.aggregators(rng, c)
        for k in range(2):
            head, n = state[2 * k], state[2 * k + 1]
            need = n + int(relayed[:, k].sum()) + 1
            if need > bufs[k].shape[0]:
                bufs[k] = _grow(bufs[k], head, n, need)
                state[2 * k] = 0
        g = start + np.arange(c)
        m = g >= warm
        if m.any():
            blk = (g[m] - warm) * nb // meas
            for col, v in enumerate((direct[m, 0], direct[m, 1], relayed[m, 0], relayed[m, 1])):
                sensor_acc[:, col] += np.bincount(blk, weights=v, minlength=nb)
            for k in range(2):
                np.add.at(mpmf[k], (blk, relayed[m, k]), 1.0)
        if sim.trace:
            trace_a[start:start + c] = relayed
        err = _queue_kernel(start, warm, meas, nb, np.ascontiguousarray(relayed[:, 0]),
                            np.ascontiguousarray(relayed[:, 1]), *aggs, sat1, sat2,
                            bufs[0], bufs[1], state, acc, maxq, sim.queue_cap, trace_q, trace_d)
        if err >= 0:
            raise InstabilityError(f"queue length exceeded cap {sim.queue_cap} at slot {err}: "
                                   f"queues ({state[1]}, {state[3]}); the load is beyond the stability region")
        start += c
    traces = None
    if sim.trace:
        traces = {"q": trace_q, "departures": trace_d, "arrivals": trace_a}
    counters = (state[4:6].copy(), state[6:8].copy(), np.array([state[1], state[3]]))
    return acc, sensor_acc, mpmf, maxq, counters, traces


def _mean_se(blocks):
    """Mean and batch-means standard error of per-block means (first axis = blocks)."""
    b = np.asarray(blocks, dtype=float)
    n = b.shape[0]
    return b.mean(axis=0), b.std(axis=0, ddof=1) / math.sqrt(n)


def _ratio_se(x, y):
    """Ratio-of-sums estimate and delta-method standard error over blocks."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    n = x.shape[0]
    sx, sy = x.sum(axis=0), y.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(sy > 0, sx / sy, np.nan)
        resid = x - r * y
        se = np.sqrt((resid ** 2).sum(axis=0) / (n * (n - 1))) / (sy / n)
    return r, np.where(sy > 0, se, np.nan)


def _slope(t, q):
    """OLS slope of q on t with its standard error; q is (replications, points)."""
    tt = np.tile(t, q.shape[0])
    qq = q.ravel()
    tc = tt - tt.mean()
    sxx = float(tc @ tc)
    b = float(tc @ (qq - qq.mean())) / sxx
    resid = qq - qq.mean() - b * tc
    dof = max(len(qq) - 2, 1)
    se = math.sqrt(float(resid @ resid) / dof / sxx)
    return b, se


def run(cfg, tables, sim: SimConfig = SimConfig()) -> SimStats:
    """Simulate ``sim.replications`` independent runs and pool the estimates."""
    children = np.random.SeedSequence(sim.seed).spawn(sim.replications)
    if sim.workers > 1 and sim.replications > 1:
        with ThreadPoolExecutor(max_workers=sim.workers) as ex:
            reps = list(ex.map(lambda s: _replicate(cfg, tables, sim, s), children))
    else:
        reps = [_replicate(cfg, tables, sim, s) for s in children]
    return _pool(cfg, sim, reps)


def _pool(cfg, sim, reps):
    nb, per = sim.growth_points, sim.growth_points // sim.batches
    fine = np.stack([r[0] for r in reps])  # (R, nb, NACC)
    # coarse batches for standard errors
    coarse = fine.reshape(len(reps), sim.batches, per, _NACC).sum(axis=2).reshape(-1, _NACC)
    sens = np.stack([r[1] for r in reps]).reshape(len(reps), sim.batches, per, 4).sum(axis=2).reshape(-1, 4)
    slots = coarse[:, _SLOTS:_SLOTS + 1]
    m = np.array([cfg.m1, cfg.m2], dtype=float)
    msafe = np.where(m > 0, m, 1.0)

    per_slot = lambda cols: _mean_se(coarse[:, cols] / slots)
    td, td_se = _mean_se(sens[:, :2] / slots / msafe)
    tr, tr_se = _mean_se(sens[:, 2:] / slots / msafe)
    lam, lam_se = per_slot([_ENQ1, _ENQ2])
    mu, mu_se = _ratio_se(coarse[:, [_DEP1, _DEP2]], coarse[:, [_BUSY1, _BUSY2]])
    mq, mq_se = per_slot([_Q1, _Q2])
    soj, soj_se = _ratio_se(coarse[:, [_SOJ1, _SOJ2]], coarse[:, [_DEP1, _DEP2]])
    busy, busy_se = per_slot([_BUSY1, _BUSY2])
    both, both_se = per_slot([_BOTH])
    good, good_se = _mean_se((sens[:, 0] + sens[:, 1] + coarse[:, _DEP1] + coarse[:, _DEP2]) / slots[:, 0])

    pmf, pmf_se = [], []
    for k in range(2):
        h = np.stack([r[2][k] for r in reps]).reshape(len(reps), sim.batches, per, -1).sum(axis=2)
        h = h.reshape(-1, h.shape[-1])
        mean, se = _mean_se(h / slots)
        pmf.append(mean)
        pmf_se.append(se)

    t = (np.arange(nb) + 0.5) * sim.measured / nb + sim.warmup_slots
    gq = fine[:, :, [_Q1, _Q2]] / fine[:, :, _SLOTS:_SLOTS + 1]
    half = nb // 2
    sl = [_slope(t[half:], gq[:, half:, k]) for k in range(2)]

    return SimStats(
        slots=sim.slots, replications=sim.replications,
        t_direct=np.where(m > 0, td, 0.0), t_direct_se=np.where(m > 0, td_se, 0.0),
        t_relayed=np.where(m > 0, tr, 0.0), t_relayed_se=np.where(m > 0, tr_se, 0.0),
        arrival_pmf=pmf, arrival_pmf_se=pmf_se, lam=lam, lam_se=lam_se,
        mu=mu, mu_se=mu_se, mean_queue=mq, mean_queue_se=mq_se,
        mean_sojourn=soj, mean_sojourn_se=soj_se,
        p_empty=1.0 - busy, p_empty_se=busy_se,
        p_both_busy=float(both[0]), p_both_busy_se=float(both_se[0]),
        goodput=float(good), goodput_se=float(good_se),
        slope=np.array([s[0] for s in sl]), slope_se=np.array([s[1] for s in sl]),
        max_queue=np.max(np.stack([r[3] for r in reps]), axis=0),
        enqueued=np.stack([r[4][0] for r in reps]), dequeued=np.stack([r[4][1] for r in reps]),
        final=np.stack([r[4][2] for r in reps]),
        growth_t=t, growth_q=gq,
        traces=[r[5] for r in reps] if sim.trace else [],
    )


def dominant_run(cfg, tables, sim: SimConfig = SimConfig(), saturated: int = 1) -> SimStats:
    """Run the dominant system where queue ``saturated`` transmits dummy packets when empty."""
    if saturated not in (1, 2):
        raise InvalidParameterError("saturated must be 1 or 2")
    return run(cfg, tables, replace(sim, dominant=f"queue{saturated}"))


def dominance_violations(cfg, tables, sim: SimConfig = SimConfig(), saturated: int = 1) -> int:
    """Slots where a queue of the dominant system is shorter than in the original one.

    Both systems are driven by the same random numbers (same seed); the result
    is summed over replications and queues.
    """
    base = run(cfg, tables, replace(sim, trace=True, dominant="none"))
    dom = run(cfg, tables, replace(sim, trace=True, dominant=f"queue{saturated}"))
    return int(sum(np.sum(d["q"] < b["q"]) for b, d in zip(base.traces, dom.traces)))


def estimate_stability(stats: SimStats, queue: Optional[int] = None) -> str:
    """'stable', 'unstable' or 'inconclusive' from the queue drift over the last half of the run.

    Without ``queue`` the network is unstable if either queue is, stable if both are.
    """
    def one(k):
        b, se = stats.slope[k], stats.slope_se[k]
        if se == 0.0:
            # constant queue length (e.g. no traffic)
            return "stable" if stats.max_queue[k] < math.sqrt(stats.slots) else "inconclusive"
        if b > 10 * se:
            return "unstable"
        if abs(b) <= 2 * se and stats.max_queue[k] < math.sqrt(stats.slots):
            return "stable"
        return "inconclusive"

    if queue is not None:
        return one(queue - 1)
    labels = [one(0), one(1)]
    if "unstable" in labels:
        return "unstable"
    if labels == ["stable", "stable"]:
        return "stable"
    return "inconclusive"
