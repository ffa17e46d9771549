"""Independent reference computations used only by the tests."""
import itertools

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spl


def queue_chain(lam1, lam2, lam12, alpha1, alpha2, p1, p2, q1, q2, r0, n=160):
    """Stationary law of the two-queue chain truncated at n packets per queue.

    Arrivals: Bernoulli pair with P(A1=1)=lam1, P(A2=1)=lam2, P(both)=lam12.
    Aggregator k transmits w.p. alpha_k when non-empty; alone it succeeds w.p.
    p_k, together exactly k succeeds w.p. q_k and both w.p. r0.
    Departures happen before arrivals within a slot. Returns pi[i, j].
    """
    arr = {(1, 1): lam12, (1, 0): lam1 - lam12, (0, 1): lam2 - lam12}
    arr[(0, 0)] = 1.0 - sum(arr.values())
    size = (n + 1) ** 2
    rows, cols, vals = [], [], []
    for i in range(n + 1):
        for j in range(n + 1):
            if i > 0 and j > 0:
                dep = {(1, 0): alpha1 * (1 - alpha2) * p1 + alpha1 * alpha2 * q1,
                       (0, 1): alpha2 * (1 - alpha1) * p2 + alpha1 * alpha2 * q2,
                       (1, 1): alpha1 * alpha2 * r0}
            elif i > 0:
                dep = {(1, 0): alpha1 * p1}
            elif j > 0:
                dep = {(0, 1): alpha2 * p2}
            else:
                dep = {}
            dep[(0, 0)] = 1.0 - sum(dep.values())
            for (d1, d2), pd in dep.items():
                for (e1, e2), pe in arr.items():
                    rows.append(i * (n + 1) + j)
                    cols.append(min(i - d1 + e1, n) * (n + 1) + min(j - d2 + e2, n))
                    vals.append(pd * pe)
    P = sp.csr_matrix((vals, (rows, cols)), shape=(size, size))
    A = (P.T - sp.eye(size)).tolil()
    A[0, :] = 1.0
    b = np.zeros(size)
    b[0] = 1.0
    return spl.spsolve(A.tocsc(), b).reshape(n + 1, n + 1)


def chain_delays(pi, lam1, lam2):
    k = np.arange(pi.shape[0])
    return (pi.sum(axis=1) @ k) / lam1, (pi.sum(axis=0) @ k) / lam2


def enumerate_throughput(cfg, tables):
    """Brute force over transmit patterns and per-sensor outcomes.

    Returns dict with t_direct, t_relayed (per area) and arrival pmfs.
    """
    m = (cfg.m1, cfg.m2)
    t = (cfg.t1, cfg.t2)
    sensors = [0] * m[0] + [1] * m[1]
    td = [0.0, 0.0]
    tr = [0.0, 0.0]
    pmf = [np.zeros(m[0] + 1), np.zeros(m[1] + 1)]
    for pattern in itertools.product((0, 1), repeat=len(sensors)):
        w = 1.0
        for s, on in zip(sensors, pattern):
            w *= t[s] if on else 1 - t[s]
        cnt = [sum(on for s, on in zip(sensors, pattern) if s == a) for a in range(2)]
        active = [s for s, on in zip(sensors, pattern) if on]
        # each active sensor: 0 = sink, 1 = relayed, 2 = lost
        for outcome in itertools.product((0, 1, 2), repeat=len(active)):
            pw = w
            arrivals = [0, 0]
            for s, o in zip(active, outcome):
                pd = tables.p_dir[s][cnt[0], cnt[1]]
                pa = tables.p_agg[s][cnt[s]]
                pw *= (pd, (1 - pd) * pa, (1 - pd) * (1 - pa))[o]
                if o == 1:
                    arrivals[s] += 1
            for s, o in zip(active, outcome):
                if o == 0:
                    td[s] += pw
                elif o == 1:
                    tr[s] += pw
            for a in range(2):
                pmf[a][arrivals[a]] += pw
    return {
        "t_direct": [td[a] / m[a] if m[a] else 0.0 for a in range(2)],
        "t_relayed": [tr[a] / m[a] if m[a] else 0.0 for a in range(2)],
        "arrival_pmf": pmf,
    }


def random_kernel_params(rng, max_tries=1000):
    """Random physical two-queue parameters strictly inside the stability region."""
    from aggrnet.bvp import KernelParams
    for _ in range(max_tries):
        al = rng.uniform(0.3, 0.95, 2)
        p = rng.uniform(0.5, 1.0, 2)
        q = p * rng.uniform(0.05, 0.9, 2)
        if q.sum() > 1.0:
            q = q / q.sum() * rng.uniform(0.5, 1.0)
        kp = KernelParams(0.0, 0.0, 0.0, al[0], al[1], p[0], p[1], q[0], q[1])
        lam2 = rng.uniform(0.05, 0.9) * kp.a2
        lam1 = rng.uniform(0.05, 0.9) * min(kp.e1 + kp.d1 * lam2 / kp.a2, kp.a1)
        lam12 = rng.uniform(0.0, 1.0) * lam1 * lam2
        if lam2 >= kp.e2 + kp.d2 * lam1 / kp.a1:
            continue
        return KernelParams(lam1, lam2, lam12, al[0], al[1], p[0], p[1], q[0], q[1])
    raise RuntimeError("no stable parameter set found")
