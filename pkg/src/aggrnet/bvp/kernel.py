"""Kernel of the functional equation for the joint queue-length generating function.

For one sensor per area the aggregators see Bernoulli arrivals with
P(A1=1)=lam1, P(A2=1)=lam2, P(A1=A2=1)=lam12 and joint PGF

    L(x, y) = 1 - (1-x) lam1 - (1-y) lam2 + (1-x)(1-y) lam12.

With a_k the departure probability of queue k when both are busy and
e_k = alpha_k p_k when alone, the kernel is

    R(x, y) = 1 - L(x, y) [1 - a1 (1 - 1/x) - a2 (1 - 1/y)]

and x y R(x, y) is a polynomial of degree two in each variable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq

from ..errors import BranchPointError, InstabilityError, InvalidParameterError


@dataclass(frozen=True)
class KernelParams:
    """Two-queue model with at most one aggregator decoded per slot.

    p_k: aggregator k decoded when transmitting alone.
    q_k: aggregator k decoded when both transmit.
    """
    lam1: float
    lam2: float
    lam12: float
    alpha1: float
    alpha2: float
    p1: float
    p2: float
    q1: float
    q2: float

    def __post_init__(self):
        for name in ("lam1", "lam2", "lam12", "alpha1", "alpha2", "p1", "p2", "q1", "q2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidParameterError(f"{name} must lie in [0, 1], got {v!r}")
        if self.lam12 > min(self.lam1, self.lam2) + 1e-15 or self.lam1 + self.lam2 - self.lam12 > 1 + 1e-15:
            raise InvalidParameterError("arrival probabilities are not a joint Bernoulli law")
        if self.q1 + self.q2 > 1.0 + 1e-15:
            raise InvalidParameterError("exclusive decoding probabilities exceed one")

    @classmethod
    def from_network(cls, cfg, tables, tol=1e-15):
        """Kernel parameters for a one-sensor-per-area configuration."""
        if cfg.m1 != 1 or cfg.m2 != 1:
            raise InvalidParameterError("kernel model needs exactly one sensor per area")
        if tables.p_rel_joint > tol:
            raise InvalidParameterError("kernel model needs at most one aggregator decoded per slot")
        sink = tables.joint2["sink"]
        t1, t2 = cfg.t1, cfg.t2
        r1, r2 = float(tables.p_agg[0][1]), float(tables.p_agg[1][1])
        lam1 = t1 * (1 - t2) * (1 - tables.p_dir[0][1, 0]) * r1 + t1 * t2 * (1 - sink.marginal_a) * r1
        lam2 = t2 * (1 - t1) * (1 - tables.p_dir[1][0, 1]) * r2 + t1 * t2 * (1 - sink.marginal_b) * r2
        lam12 = t1 * t2 * sink.neither * r1 * r2
        only = tables.p_rel_only
        return cls(float(lam1), float(lam2), float(lam12), cfg.alpha1, cfg.alpha2,
                   float(tables.p_rel_single[0]), float(tables.p_rel_single[1]),
                   float(only[0]), float(only[1]))

    def swapped(self) -> "KernelParams":
        return KernelParams(self.lam2, self.lam1, self.lam12, self.alpha2, self.alpha1,
                            self.p2, self.p1, self.q2, self.q1)

    # success of queue k given it transmits and the other queue is busy
    @property
    def hat2(self) -> float:
        return (1 - self.alpha2) * self.p1 + self.alpha2 * self.q1

    @property
    def hat1(self) -> float:
        return (1 - self.alpha1) * self.p2 + self.alpha1 * self.q2

    @property
    def a1(self) -> float:
        return self.alpha1 * self.hat2

    @property
    def a2(self) -> float:
        return self.alpha2 * self.hat1

    @property
    def e1(self) -> float:
        return self.alpha1 * self.p1

    @property
    def e2(self) -> float:
        return self.alpha2 * self.p2

    @property
    def d1(self) -> float:
        return self.a1 - self.e1

    @property
    def d2(self) -> float:
        return self.a2 - self.e2

    def L(self, x, y):
        return 1 - (1 - x) * self.lam1 - (1 - y) * self.lam2 + (1 - x) * (1 - y) * self.lam12

    def A(self, x, y):
        return self.L(x, y) * (self.d1 * (1 - 1 / x) + self.a2 * (1 - 1 / y))

    def B(self, x, y):
        return self.L(x, y) * (self.a1 * (1 - 1 / x) + self.d2 * (1 - 1 / y))

    def C(self, x, y):
        return -self.L(x, y) * (self.d1 * (1 - 1 / x) + self.d2 * (1 - 1 / y))


def kernel_eval(x, y, kp: KernelParams):
    return 1 - kp.L(x, y) * (1 - kp.a1 * (1 - 1 / x) - kp.a2 * (1 - 1 / y))


def kernel_poly(kp: KernelParams) -> np.ndarray:
    """Coefficients K[i, j] of x^i y^j in x y R(x, y)."""
    Lc = np.array([[1 - kp.lam1 - kp.lam2 + kp.lam12, kp.lam2 - kp.lam12],
                   [kp.lam1 - kp.lam12, kp.lam12]])
    # x y - a1 y (x - 1) - a2 x (y - 1)
    Bc = np.array([[0.0, kp.a1], [kp.a2, 1 - kp.a1 - kp.a2]])
    K = -_polymul2d(Lc, Bc)
    K[1, 1] += 1.0
    return K


def _polymul2d(a, b):
    out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1))
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            out[i:i + b.shape[0], j:j + b.shape[1]] += a[i, j] * b
    return out


def coeffs_in_y(kp, x):
    """(a(x), b(x), c(x)) with x y R = a y^2 + b y + c."""
    K = kernel_poly(kp)
    return P.polyval(x, K[:, 2]), P.polyval(x, K[:, 1]), P.polyval(x, K[:, 0])


def coeffs_in_x(kp, y):
    """(ahat(y), bhat(y), chat(y)) with x y R = ahat x^2 + bhat x + chat."""
    K = kernel_poly(kp)
    return P.polyval(y, K[2]), P.polyval(y, K[1]), P.polyval(y, K[0])


def discriminant_y(kp) -> np.ndarray:
    """Coefficients (ascending) of D_y(y) = bhat^2 - 4 ahat chat."""
    K = kernel_poly(kp)
    return P.polysub(P.polymul(K[1], K[1]), 4 * P.polymul(K[2], K[0]))


def discriminant_x(kp) -> np.ndarray:
    K = kernel_poly(kp)
    return P.polysub(P.polymul(K[:, 1], K[:, 1]), 4 * P.polymul(K[:, 2], K[:, 0]))


def _quad_roots(a, b, c):
    a, b, c = (np.asarray(v, dtype=complex) for v in (a, b, c))
    s = np.sqrt(b * b - 4 * a * c)
    # numerically stable pair
    q = -0.5 * (b + np.where(np.real(np.conj(b) * s) >= 0, s, -s))
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = q / a
        r2 = c / q
    r1 = np.where(a == 0, -c / b, r1)
    return r1, r2


def root_in_unit_disk(y, kp: KernelParams, check=True):
    """Root X0(y) of R(x, y) = 0 with the smaller modulus.

    For |y| = 1, y != 1 this is the unique root inside the unit disk; X0(1) = 1
    when lam1 < a1. On the slit [y1, y2] the two roots are conjugate and the
    one with non-negative imaginary part is returned.
    """
    y = np.asarray(y, dtype=complex)
    a, b, c = coeffs_in_x(kp, y)
    r1, r2 = _quad_roots(a, b, c)
    swap = np.abs(r2) < np.abs(r1) - 1e-14
    tie = np.abs(np.abs(r2) - np.abs(r1)) <= 1e-14
    swap = swap | (tie & (r2.imag > r1.imag))
    x0 = np.where(swap, r2, r1)
    if check:
        on_circle = np.isclose(np.abs(y), 1.0, atol=1e-12) & ~np.isclose(y, 1.0, atol=1e-9)
        if np.any(on_circle & (np.abs(x0) >= 1.0)):
            raise InstabilityError("no kernel root inside the unit disk; parameters violate stability")
        # at y = 1 the roots are 1 and a1/lam1
        if np.any(np.isclose(y, 1.0, atol=1e-14)) and kp.lam1 >= kp.a1:
            raise InstabilityError("X0(1) = 1 requires lam1 < a1")
    return x0 if x0.ndim else complex(x0)


def root_y_in_unit_disk(x, kp: KernelParams, check=True):
    """Mirrored root Y0(x) of R(x, y) = 0."""
    return root_in_unit_disk(x, kp.swapped(), check=check)


@dataclass(frozen=True)
class BranchPoints:
    x: tuple
    y: tuple


def _quartic_real_roots(coeffs, name):
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
    scale = np.max(np.abs(c))
    if scale == 0:
        raise BranchPointError(f"{name}: discriminant vanishes identically")
    c = c / scale
    while len(c) > 1 and abs(c[-1]) < 1e-14:
        c = c[:-1]
    roots = np.roots(c[::-1])  # companion-matrix eigenvalues
    real = np.sort(roots[np.abs(roots.imag) < 1e-7 * np.maximum(1, np.abs(roots))].real)
    polished = []
    f = lambda v: P.polyval(v, c)
    for r in real:
        h = 1e-6 * max(1.0, abs(r))
        lo, hi = r - h, r + h
        if f(lo) * f(hi) < 0:
            r = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        polished.append(r)
    return np.array(polished), c


def branch_points(kp: KernelParams) -> BranchPoints:
    """Real zeros of the discriminants, ordered 0 <= r1 < r2 <= 1 < r3 < r4.

    A missing fourth root (vanishing leading coefficient) is reported as +inf.
    """
    out = []
    for name, coeffs in (("D_x", discriminant_x(kp)), ("D_y", discriminant_y(kp))):
        r, c = _quartic_real_roots(coeffs, name)
        deg = len(c) - 1
        if deg == 3 and len(r) == 3:
            r = np.append(r, np.inf)
        if len(r) != 4:
            raise BranchPointError(f"{name}: expected four real roots, found {r.tolist()} "
                                   f"(coefficients {np.asarray(coeffs).tolist()})")
        if not (-1e-12 <= r[0] < r[1] <= 1 + 1e-9 < r[2] < r[3]):
            raise BranchPointError(f"{name}: root ordering violated {r.tolist()}")
        out.append(tuple(float(v) for v in r))
    return BranchPoints(out[0], out[1])
