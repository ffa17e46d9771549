"""Closed contour traced by the kernel root X0(y) as y sweeps the slit [y1, y2].

On the slit the two x-roots are conjugate, so each contour point satisfies
|x|^2 = m(Re x) with m(delta) = chat(zeta)/ahat(zeta), where zeta(delta) is the
slit point with Re X(zeta) = delta. The contour is star-like around 0 and is
parametrised in polar form x = rho(phi) exp(i phi).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from ..errors import InvalidParameterError, NonConvergenceError
from .kernel import KernelParams, branch_points, kernel_poly


class KernelContour:
    """Polar description rho(phi) of the contour for ``kp`` (x-plane)."""

    def __init__(self, kp: KernelParams):
        self.kp = kp
        self.K = kernel_poly(kp)
        bp = branch_points(kp)
        self.y1, self.y2 = bp.y[0], bp.y[1]
        ah, bh, ch = (lambda y, r=r: P.polyval(y, self.K[r]) for r in (2, 1, 0))
        self._ah, self._bh, self._ch = ah, bh, ch
        self.beta0 = float(-bh(self.y2) / (2 * ah(self.y2)))
        self.beta1 = float(-bh(self.y1) / (2 * ah(self.y1)))
        if not self.beta1 < 0.0 < self.beta0:
            raise InvalidParameterError(f"origin not inside contour (beta1={self.beta1}, beta0={self.beta0})")

    def zeta(self, delta):
        """Slit point y in [y1, y2] with Re X(y) = delta (vectorised)."""
        delta = np.asarray(delta, dtype=float)
        K = self.K
        qa = K[1, 2] + 2 * delta * K[2, 2]
        qb = K[1, 1] + 2 * delta * K[2, 1]
        qc = K[1, 0] + 2 * delta * K[2, 0]
        disc = np.maximum(qb * qb - 4 * qa * qc, 0.0)
        sq = np.sqrt(disc)
        with np.errstate(divide="ignore", invalid="ignore"):
            qq = -0.5 * (qb + np.copysign(sq, qb))
            r1 = np.where(qa != 0, qq / qa, -qc / qb)
            r2 = np.where(qq != 0, qc / qq, r1)
        mid = 0.5 * (self.y1 + self.y2)
        half = 0.5 * (self.y2 - self.y1)
        d1 = np.abs(r1 - mid) - half
        d2 = np.abs(r2 - mid) - half
        y = np.where(d1 <= d2, r1, r2)
        dist = np.minimum(d1, d2)
        if np.any(dist > 1e-7 * max(1.0, half)):
            raise InvalidParameterError("Re X(y) = delta has no solution on the slit")
        return np.clip(y, self.y1, self.y2)

    def m(self, delta):
        y = self.zeta(delta)
        val = self._ch(y) / self._ah(y)
        if np.any(val < -1e-14):
            raise InvalidParameterError("m(delta) < 0: parameters outside the valid region")
        return np.maximum(val, 0.0)

    def _m_and_slope(self, delta):
        y = self.zeta(delta)
        K = self.K
        ah, ch = self._ah(y), self._ch(y)
        dah = P.polyval(y, P.polyder(K[2]))
        dbh = P.polyval(y, P.polyder(K[1]))
        dch = P.polyval(y, P.polyder(K[0]))
        with np.errstate(divide="ignore", invalid="ignore"):
            dzeta = -2 * ah / (dbh + 2 * delta * dah)
            dm = (dch * ah - ch * dah) / ah ** 2 * dzeta
        return np.maximum(ch / ah, 0.0), np.where(np.isfinite(dm), dm, 0.0)

    def real_part(self, theta, tol=1e-15, max_iter=100):
        """delta(theta): zero of delta - cos(theta) sqrt(m(delta)) by safeguarded Newton."""
        theta = np.asarray(theta, dtype=float)
        c = np.cos(theta)
        pos = c > 0
        lo = np.where(pos, 0.0, self.beta1)
        hi = np.where(pos, self.beta0, 0.0)
        d = np.where(pos, 0.5 * hi, 0.5 * lo)
        done = np.abs(c) < 1e-15
        d = np.where(done, 0.0, d)
        for _ in range(max_iter):
            m, dm = self._m_and_slope(d)
            sm = np.sqrt(m)
            f = d - c * sm
            # f is increasing in delta on the bracket
            lo = np.where(f < 0, d, lo)
            hi = np.where(f > 0, d, hi)
            with np.errstate(divide="ignore", invalid="ignore"):
                fp = 1 - c * dm / (2 * sm)
                step = f / fp
            dn = d - step
            bad = ~np.isfinite(dn) | (dn <= lo) | (dn >= hi)
            dn = np.where(bad, 0.5 * (lo + hi), dn)
            dn = np.where(done, d, dn)
            conv = np.abs(dn - d) <= tol * np.maximum(1.0, np.abs(d))
            d = dn
            done = done | conv | (hi - lo <= tol)
            if np.all(done):
                return d
        raise NonConvergenceError("contour point solve did not converge")

    def radius(self, theta):
        return np.sqrt(self.m(self.real_part(theta)))


class CircleContour:
    """Circle of radius ``c`` (m(delta) = c^2); sanity case for the conformal map."""

    def __init__(self, c=1.0):
        self.c = float(c)
        self.beta0, self.beta1 = self.c, -self.c

    def radius(self, theta):
        return np.full(np.shape(theta), self.c)


@dataclass
class ContourPolar:
    phi: np.ndarray
    rho: np.ndarray
    beta0: float
    beta1: float
    shape: object = field(repr=False, default=None)  # object with .radius(theta)

    @property
    def points(self):
        return self.rho * np.exp(1j * self.phi)

    def radius(self, theta) -> np.ndarray:
        return self.shape.radius(np.mod(theta, 2 * np.pi))


def contour(kp: KernelParams, which: str = "M", M: int = 512) -> ContourPolar:
    """Sample the contour at phi_k = 2 pi k / M.

    ``which='M'`` gives the x-plane contour, ``'L'`` the mirrored y-plane one.
    """
    if which not in ("M", "L"):
        raise ValueError("which must be 'M' or 'L'")
    shape = KernelContour(kp if which == "M" else kp.swapped())
    phi = 2 * np.pi * np.arange(M) / M
    return ContourPolar(phi, shape.radius(phi), shape.beta0, shape.beta1, shape)


def circle_contour(c: float = 1.0, M: int = 512) -> ContourPolar:
    shape = CircleContour(c)
    phi = 2 * np.pi * np.arange(M) / M
    return ContourPolar(phi, shape.radius(phi), c, -c, shape)
