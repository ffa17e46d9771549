"""Conformal map of the unit disk onto the interior of a star-like contour.

The boundary correspondence psi(phi) solves Theodorsen's equation

    psi(phi) = phi + K[log rho(psi)](phi),

with K the periodic conjugate-function operator, evaluated spectrally on an
M-point grid. The interior map is gamma0(z) = z exp(sum_k c_k z^k), with c_k
from the Fourier coefficients of log rho(psi(phi)).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from ..errors import NonConvergenceError


def conjugate_function(f: np.ndarray) -> np.ndarray:
    """Periodic conjugate function of equispaced samples (multiplier -i sign(k))."""
    n = len(f)
    F = np.fft.fft(f)
    k = np.fft.fftfreq(n, 1.0 / n)
    mult = -1j * np.sign(k)
    if n % 2 == 0:
        mult[n // 2] = 0.0
    return np.real(np.fft.ifft(mult * F))


@dataclass
class ConformalMap:
    phi: np.ndarray
    psi: np.ndarray
    log_rho: np.ndarray  # log rho(psi(phi_k))
    coef: np.ndarray  # log(gamma0(z)/z) = sum_k coef[k] z^k
    iterations: int
    history: list = field(default_factory=list)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return z * np.exp(P.polyval(z, self.coef))

    def derivative(self, z):
        z = np.asarray(z, dtype=complex)
        s = P.polyval(z, self.coef)
        ds = P.polyval(z, P.polyder(self.coef))
        return np.exp(s) * (1 + z * ds)

    def boundary(self):
        """Image of the grid points exp(i phi_k)."""
        return np.exp(self.log_rho + 1j * self.psi)

    def inverse(self, x, z=None, tol=1e-15, max_iter=100):
        """gamma(x): the z with gamma0(z) = x, by Newton's method."""
        x = np.asarray(x, dtype=complex)
        if z is None:
            z = self._real_guess(x.real)
        z = np.asarray(z, dtype=complex)
        for _ in range(max_iter):
            dz = (self(z) - x) / self.derivative(z)
            # damp steps that would leave the disk
            zn = z - dz
            out = np.abs(zn) >= 1.0
            while np.any(out):
                dz = np.where(out, 0.5 * dz, dz)
                zn = z - dz
                out = (np.abs(zn) >= 1.0) & (np.abs(dz) > tol)
            z = zn
            if np.all(np.abs(dz) <= tol * np.maximum(1.0, np.abs(z))):
                return z if z.ndim else complex(z)
        raise NonConvergenceError("inverse conformal map did not converge")

    def _real_guess(self, xr, iters=40):
        """Bisection for gamma0(s) = xr on the real segment (gamma0 is increasing there)."""
        xr = np.asarray(xr, dtype=float)
        lo = np.where(xr >= 0, 0.0, -1.0)
        hi = np.where(xr >= 0, 1.0, 0.0)
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            below = np.real(self(mid)) < xr
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)

    def derivative_quadrature(self, z0):
        """gamma0'(z0) from the Cauchy-type integral of log rho (trapezoid rule)."""
        t = np.exp(1j * self.phi)
        integral = np.mean(self.log_rho * 2 * t / (t - z0) ** 2)
        return self(z0) * (1.0 / z0 + integral)


def theodorsen(shape, M: int = 512, tol: float = 1e-6, max_iter: int = 500, relax: float = 1.0) -> ConformalMap:
    """Solve Theodorsen's equation for a contour given by ``shape.radius(theta)``.

    ``shape`` may be a :class:`~aggrnet.bvp.contour.ContourPolar` or any object
    with a vectorised ``radius`` method.
    """
    phi = 2 * np.pi * np.arange(M) / M
    psi = phi.copy()
    history = []
    for it in range(1, max_iter + 1):
        lr = np.log(shape.radius(psi))
        new = phi + conjugate_function(lr)
        err = float(np.max(np.abs(new - psi)))
        history.append(err)
        psi = psi + relax * (new - psi)
        if err < tol:
            break
    else:
        raise NonConvergenceError(f"Theodorsen iteration did not reach tol={tol} in {max_iter} steps", history)
    lr = np.log(shape.radius(psi))
    F = np.fft.fft(lr) / M
    coef = np.real(F[: M // 2]).copy()
    coef[1:] *= 2.0
    return ConformalMap(phi, psi, lr, coef, it, history)


def gamma_at_one(cmap: ConformalMap):
    """(z0, gamma'(1)) with gamma0(z0) = 1 and gamma'(1) = 1/gamma0'(z0)."""
    z0 = cmap.inverse(1.0)
    if abs(np.imag(z0)) > 1e-10:
        raise NonConvergenceError(f"gamma(1) is not real: {z0}")
    z0 = float(np.real(z0))
    d = cmap.derivative_quadrature(z0)
    return z0, float(np.real(1.0 / d))
