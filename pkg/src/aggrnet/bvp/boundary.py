"""Boundary-value problems for H(x, 0) and H(0, y) and the resulting mean delays.

H(x, y) = E[x^N1 y^N2] at slot starts satisfies

    R(x, y) H(x, y) = A(x, y) H(x, 0) + B(x, y) H(0, y) + C(x, y) H(0, 0).

On the contour traced by X0 the unknown H(0, Y0(x)) is real, which turns the
equation into a Dirichlet problem (when A and B are proportional) or a
homogeneous Riemann-Hilbert problem for H(x, 0) on the contour.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq

from ..errors import (AggrnetError, InstabilityError, InvalidParameterError, NoTrafficError,
                      NonConvergenceError)
from .conformal import ConformalMap, gamma_at_one, theodorsen
from .contour import ContourPolar, contour
from .kernel import KernelParams, root_y_in_unit_disk

DIRICHLET = "dirichlet"
RIEMANN_HILBERT = "riemann-hilbert"


@dataclass
class BoundaryValues:
    case: str
    H00: float
    H10: float
    H01: float
    dH10: Optional[float] = None  # d/dx H(x, 0) at x = 1
    dH01: Optional[float] = None  # d/dy H(0, y) at y = 1
    chi: int = 0
    pole: Optional[float] = None
    r: int = 0
    hx0: Optional[Callable] = field(default=None, repr=False)
    h0y: Optional[Callable] = field(default=None, repr=False)
    boundary_imag: Optional[np.ndarray] = field(default=None, repr=False)
    M: int = 0

    def residuals(self, kp: KernelParams):
        """Flow-conservation residuals (departure rate minus arrival rate) per queue."""
        busy = 1.0 - self.H10 - self.H01 + self.H00
        r1 = kp.a1 * busy + kp.e1 * (self.H10 - self.H00) - kp.lam1
        r2 = kp.a2 * busy + kp.e2 * (self.H01 - self.H00) - kp.lam2
        return r1, r2


def _empties_from_h00(kp: KernelParams, h00):
    """(H(1,0), H(0,1)) implied by flow conservation for a given H(0,0)."""
    M = np.array([[kp.e1 - kp.a1, -kp.a1], [-kp.a2, kp.e2 - kp.a2]])
    rhs = np.array([kp.lam1 - kp.a1 + (kp.e1 - kp.a1) * h00, kp.lam2 - kp.a2 + (kp.e2 - kp.a2) * h00])
    return np.linalg.solve(M, rhs)


def classify_case(kp: KernelParams, tol: float = 1e-12) -> str:
    if kp.e1 <= 0 or kp.e2 <= 0:
        raise InvalidParameterError("both aggregators need a positive solo service probability")
    s = kp.a1 / kp.e1 + kp.a2 / kp.e2
    return DIRICHLET if abs(s - 1.0) <= tol else RIEMANN_HILBERT


def _derivative(f, x0=1.0, h=1e-5):
    """Central difference with one Richardson step."""
    d1 = (f(x0 + h) - f(x0 - h)) / (2 * h)
    d2 = (f(x0 + h / 2) - f(x0 - h / 2)) / h
    return float(np.real((4 * d2 - d1) / 3))


def _on_contour(kp: KernelParams, x):
    """Kernel root Y0(x) for contour points x (real on the slit)."""
    return root_y_in_unit_disk(x, kp, check=False)


def dirichlet_solve(kp: KernelParams, cmap: ConformalMap) -> BoundaryValues:
    """H(x, 0) when a1/e1 + a2/e2 = 1; then H(0,0) = 1 - lam1/e1 - lam2/e2."""
    rho = kp.lam1 / kp.e1 + kp.lam2 / kp.e2
    if rho >= 1.0:
        raise InstabilityError(f"load {rho:.6g} >= 1")
    h00 = 1.0 - rho
    xb = cmap.boundary()
    yb = _on_contour(kp, xb)
    ca = kp.C(xb, yb) / kp.A(xb, yb)
    if not np.all(np.isfinite(ca)):
        raise AggrnetError("pole of H(x,0) on the contour; degenerate parameters")
    h = -h00 * np.imag(ca)  # Im H(x, 0) on the contour, odd in phi
    M = len(h)
    hk = np.fft.fft(h) / M
    sk = hk[: M // 2].copy()
    sk[1:] *= 2.0

    def hx0(x):
        z = cmap.inverse(x)
        return h00 + 1j * P.polyval(z, sk)

    h10 = float(np.real(hx0(1.0)))
    # conservation relations are dependent here; take H(0,1) from the first one
    h01 = 1.0 - h10 + h00 - (kp.lam1 - kp.e1 * (h10 - h00)) / kp.a1
    bv = BoundaryValues(DIRICHLET, h00, h10, float(h01), hx0=hx0, M=len(h))
    bv.dH10 = _derivative(hx0)
    bv.boundary_imag = h
    return bv


@dataclass(frozen=True)
class IndexReport:
    chi: int  # numeric: -(1/pi) [arg U] along the contour
    rates_stable: bool  # stability criterion equivalent to a zero index

    @property
    def solvable(self) -> bool:
        return self.rates_stable and self.chi == 0


def rh_index(kp: KernelParams, cont: Optional[ContourPolar] = None, M: int = 512, pole=None) -> IndexReport:
    """Index of the Riemann-Hilbert problem, numerically and from the stability criterion.

    With ``pole=(x_bar, 1)`` the coefficient is U(x)/(x - x_bar). A nonzero
    numeric index where the criterion predicts zero raises, since every
    downstream quantity would be wrong.
    """
    if kp.lam2 < kp.a2:
        rates_stable = (kp.lam1 < kp.e1 + kp.d1 * kp.lam2 / kp.a2) and (kp.lam2 < kp.e2 + kp.d2 * kp.lam1 / kp.a1)
    else:
        rates_stable = kp.lam2 < kp.e2 + kp.d2 * kp.lam1 / kp.a1
    if cont is None:
        cont = contour(kp, "M", M)
    x = cont.points
    y = _on_contour(kp, x)
    U = kp.A(x, y) / kp.B(x, y)
    if pole is not None and pole[1]:
        U = U / (x - pole[0])
    arg = np.unwrap(np.angle(np.append(U, U[0])))
    chi = int(np.rint(-(arg[-1] - arg[0]) / np.pi))
    if rates_stable and chi != 0:
        raise AggrnetError(f"numeric index {chi} contradicts the stability criterion for {kp}")
    return IndexReport(chi, bool(rates_stable))


def detect_pole(kp: KernelParams, cmap_or_contour, n: int = 400):
    """Real zero x_bar of A(x, Y0(x)) on (1, beta0); returns (x_bar, r)."""
    if isinstance(cmap_or_contour, ConformalMap):
        beta0 = float(np.real(cmap_or_contour.boundary()[0]))
    else:
        beta0 = float(cmap_or_contour.beta0)
    if beta0 <= 1.0:
        return None, 0

    def a_of(x):
        return np.real(kp.A(x, _on_contour(kp, np.asarray(x, dtype=complex))))

    xs = np.linspace(1.0, beta0, n + 2)[1:-1]
    vals = a_of(xs)
    idx = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    if len(idx) == 0:
        return None, 0
    if len(idx) > 1:
        raise AggrnetError("more than one zero of A(x, Y0(x)) in the exterior region")
    i = idx[0]
    xbar = brentq(lambda v: float(a_of(v)), xs[i], xs[i + 1], xtol=1e-15)
    return float(xbar), 1


def rh_solve(kp: KernelParams, cmap: ConformalMap, index=0, pole=(None, 0)) -> BoundaryValues:
    """H(x, 0) from the homogeneous Riemann-Hilbert problem (index zero).

    ``index`` is an :class:`IndexReport` or a plain integer index.
    """
    if isinstance(index, IndexReport):
        if not index.rates_stable:
            raise InstabilityError("stability criterion fails: nonzero index, no bounded solution")
        chi = index.chi
    else:
        chi = int(index)
    if chi != 0:
        raise InstabilityError(f"index {chi} != 0: the queues are not stable")
    xbar, r = pole
    det = kp.d1 * kp.d2 - kp.a1 * kp.a2
    if det == 0:
        raise InvalidParameterError("Dirichlet configuration passed to the Riemann-Hilbert solver")
    e = kp.e1 * kp.d2 / det  # G(x) = H(x, 0) + e H(0, 0) solves the homogeneous problem
    xb = cmap.boundary()
    yb = _on_contour(kp, xb)
    U = kp.A(xb, yb) / kp.B(xb, yb)
    if r:
        U = U / (xb - xbar)
    arg_raw = np.angle(U)
    jumps = np.abs(np.diff(np.unwrap(np.append(arg_raw, arg_raw[0]))))
    if np.max(jumps) > np.pi / 2:
        raise NonConvergenceError("argument of U jumps between samples; increase M")
    log_j = -2j * np.unwrap(arg_raw)  # log J with J = conj(U)/U
    M = len(log_j)
    ck = (np.fft.fft(log_j) / M)[: M // 2]

    def gamma_fn(z):
        return P.polyval(z, ck)

    z0, _ = gamma_at_one(cmap)
    u = _empties_from_h00(kp, 0.0)
    u1 = _empties_from_h00(kp, 1.0) - u
    fac0 = np.real(np.exp(gamma_fn(0.0)))
    fac1 = np.real(np.exp(gamma_fn(z0)))
    if r:
        fac0 /= (0.0 - xbar)
        fac1 /= (1.0 - xbar)
    # K fac0 = (1 + e) H00 ;  K fac1 - e H00 = u0 + u1 H00
    sysm = np.array([[fac0, -(1.0 + e)], [fac1, -(e + u1[0])]])
    kconst, h00 = np.linalg.solve(sysm, np.array([0.0, u[0]]))

    def hx0(x):
        x = np.asarray(x, dtype=complex)
        z = cmap.inverse(x)
        g = kconst * np.exp(gamma_fn(z))
        if r:
            g = g / (x - xbar)
        return g - e * h00

    h10 = float(np.real(hx0(1.0)))
    h10_lin, h01 = _empties_from_h00(kp, h00)
    if abs(h10 - h10_lin) > 1e-8:
        raise NonConvergenceError(f"boundary value H(1,0) inconsistent: {h10} vs {h10_lin}")
    bv = BoundaryValues(RIEMANN_HILBERT, float(h00), h10, float(h01), chi=chi, pole=xbar, r=r, hx0=hx0,
                        M=len(xb))
    bv.dH10 = _derivative(hx0)
    return bv


def _solve_side(kp, M, tol, max_iter):
    cont = contour(kp, "M", M)
    cmap = theodorsen(cont, M, tol=tol, max_iter=max_iter)
    if classify_case(kp) == DIRICHLET:
        return dirichlet_solve(kp, cmap)
    pole = detect_pole(kp, cont)
    index = rh_index(kp, cont, pole=pole)
    return rh_solve(kp, cmap, index, pole)


def solve(kp: KernelParams, M: int = 512, tol: float = 1e-6, max_iter: int = 500,
          refine: bool = True, rtol: float = 1e-5, max_M: int = 16384) -> BoundaryValues:
    """Both boundary functions: H(x, 0) on the x-contour and H(0, y) on the mirrored one.

    With ``refine`` the grid is doubled until the derivatives at 1 change by
    less than ``rtol`` (relative); contours passing close to x = 1 need it.
    """
    if kp.lam1 >= kp.a1 or kp.lam2 >= kp.a2:
        raise InstabilityError("contour construction needs lam_k below the busy service probability")

    def both(m):
        bx = _solve_side(kp, m, tol, max_iter)
        by = _solve_side(kp.swapped(), m, tol, max_iter)
        bv = replace(bx, H01=by.H10, dH01=by.dH10, h0y=by.hx0, H00=0.5 * (bx.H00 + by.H00))
        bv.M = m
        return bv

    bv = both(M)
    while refine:
        if 2 * bv.M > max_M:
            raise NonConvergenceError(f"boundary derivatives not resolved at M={bv.M}")
        nxt = both(2 * bv.M)
        change = max(abs(nxt.dH10 - bv.dH10) / max(abs(nxt.dH10), 1e-12),
                     abs(nxt.dH01 - bv.dH01) / max(abs(nxt.dH01), 1e-12))
        bv = nxt
        if change < rtol:
            break
    return bv


def mean_delays(kp: KernelParams, bv: BoundaryValues):
    """Mean sojourn time (slots) at each aggregator via Little's law."""
    if kp.lam1 <= 0 or kp.lam2 <= 0:
        raise NoTrafficError("mean delay undefined for a queue without arrivals")
    if bv.dH10 is None or bv.dH01 is None:
        raise InvalidParameterError("boundary values lack the derivatives at 1")
    d1 = (kp.lam1 * (1 - kp.lam1) + kp.d1 * bv.dH10) / (kp.lam1 * (kp.a1 - kp.lam1))
    d2 = (kp.lam2 * (1 - kp.lam2) + kp.d2 * bv.dH01) / (kp.lam2 * (kp.a2 - kp.lam2))
    return float(d1), float(d2)
