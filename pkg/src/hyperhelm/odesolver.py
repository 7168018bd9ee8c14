"""Radial initial value problem ``-u'' - ell u' - V u = Gamma |u|^{p-2} u``.

The origin is a regular singular point whenever ``d0 > 0``; the solution is
started from the even series ``u = gamma - A r^2 / (2 (1 + d0))`` at a small
radius ``r0`` and then handed to an explicit embedded Runge-Kutta pair of
order 8(5,3) (``scipy.integrate.solve_ivp`` with ``DOP853``), whose dense
output is kept for root finding and resampling.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.integrate import solve_ivp

from .errors import BlowUp, DegenerateSolution, InvalidHypothesis, TooFewZeros
from .model import CoefficientProfile, RadialGeometry

OVERFLOW_GUARD = 1e12
_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


@dataclass
class RadialSolution:
    """Solved radial field with dense output on ``[0, r_max]``."""

    grid: np.ndarray
    u: np.ndarray
    du: np.ndarray
    gamma: float
    r_max: float
    tol: float
    r0: float
    geom: RadialGeometry = field(repr=False)
    coeffs: CoefficientProfile = field(repr=False)
    nfev: int = 0
    nsteps: int = 0
    zeros: np.ndarray = field(default=None, repr=False)
    _dense: object = field(default=None, repr=False)
    _series_a: float = 0.0

    def __call__(self, r):
        """Return ``(u(r), u'(r))`` from the dense output."""
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        if np.any(r < 0) or np.any(r > self.r_max * (1 + 1e-12)):
            raise ValueError("evaluation outside [0, r_max]")
        u = np.empty_like(r)
        du = np.empty_like(r)
        if self._dense is None:
            u[:] = 0.0
            du[:] = 0.0
        else:
            inner = r < self.r0
            u[inner] = self.gamma - self._series_a * r[inner] ** 2
            du[inner] = -2.0 * self._series_a * r[inner]
            outer = ~inner
            if np.any(outer):
                y = self._dense(np.minimum(r[outer], self.r_max))
                u[outer] = y[0]
                du[outer] = y[1]
        if scalar:
            return float(u[0]), float(du[0])
        return u, du

    def u_at(self, r):
        return self(r)[0]

    @property
    def step_sizes(self) -> np.ndarray:
        return np.diff(self.grid[1:])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "u", "du"])
            for row in zip(self.grid, self.u, self.du):
                w.writerow([repr(float(x)) for x in row])


def _start_radius(geom, coeffs, gamma, tol):
    """Radius where the two-term series is accurate to ``tol`` in u and u'."""
    d0 = geom.d0
    p = coeffs.p
    G0 = coeffs.Gamma(0.0)
    V0 = coeffs.V(0.0)
    A = V0 * gamma + G0 * abs(gamma) ** (p - 2) * gamma
    a = A / (2 * (1 + d0))
    # r^3 term comes from V'(0), Gamma'(0); r^4 from curvature of ell and dF/du
    F1 = coeffs.V.derivative(0.0) * gamma + coeffs.Gamma.derivative(0.0) * abs(gamma) ** (p - 2) * gamma
    c3 = abs(F1) / (3 * (2 + d0))
    h = 1e-3
    ell1 = abs(geom.ell(h) - d0 / h) / h
    dFdu = V0 + (p - 1) * G0 * abs(gamma) ** (p - 2)
    c4 = (2 * abs(a) * ell1 + abs(dFdu * a)) / (4 * (3 + d0))
    c3 *= 10
    c4 = 10 * c4 + 1e-300
    scale = abs(gamma)
    r0 = 0.05
    for _ in range(200):
        err_u = c3 * r0 ** 3 + c4 * r0 ** 4
        err_du = 3 * c3 * r0 ** 2 + 4 * c4 * r0 ** 3
        if max(err_u, err_du) <= tol * scale:
            break
        r0 *= 0.8
    return max(r0, 1e-9), a


def solve_radial_ivp(geom: RadialGeometry, coeffs: CoefficientProfile, gamma: float,
                     r_max: float, tol: float = 1e-10, *, first_step=None) -> RadialSolution:
    """Integrate the radial problem with ``u(0) = gamma``, ``u'(0) = 0``.

    Raises :class:`InvalidHypothesis` if ``V <= 0`` on the probe grid and
    :class:`BlowUp` if ``|u| + |u'|`` passes the overflow guard.
    """
    if not (r_max > 0 and math.isfinite(r_max)):
        raise ValueError("r_max must be positive and finite")
    if not (1e-14 < tol < 1e-2):
        raise ValueError("tol must lie in (1e-14, 1e-2)")
    gamma = float(gamma)
    probe = np.linspace(0.0, r_max, 1001)
    if np.any(np.asarray(coeffs.V(probe)) <= 0):
        raise InvalidHypothesis("V must be positive on [0, r_max]")

    if gamma == 0.0:
        grid = np.linspace(0.0, r_max, 2)
        zero = np.zeros_like(grid)
        sol = RadialSolution(grid=grid, u=zero, du=zero.copy(), gamma=0.0, r_max=r_max,
                             tol=tol, r0=r_max, geom=geom, coeffs=coeffs)
        sol.zeros = np.array([])
        return sol

    if geom.d0 > 0:
        r0, a = _start_radius(geom, coeffs, gamma, tol)
        y0 = [gamma - a * r0 ** 2, -2 * a * r0]
    else:
        r0, a = 0.0, 0.0
        y0 = [gamma, 0.0]
    r0 = min(r0, r_max / 2)

    ell = geom._ell
    V = coeffs.V
    G = coeffs.Gamma
    pm1 = coeffs.p - 1
    linear = coeffs.gamma_zero

    if linear:
        def rhs(r, y):
            return [y[1], -ell(r) * y[1] - V(r) * y[0]]
    else:
        def rhs(r, y):
            u = y[0]
            return [y[1], -ell(r) * y[1] - V(r) * u - G(r) * math.copysign(abs(u) ** pm1, u)]

    def guard(r, y):
        return OVERFLOW_GUARD - (abs(y[0]) + abs(y[1]))
    guard.terminal = True

    # pure relative control: u decays like f^{-1/2}, so any fixed atol would swamp the tail
    rtol = max(0.02 * tol, 2.5e-14)
    res = solve_ivp(rhs, (r0, r_max), y0, method="DOP853", rtol=rtol, atol=1e-250,
                    dense_output=True, events=guard, first_step=first_step)
    if res.status == 1:
        raise BlowUp(f"|u| + |u'| exceeded {OVERFLOW_GUARD:g} at r = {res.t[-1]:.6g}")
    if res.status != 0:
        raise ArithmeticError(f"integrator failed: {res.message}")

    grid = np.concatenate([[0.0], res.t])
    u = np.concatenate([[gamma], res.y[0]])
    du = np.concatenate([[0.0], res.y[1]])
    sol = RadialSolution(grid=grid, u=u, du=du, gamma=gamma, r_max=float(r_max), tol=tol,
                         r0=r0, geom=geom, coeffs=coeffs, nfev=res.nfev, nsteps=len(res.t) - 1,
                         _dense=res.sol, _series_a=a)
    sol.zeros = find_zeros(sol)
    return sol


def find_zeros(sol: RadialSolution, xtol: float = 1e-13) -> np.ndarray:
    """All sign changes of ``u`` on ``(0, r_max]``, refined by Brent's method."""
    if sol.gamma == 0:
        raise DegenerateSolution("u vanishes identically for gamma = 0")
    # every integrator step is subdivided so no pair of zeros hides in one cell
    steps = sol.grid[1:]
    pieces = [np.linspace(a, b, 17)[:-1] for a, b in zip(steps[:-1], steps[1:])]
    pieces.append([steps[-1]])
    samples = np.concatenate([[0.0, sol.r0 / 2]] + pieces)
    samples = np.unique(samples)
    vals = sol.u_at(samples)
    zeros = []
    for i in range(len(samples) - 1):
        a, b = samples[i], samples[i + 1]
        fa, fb = vals[i], vals[i + 1]
        if fa == 0.0 and a > 0:
            zeros.append(a)
        elif fa * fb < 0:
            zeros.append(optimize.brentq(sol.u_at, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps))
    if vals[-1] == 0.0:
        zeros.append(samples[-1])
    return np.array(sorted(set(zeros)))


def zero_spacing_limit(sol: RadialSolution, geom=None, coeffs=None) -> float:
    """Spacing of the last two zeros; tends to pi / sqrt(V_inf - kappa^2/4)."""
    z = sol.zeros if sol.zeros is not None else find_zeros(sol)
    if len(z) < 10:
        raise TooFewZeros(f"need at least 10 zeros, found {len(z)}")
    return float(z[-1] - z[-2])


def asymptotic_spacing(geom: RadialGeometry, coeffs: CoefficientProfile) -> float:
    return math.pi / math.sqrt(coeffs.V_inf - geom.kappa ** 2 / 4)


def ode_residuals(sol: RadialSolution, checkpoints=None, window: float = 0.1) -> np.ndarray:
    """Local residuals of the dense output over short windows ``[r, r + window]``.

    Two defects are measured per window, normalized to per-unit-length
    averages: the weak form of ``(f u')' + f (V u + Gamma |u|^{p-2} u) = 0``
    and the consistency ``u(b) - u(a) - int du``.  The returned array holds
    the larger of the two divided by ``1 + |u| + |u'|`` at the window start.
    """
    geom, coeffs = sol.geom, sol.coeffs
    if checkpoints is None:
        lo = max(sol.r0, 0.1)
        checkpoints = np.linspace(lo, sol.r_max - window, 25)
    out = []
    for a in np.atleast_1d(checkpoints):
        b = a + window
        x = 0.5 * (b - a) * _GL_X + 0.5 * (b + a)
        w = 0.5 * (b - a) * _GL_W
        u, du = sol(x)
        lf_a = geom.log_f(a)
        fx = np.exp(geom.log_f(x) - lf_a)
        fb = math.exp(geom.log_f(b) - lf_a)
        ua, dua = sol(a)
        ub, dub = sol(b)
        src = coeffs.V(x) * u + coeffs.nonlinearity(x, u)
        weak = (fb * dub - dua + np.sum(w * fx * src)) / np.sum(w * fx)
        cons = (ub - ua - np.sum(w * du)) / window
        out.append(max(abs(weak), abs(cons)) / (1 + abs(ua) + abs(dua)))
    return np.array(out)
