"""Energy functionals of radial solutions and the bounds they satisfy.

``Z = u'^2/2 + V u^2/2 + Gamma |u|^p / p`` is almost nonincreasing;
``psi = v'^2/2 + f (Vt u^2/2 + Gamma |u|^p / p)`` with ``v = f^{1/2} u`` and
``Vt = V - kappa^2/4`` is almost constant past the asymptotic onset.  Together
they pin ``(u^2 + u'^2)(1 + f)`` between two gamma-independent constants.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import MismatchedProblem, NotAsymptotic, TooFewZeros
from .model import CoefficientProfile, RadialGeometry
from .odesolver import RadialSolution, find_zeros
from .reports import BoundReport


@dataclass
class EnergyTrace:
    grid: np.ndarray
    u: np.ndarray
    du: np.ndarray
    Z: np.ndarray
    psi: np.ndarray
    c: np.ndarray
    m: np.ndarray
    f: np.ndarray
    ratio: np.ndarray
    K_gamma: float
    gamma: float
    p: float
    onset: float
    zeros: np.ndarray = field(repr=False, default=None)

    def to_csv(self, path):
        cols = [self.grid, self.u, self.du, self.Z, self.psi, self.c, self.f, self.ratio]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "u", "du", "Z", "psi", "c", "f", "ratio"])
            for row in zip(*cols):
                w.writerow([repr(float(x)) for x in row])


def energy_Z(u, du, V, Gamma, p):
    return 0.5 * du ** 2 + 0.5 * V * u ** 2 + Gamma * np.abs(u) ** p / p


def majorant(coeffs: CoefficientProfile, r):
    """Integrable majorant ``m = max(|V'|/V, |Gamma'|/Gamma)``."""
    m = np.abs(coeffs.V.derivative(r)) / coeffs.V(r)
    if not coeffs.gamma_zero:
        m = np.maximum(m, np.abs(coeffs.Gamma.derivative(r)) / coeffs.Gamma(r))
    return m


def _psi_parts(u, du, f, ell, Vt, Gamma, p):
    sf = np.sqrt(f)
    dv = sf * du + 0.5 * ell * sf * u
    return 0.5 * dv ** 2 + f * (0.5 * Vt * u ** 2 + Gamma * np.abs(u) ** p / p)


def psi_expanded(u, du, f, ell, Vt, Gamma, p):
    """Same as the ``psi`` column but with ``v'^2`` multiplied out."""
    return 0.5 * f * (du ** 2 + ell * u * du + 0.25 * ell ** 2 * u ** 2) \
        + f * (0.5 * Vt * u ** 2 + Gamma * np.abs(u) ** p / p)


def oscillation_coefficient(geom, coeffs, r, u):
    """``c = Gamma |u|^{p-2} + V - ell'/2 - ell^2/4`` from ``v'' + c v = 0``."""
    ell = geom.ell(r)
    c = coeffs.V(r) - 0.5 * geom.dell(r) - 0.25 * ell ** 2
    if not coeffs.gamma_zero:
        c = c + coeffs.Gamma(r) * np.abs(u) ** (coeffs.p - 2)
    return c


def energy_trace(sol: RadialSolution, geom: RadialGeometry, coeffs: CoefficientProfile,
                 grid=None, h: float = 0.01) -> EnergyTrace:
    """Sample Z, psi, c, m and the bound ratio on a uniform grid.

    The origin is excluded from ``psi`` and ``c`` evaluation where ``ell``
    is singular; ``Z`` and ``ratio`` are finite everywhere.
    """
    if sol.geom != geom or sol.coeffs != coeffs:
        raise MismatchedProblem("solution was computed for a different geometry/coefficients")
    if grid is None:
        n = max(int(math.ceil(sol.r_max / h)), 2)
        grid = np.linspace(0.0, sol.r_max, n + 1)
    grid = np.asarray(grid, dtype=float)
    u, du = sol(grid)
    p = coeffs.p
    V = coeffs.V(grid)
    G = coeffs.Gamma(grid) if not coeffs.gamma_zero else np.zeros_like(grid)
    Z = energy_Z(u, du, V, G, p)
    f = geom.f(grid)
    pos = grid > 0
    ell = np.zeros_like(grid)
    ell[pos] = geom.ell(grid[pos])
    Vt = V - geom.kappa ** 2 / 4
    psi = _psi_parts(u, du, f, ell, Vt, G, p)
    c = np.full_like(grid, np.nan)
    c[pos] = oscillation_coefficient(geom, coeffs, grid[pos], u[pos])
    m = majorant(coeffs, grid)
    gamma = sol.gamma
    K = coeffs.V(0.0) * gamma ** 2 + coeffs.Gamma(0.0) * abs(gamma) ** p
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (u ** 2 + du ** 2) * (1 + f) / K if K > 0 else np.full_like(grid, np.nan)

    target = 0.5 * (coeffs.V_inf - geom.kappa ** 2 / 4)
    ok = np.where(pos, c >= target, False)
    # onset = first grid point after which c stays above half the limit
    bad = np.nonzero(~ok)[0]
    if len(bad) == 0:
        onset = grid[0]
    elif bad[-1] + 1 < len(grid):
        onset = grid[bad[-1] + 1]
    else:
        onset = math.inf
    zeros = sol.zeros if gamma != 0 else np.array([])
    return EnergyTrace(grid=grid, u=u, du=du, Z=Z, psi=psi, c=c, m=m, f=f, ratio=ratio,
                       K_gamma=float(K), gamma=gamma, p=p, onset=float(onset), zeros=zeros)


def Z_prime(trace: EnergyTrace, geom: RadialGeometry, coeffs: CoefficientProfile):
    """Analytic ``Z' = -ell u'^2 + V' u^2/2 + Gamma' |u|^p / p`` (r > 0 only)."""
    r = trace.grid
    out = np.zeros_like(r)
    pos = r > 0
    u, du = trace.u[pos], trace.du[pos]
    out[pos] = -geom.ell(r[pos]) * du ** 2 + 0.5 * coeffs.V.derivative(r[pos]) * u ** 2
    if not coeffs.gamma_zero:
        out[pos] += coeffs.Gamma.derivative(r[pos]) * np.abs(u) ** coeffs.p / coeffs.p
    return out


def check_growth_bound(trace: EnergyTrace, coeffs: CoefficientProfile, geom: RadialGeometry,
                       tol: float = 1e-8, rel_tol: float = 0.01) -> list[BoundReport]:
    """Verify ``Z' <= m Z`` pointwise and ``Z(r) <= Z(0) exp(int_0^r m)``."""
    if trace.gamma == 0:
        return [BoundReport("Z' <= m Z", True, None, 0.0, tol),
                BoundReport("Z <= Z(0) exp(int m)", True, None, 0.0, rel_tol)]
    dZ = Z_prime(trace, geom, coeffs)
    excess = dZ - trace.m * trace.Z
    i = int(np.argmax(excess))
    pointwise = BoundReport("Z' <= m Z", bool(excess[i] <= tol), float(trace.grid[i]),
                            float(excess[i]), tol)
    Im = cumulative_simpson(trace.m, x=trace.grid, initial=0.0)
    bound = trace.Z[0] * np.exp(Im)
    rel = trace.Z / bound - 1.0
    j = int(np.argmax(rel))
    integrated = BoundReport("Z <= Z(0) exp(int m)", bool(rel[j] <= rel_tol), float(trace.grid[j]),
                             float(rel[j]), rel_tol)
    return [pointwise, integrated]


def check_two_sided_bounds(trace: EnergyTrace, min_zeros_past_onset: int = 5):
    """Tail infimum and supremum of ``(u^2 + u'^2)(1 + f) / K_gamma``."""
    if trace.K_gamma == 0 or trace.gamma == 0:
        raise NotAsymptotic("K_gamma = 0: the trivial solution has no asymptotic regime")
    if not math.isfinite(trace.onset):
        raise NotAsymptotic("c(r) never settles above half its limit on this grid")
    zeros = trace.zeros if trace.zeros is not None else np.array([])
    if np.sum(zeros > trace.onset) < min_zeros_past_onset:
        raise NotAsymptotic(f"fewer than {min_zeros_past_onset} zeros past the onset r = {trace.onset:.3g}")
    tail = trace.grid >= trace.onset
    vals = trace.ratio[tail]
    return {"c_star": float(np.min(vals)), "C_star": float(np.max(vals)), "onset": trace.onset}


def _peaks(sol: RadialSolution, lo: float):
    """|u| maxima between consecutive zeros beyond ``lo`` (located via u' = 0)."""
    from scipy import optimize

    z = sol.zeros if sol.zeros is not None else find_zeros(sol)
    z = z[z >= lo]
    rs, vals = [], []
    du = lambda r: sol(r)[1]
    for a, b in zip(z[:-1], z[1:]):
        try:
            rp = optimize.brentq(du, a, b, xtol=1e-13)
        except ValueError:
            xs = np.linspace(a, b, 65)
            rp = xs[np.argmax(np.abs(sol.u_at(xs)))]
        rs.append(rp)
        vals.append(abs(sol.u_at(rp)))
    return np.array(rs), np.array(vals)


def fit_decay_exponent(sol: RadialSolution, scale: str = "exp") -> float:
    """Least-squares decay rate of the |u| envelope on the tail half.

    ``scale="exp"`` fits ``-log(peak)`` against ``r`` and returns the rate
    ``sigma`` of ``e^{-sigma r}``; ``scale="log"`` fits against ``log r``
    and returns the power of ``r^{-sigma}``.
    """
    z = sol.zeros if sol.zeros is not None else find_zeros(sol)
    if len(z) < 10:
        raise TooFewZeros(f"need at least 10 zeros, found {len(z)}")
    rs, peaks = _peaks(sol, sol.r_max / 2)
    if len(rs) < 3:
        raise TooFewZeros("not enough peaks on the tail half")
    x = rs if scale == "exp" else np.log(rs)
    slope, _ = np.polyfit(x, -np.log(peaks), 1)
    return float(slope)


def gronwall_sandwich(trace: EnergyTrace, geom: RadialGeometry, coeffs: CoefficientProfile,
                      R: float | None = None):
    """Compare ``psi(r)/psi(R)`` with ``exp(-I_lower(r))`` and ``exp(I_upper(r))``.

    The prefactors are those of the differential inequalities for ``psi``:
    ``(|ell'/2 + ell^2/4 - kappa^2/4| + |V'| + m) / min(1, min Vt)``, plus
    ``sup Gamma * C^{p-2} f' f^{-p/2}`` for the lower bound, where
    ``C = sup |u| (1 + f)^{1/2}``.
    """
    R = trace.onset if R is None else R
    sel = trace.grid >= R
    r = trace.grid[sel]
    ell = geom.ell(r)
    Vt = coeffs.V(r) - geom.kappa ** 2 / 4
    denom = min(1.0, float(np.min(Vt)))
    base = np.abs(0.5 * geom.dell(r) + 0.25 * ell ** 2 - 0.25 * geom.kappa ** 2)
    base = base + np.abs(coeffs.V.derivative(r)) + trace.m[sel]
    upper = base / denom
    lower = upper.copy()
    if not coeffs.gamma_zero:
        C = float(np.max(np.abs(trace.u) * np.sqrt(1 + trace.f)))
        Gsup = float(np.max(coeffs.Gamma(trace.grid)))
        fr = trace.f[sel]
        lower += Gsup * C ** (coeffs.p - 2) * ell * fr ** (1 - coeffs.p / 2) / denom
    I_up = cumulative_simpson(upper, x=r, initial=0.0)
    I_lo = cumulative_simpson(lower, x=r, initial=0.0)
    q = trace.psi[sel] / trace.psi[sel][0]
    return {"r": r, "ratio": q, "upper": np.exp(I_up), "lower": np.exp(-I_lo)}
