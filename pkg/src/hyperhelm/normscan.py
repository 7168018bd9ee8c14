"""Ball ``L^r`` norms of homogeneous radial solutions.

For ``u ~ f^{-1/2}`` the integrand ``|u|^r f`` behaves like
``f^{1 - r/2}``: O(1) on average at ``r = 2`` and exponentially small for
``r > 2`` on hyperbolic models.  Norms here omit the sphere constant:
``N_r(R) = (int_0^R |u|^r f)^{1/r}``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import NotHomogeneous, TooFewZeros
from .model import CoefficientProfile, RadialGeometry
from .odesolver import RadialSolution, find_zeros, ode_residuals, solve_radial_ivp

CONVERGED = "converged"
DIVERGING = "diverging"


@dataclass
class NormProfile:
    r_exp: float
    R_list: np.ndarray
    norms: np.ndarray
    classification: str
    rate: float | None = None
    rel_change: float = math.nan
    threshold: float = 1e-6
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"r_exp": self.r_exp, "R": list(map(float, self.R_list)),
                "norms": list(map(float, self.norms)), "classification": self.classification,
                "rate": self.rate, "rel_change": self.rel_change, "threshold": self.threshold}

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["R", "norm"])
            for R, n in zip(self.R_list, self.norms):
                w.writerow([repr(float(R)), repr(float(n))])


def homogeneous_solution(geom: RadialGeometry, lam: float, r_max: float, tol: float = 1e-11):
    """Regular solution of ``(L - lambda^2) u = 0`` with ``u(0) = 1``."""
    return solve_radial_ivp(geom, CoefficientProfile.helmholtz(geom, lam), 1.0, r_max, tol)


def check_homogeneous(sol: RadialSolution, tol: float = 1e-6):
    if not sol.coeffs.gamma_zero:
        raise NotHomogeneous("the solution was computed with a nonlinearity")
    if sol.gamma == 0:
        return
    res = ode_residuals(sol, np.linspace(max(sol.r0, 0.1), sol.r_max - 0.2, 25))
    if np.max(res) > tol:
        raise NotHomogeneous(f"residual {np.max(res):.1e} exceeds {tol:g}")


def _cumulative_power(sol: RadialSolution, geom: RadialGeometry, r_exp: float, marks):
    """``int_0^R |u|^r f`` at every R in ``marks``.

    The range is split at the zeros of ``u`` so every piece only has the
    ``|x - z|^r`` endpoint behaviour, which tanh-sinh quadrature absorbs.
    """
    zeros = sol.zeros if sol.zeros is not None else find_zeros(sol)
    marks = np.asarray(marks, dtype=float)
    cuts = np.unique(np.concatenate([[0.0], zeros[zeros < marks[-1]], marks]))

    def integrand(r):
        u = sol.u_at(r.ravel()).reshape(r.shape)
        with np.errstate(divide="ignore"):
            lu = np.log(np.abs(u))
        lf = np.where(r > 0, geom.log_f(np.maximum(r, 1e-300)), -np.inf)
        return np.exp(r_exp * lu + lf)

    res = integrate.tanhsinh(integrand, cuts[:-1], cuts[1:], rtol=1e-13)
    if not np.all(res.success):
        bad = int(np.argmin(res.success))
        pieces = res.integral.copy()
        a, b = cuts[bad], cuts[bad + 1]
        pieces[bad] = integrate.quad(lambda r: float(integrand(np.array([r]))[0]), a, b,
                                     epsabs=0.0, epsrel=1e-12, limit=200)[0]
    else:
        pieces = res.integral
    total = np.concatenate([[0.0], np.cumsum(pieces)])
    return total[np.searchsorted(cuts, marks)]


def ball_norm_profile(u_hom: RadialSolution, geom: RadialGeometry, r_exp: float, R_list,
                      threshold: float = 1e-6, check: bool = True) -> NormProfile:
    """``N_r(R)`` over ``R_list`` with a converged/diverging classification.

    Converged means the relative change between the last two radii is below
    ``threshold``; otherwise the growth rate is the log-log slope over the
    last half of ``R_list``.
    """
    if check:
        check_homogeneous(u_hom)
    R_list = np.asarray(sorted(R_list), dtype=float)
    if R_list[-1] > u_hom.r_max * (1 + 1e-12):
        raise ValueError("R_list exceeds the solution's r_max")
    if math.isinf(r_exp):
        norms = np.array([np.max(np.abs(u_hom.u_at(np.linspace(0, R, 4001)))) for R in R_list])
    else:
        if r_exp < 1:
            raise ValueError("Lebesgue exponent must be >= 1")
        norms = _cumulative_power(u_hom, geom, r_exp, R_list) ** (1.0 / r_exp)
    norms = np.maximum.accumulate(norms)
    rel = abs(norms[-1] - norms[-2]) / norms[-1] if len(norms) > 1 and norms[-1] > 0 else 0.0
    if rel < threshold:
        return NormProfile(r_exp, R_list, norms, CONVERGED, None, float(rel), threshold)
    half = len(R_list) // 2
    rate = float(np.polyfit(np.log(R_list[half:]), np.log(norms[half:]), 1)[0]) \
        if len(R_list) - half >= 2 else None
    return NormProfile(r_exp, R_list, norms, DIVERGING, rate, float(rel), threshold)


def l2_growth_check(u_hom: RadialSolution, geom: RadialGeometry, R_list=None, rel_tol=0.05):
    """Compare the tail slope of ``N_2(R)^2`` with ``A^2 / 2`` from the envelope of ``u f^{1/2}``."""
    R_list = np.linspace(u_hom.r_max / 2, u_hom.r_max, 11) if R_list is None else np.asarray(R_list)
    sq = _cumulative_power(u_hom, geom, 2.0, R_list)
    slope = float(np.polyfit(R_list, sq, 1)[0])
    z = u_hom.zeros
    z = z[z > u_hom.r_max / 2]
    if len(z) < 3:
        raise TooFewZeros("need zeros on the tail half to measure the envelope")
    peaks = []
    for a, b in zip(z[:-1], z[1:]):
        xs = np.linspace(a, b, 201)
        peaks.append(np.max(np.abs(u_hom.u_at(xs)) * np.exp(0.5 * geom.log_f(xs))))
    A = float(np.mean(peaks))
    predicted = 0.5 * A ** 2
    return {"slope": slope, "predicted": predicted, "rel_error": abs(slope - predicted) / predicted,
            "pass": abs(slope - predicted) <= rel_tol * predicted}


def classify_strichartz_threshold(geom: RadialGeometry, lam: float, exponents,
                                  R_step: float = 10.0, R_start: float = 40.0,
                                  R_cap: float = 400.0, threshold: float = 1e-6,
                                  u_hom: RadialSolution | None = None) -> dict:
    """Classify ball norms across ``exponents`` and locate the threshold.

    Each exponent's radii grow in steps of ``R_step`` from ``R_start`` until
    the profile converges or ``R_cap`` is reached.  The threshold is the
    largest diverging exponent when every smaller exponent diverges and
    every larger one converges.
    """
    exps = sorted(float(e) for e in exponents)
    u_hom = u_hom or homogeneous_solution(geom, lam, R_cap)
    check_homogeneous(u_hom)
    profiles = {}
    full = np.arange(R_step, R_cap + 0.5 * R_step, R_step)
    n0 = int(np.searchsorted(full, R_start - 1e-9)) + 1
    for e in exps:
        # one pass over [0, R_cap]; then the shortest prefix that converges
        prof = ball_norm_profile(u_hom, geom, e, full, threshold, check=False)
        for n in range(n0, len(full) + 1):
            norms = prof.norms[:n]
            rel = abs(norms[-1] - norms[-2]) / norms[-1] if norms[-1] > 0 else 0.0
            if rel < threshold:
                prof = NormProfile(e, full[:n], norms, CONVERGED, None, float(rel), threshold)
                break
        profiles[e] = prof
    labels = [profiles[e].classification for e in exps]
    div = [e for e in exps if profiles[e].classification == DIVERGING]
    conv = [e for e in exps if profiles[e].classification == CONVERGED]
    bracketed = bool(div and conv and max(div) < min(conv))
    return {
        "geometry": geom.label(), "lambda": lam, "exponents": exps, "classification": labels,
        "bracketed": bracketed,
        "threshold": max(div) if bracketed else None,
        "first_converged": min(conv) if bracketed else None,
        "R_final": {str(e): float(profiles[e].R_list[-1]) for e in exps},
        "rel_change": {str(e): profiles[e].rel_change for e in exps},
        "profiles": profiles,
    }
