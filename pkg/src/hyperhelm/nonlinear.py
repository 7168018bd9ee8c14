"""Radial solutions of ``(L - lambda^2) u = Gamma |u|^{p-2} u``.

Two routes:

* small data: Picard iteration ``u <- w + R_lambda(Gamma |u|^{p-2} u)``
  seeded with a multiple of the regular solution;
* large data: critical points of the dual functional

      J(v) = 1/p' int |v|^{p'} - 1/2 int Gamma^{1/p} v R_lambda(Gamma^{1/p} v)

  whose Euler-Lagrange equation is ``|v|^{p'-2} v = Gamma^{1/p} R_lambda(Gamma^{1/p} v)``.

``R_lambda`` is the real part of the outgoing resolvent from
:mod:`hyperhelm.resolvent`; integrals use ``dV = |S^{N-1}| f dr``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import (CutoffViolated, ExponentOutOfRange, InvalidHypothesis, NoConvergence,
                     TrivialCollapse)
from .model import CoefficientProfile, RadialGeometry, as_profile, sphere_area
from .odesolver import solve_radial_ivp
from .resolvent import (ComplexRadialField, HomogeneousPair, apply_resolvent, bump,
                        homogeneous_pair, weak_residual)


def p_max_default(N: int) -> float:
    """Upper exponent ``2N/(N-2)`` (infinite for N = 2)."""
    return math.inf if N <= 2 else 2.0 * N / (N - 2)


def _real_field(pair, u, meta):
    u = np.asarray(u, dtype=float)
    z = np.zeros_like(u)
    return ComplexRadialField(pair.panels.nodes, u, z, meta, pair.panels)


def _spow(x, a):
    """``sign(x) |x|^a``, finite at ``x = 0`` for any ``a > 0``."""
    return np.sign(x) * np.abs(x) ** a


def nlh_residual(pair: HomogeneousPair, u, Gamma, p: float, checkpoints=None):
    """Windowed residual of ``(L - lambda^2) u = Gamma |u|^{p-2} u`` (max over windows)."""
    G = as_profile(Gamma)
    fld = _real_field(pair, u, {})
    src = lambda r, uu: G(r) * _spow(uu, p - 1)
    if checkpoints is None:
        checkpoints = np.linspace(0.1, 0.75 * pair.r_max, 40)
    return float(np.max(weak_residual(fld, pair.geom, pair.V, src, checkpoints, part="real")))


@dataclass
class IterationHistory:
    iterates: list = field(default_factory=list, repr=False)
    step_norms: list = field(default_factory=list)
    contraction: list = field(default_factory=list)
    converged: bool = False
    residual: float = math.nan

    def to_dict(self) -> dict:
        return {"step_norms": self.step_norms, "contraction": self.contraction,
                "converged": self.converged, "residual": self.residual,
                "iterations": len(self.step_norms)}


def working_norm(u, f):
    """Weighted sup norm ``||u (1 + f)^{1/2}||_inf``."""
    return float(np.max(np.abs(u) * np.sqrt(1.0 + f)))


def small_solution(geom: RadialGeometry, lam: float, Gamma, p: float, eps: float,
                   r_max: float = 30.0, tol: float = 1e-13, max_iter: int = 30,
                   pair: HomogeneousPair | None = None):
    """Fixed point of ``u = w + R_lambda(Gamma |u|^{p-2} u)`` with ``w = eps u_reg / ||u_reg||_inf``.

    Iterates until the working-norm step falls below ``tol`` times the
    working norm of ``u``.  Returns ``(field, history)``.
    """
    if not p > 2:
        raise ExponentOutOfRange("the contraction argument needs p > 2")
    if eps < 0 or not math.isfinite(eps):
        raise ValueError("eps must be a finite nonnegative number")
    pair = pair or homogeneous_pair(geom, lam, r_max)
    x = pair.panels.nodes
    fx = geom.f(x)
    G = as_profile(Gamma)
    Gx = G(x)
    ureg = pair.u_reg.re
    w = eps * ureg / np.max(np.abs(ureg))
    hist = IterationHistory()
    meta = {"lambda": lam, "geometry": geom.label(), "eps": eps, "p": p, "route": "picard"}
    if eps == 0:
        hist.iterates.append(np.zeros_like(x))
        hist.step_norms.append(0.0)
        hist.converged = True
        hist.residual = 0.0
        return _real_field(pair, np.zeros_like(x), meta), hist

    u = w.copy()
    hist.iterates.append(u)
    growth = 0
    with np.errstate(over="raise", invalid="raise"):
        for k in range(max_iter):
            try:
                nxt = w + apply_resolvent(pair, Gx * _spow(u, p - 1), check=False).re
            except (FloatingPointError, ValueError, ArithmeticError) as exc:
                raise NoConvergence(f"iteration {k} broke down: {exc}") from exc
            step = working_norm(nxt - u, fx)
            size = working_norm(nxt, fx)
            if hist.step_norms and hist.step_norms[-1] > 0:
                q = step / hist.step_norms[-1]
                hist.contraction.append(q)
                growth = growth + 1 if q >= 1 else 0
            hist.step_norms.append(step)
            hist.iterates.append(nxt)
            u = nxt
            if not math.isfinite(size) or size > 1e8 or growth >= 3:
                raise NoConvergence(f"iterates grow (step norm {step:.2e} at iteration {k + 1})")
            if step <= tol * size:
                hist.converged = True
                break
    if not hist.converged:
        raise NoConvergence(f"no contraction to {tol:g} within {max_iter} iterations")
    sup = float(np.max(np.abs(u)))
    hist.residual = nlh_residual(pair, u, G, p)
    meta.update(sup=sup, residual=hist.residual, iterations=len(hist.step_norms))
    if sup > 0.5:
        raise CutoffViolated(f"||u||_inf = {sup:.3g} > 1/2; the cutoff would be active")
    fld = _real_field(pair, u, meta)
    fld.meta["w_distance"] = float(np.max(np.abs(u - w)))
    return fld, hist


def ivp_crosscheck(fld: ComplexRadialField, geom: RadialGeometry, lam: float, Gamma, p: float,
                   r_max: float | None = None, tol: float = 1e-12) -> float:
    """Re-solve as an IVP from ``u(0)`` and return the sup deviation relative to ``||u||_inf``."""
    x = fld.grid
    r_max = float(x[-1]) if r_max is None else r_max
    coeffs = CoefficientProfile.helmholtz(geom, lam, Gamma=as_profile(Gamma), p=p)
    sol = solve_radial_ivp(geom, coeffs, float(fld.re[0]), r_max, tol)
    sel = x <= r_max
    return float(np.max(np.abs(sol.u_at(x[sel]) - fld.re[sel])) / np.max(np.abs(fld.re)))


# ---------------------------------------------------------------- dual route


class DualProblem:
    """Discretized dual functional on the panel grid of a homogeneous pair."""

    def __init__(self, pair: HomogeneousPair, Gamma, p: float, p_max: float | None = None):
        N = pair.geom.dim
        p_max = p_max_default(N) if p_max is None else p_max
        if not (2 < p < p_max):
            raise ExponentOutOfRange(f"need 2 < p < {p_max:g}")
        self.pair = pair
        self.p = p
        self.pd = p / (p - 1)
        x = pair.panels.nodes
        G = as_profile(Gamma)
        self.Gx = np.asarray(G(x), dtype=float)
        if np.any(self.Gx < 0) or np.max(self.Gx) == 0:
            raise InvalidHypothesis("need Gamma >= 0 and Gamma not identically 0")
        self.Gamma = G
        self.g1p = self.Gx ** (1.0 / p)
        self.dV = pair.panels.weights() * pair.geom.f(x) * sphere_area(N)

    def R(self, g):
        return apply_resolvent(self.pair, g, check=False).re

    def inner(self, a, b):
        return float(np.sum(self.dV * a * b))

    def norm(self, a):
        return math.sqrt(max(self.inner(a, a), 0.0))

    def recover_u(self, v):
        return self.R(self.g1p * v)

    def J(self, v):
        return float(np.sum(self.dV * np.abs(v) ** self.pd) / self.pd
                     - 0.5 * self.inner(self.g1p * v, self.recover_u(v)))

    def residual(self, v):
        return _spow(v, self.pd - 1) - self.g1p * self.recover_u(v)

    def ray(self, z):
        """``(A, B, t*)`` for ``t -> J(t z)``; ``t*`` is None when ``B <= 0``."""
        A = float(np.sum(self.dV * np.abs(z) ** self.pd))
        B = self.inner(self.g1p * z, self.recover_u(z))
        t = (A / B) ** (1.0 / (2.0 - self.pd)) if B > 0 else None
        return A, B, t


def dual_functional(v, Gamma, p, pair: HomogeneousPair) -> float:
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        return 0.0
    return DualProblem(pair, Gamma, p).J(v)


def dual_residual(v, Gamma, p, pair: HomogeneousPair) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    G = as_profile(Gamma)
    if G.limit == 0 and np.max(np.abs(G(pair.panels.nodes))) == 0:
        return _spow(v, 1.0 / (p - 1))
    if not np.any(v):
        return np.zeros_like(v)
    return DualProblem(pair, Gamma, p).residual(v)


@dataclass
class DualState:
    v: np.ndarray = field(repr=False)
    J: float
    residual: np.ndarray = field(repr=False)
    relative_residual: float
    u: ComplexRadialField = field(repr=False)
    nlh_residual: float = math.nan
    ray: dict = field(default_factory=dict)
    merit_history: list = field(default_factory=list)
    newton_evaluations: int = 0
    seed: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"J": self.J, "relative_residual": self.relative_residual,
                "nlh_residual": self.nlh_residual, "ray": self.ray,
                "merit_history": self.merit_history, "newton_evaluations": self.newton_evaluations,
                "seed": self.seed}


def _seed_bumps(rng, r_max):
    """Deterministic stream of bump directions; the first ones are fixed."""
    yield 0.0, 2.0
    yield 0.0, 1.0
    while True:
        yield float(rng.uniform(0, 0.2 * r_max)), float(rng.uniform(0.5, 3.0))


def critical_point_search(Gamma, p: float, pair: HomogeneousPair, tol: float = 1e-4,
                          max_descent: int = 60, seed: int = 0, p_max: float | None = None,
                          max_seeds: int = 8) -> DualState:
    """Critical point of ``J`` from a Nehari-scaled bump.

    Stage (a) scales a bump ``z`` to the ray maximum ``t* z``.  Stage (b)
    takes residual steps in the variable ``w = |v|^{p'-2} v``, projects each
    trial back onto its ray maximum and accepts it only if the relative
    residual decreases (step halving from ``s = 1``).  Stage (c) polishes
    with Newton-Krylov on the same residual until ``tol / 100``.
    """
    dp = DualProblem(pair, Gamma, p, p_max)
    x = pair.panels.nodes
    rng = np.random.default_rng(seed)
    pd = dp.pd

    def to_w(v):
        return _spow(v, pd - 1)

    def to_v(w):
        return _spow(w, p - 1)

    def H(w):
        return w - dp.g1p * dp.R(dp.g1p * to_v(w))

    def merit(w):
        h = H(w)
        return dp.norm(h) / max(dp.norm(w), 1e-300), h

    def project(w):
        v = to_v(w)
        _, _, t = dp.ray(v)
        return None if t is None else to_w(t * v)

    ray = None
    for k, (c, width) in zip(range(max_seeds), _seed_bumps(rng, pair.r_max)):
        z = bump(max(c, 0.0), width)(x) if c > 0 else np.where(
            x < width, np.exp(1 - 1 / (1 - np.minimum((x / width) ** 2, 1 - 1e-12))), 0.0)
        A, B, t = dp.ray(z)
        if t is not None:
            T = 10.0 * t
            ray = {"A": A, "B": B, "t_star": t, "J_star": dp.J(t * z), "J0": 0.0,
                   "J_far": dp.J(T * z), "t_far": T}
            seed_info = {"center": c, "width": width, "attempt": k}
            break
    if ray is None:
        raise NoConvergence("no seed direction with positive quadratic form found")

    w = to_w(ray["t_star"] * z)
    m, _ = merit(w)
    history = [m]
    s = 1.0
    for _ in range(max_descent):
        if m <= tol:
            break
        _, h = merit(w)
        accepted = False
        while s >= 1e-6:
            trial = project(w - s * h)
            if trial is not None:
                mt, _ = merit(trial)
                if mt < m:
                    w, m = trial, mt
                    accepted = True
                    break
            s *= 0.5
        if not accepted:
            break
        history.append(m)
        s = min(1.0, 2 * s)

    count = [0]

    def Hc(wv):
        count[0] += 1
        return H(wv)

    if m > tol / 100:
        try:
            w = optimize.newton_krylov(Hc, w, f_tol=1e-12 * max(np.max(np.abs(w)), 1e-300),
                                       method="lgmres", maxiter=80, line_search="armijo")
        except optimize.NoConvergence as exc:
            w = np.asarray(exc.args[0]) if exc.args else w
    m, h = merit(w)
    v = to_v(w)
    if dp.norm(v) < 1e-10 * max(1.0, dp.norm(ray["t_star"] * z)):
        raise TrivialCollapse("the dual variable collapsed to 0; restart with another seed")
    if m > tol:
        raise NoConvergence(f"relative dual residual {m:.2e} above {tol:g}")
    u = dp.recover_u(v)
    fld = _real_field(pair, u, {"route": "dual", "p": p, "lambda": pair.lam})
    state = DualState(v=v, J=dp.J(v), residual=dp.residual(v), relative_residual=m, u=fld,
                      ray=ray, merit_history=history, newton_evaluations=count[0], seed=seed_info)
    state.nlh_residual = nlh_residual(pair, u, dp.Gamma, p)
    return state


def duality_gap(state: DualState, Gamma, p: float) -> float:
    """``||Gamma^{1/p'} |u|^{p-2} u - v|| / ||v||`` in the grid sup norm."""
    x = state.u.grid
    G = as_profile(Gamma)(x)
    v_check = G ** (1 - 1 / p) * _spow(state.u.re, p - 1)
    return float(np.max(np.abs(v_check - state.v)) / np.max(np.abs(state.v)))
