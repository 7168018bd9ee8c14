"""Limiting-absorption resolvent ``(L - lambda^2 - i0)^{-1}`` on radial data.

Radially, ``(L - lambda^2) u = g`` reads ``-(f u')'/f - V u = g`` with
``V = kappa^2/4 + lambda^2``.  With the regular solution ``u_reg`` and the
outgoing solution ``u_out ~ f^{-1/2} e^{i lambda r}`` the solution is

    u(r) = -[u_out(r) int_0^r u_reg g f + u_reg(r) int_r^R u_out g f] / (f W)

where ``f W = f (u_reg u_out' - u_reg' u_out)`` is constant (Abel).  Fields
live on a :class:`~hyperhelm.panels.PanelGrid`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.integrate import solve_ivp

from .errors import (DegeneratePair, ExponentOutOfRange, MismatchedProblem, QuadratureFailure,
                     SupportViolation, TruncationTooSmall)
from .greens import green_limit
from .model import CoefficientProfile, RadialGeometry, sphere_area
from .odesolver import solve_radial_ivp
from .panels import PanelGrid, default_breakpoints

_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


@dataclass
class ComplexRadialField:
    grid: np.ndarray
    re: np.ndarray
    im: np.ndarray
    meta: dict = field(default_factory=dict)
    panels: PanelGrid | None = field(default=None, repr=False)
    dre: np.ndarray | None = field(default=None, repr=False)
    dim: np.ndarray | None = field(default=None, repr=False)

    @property
    def values(self) -> np.ndarray:
        return self.re + 1j * self.im

    @property
    def derivative(self) -> np.ndarray:
        if self.dre is not None:
            return self.dre + 1j * self.dim
        return self.panels.derivative(self.values)

    def __call__(self, r):
        """Spectral interpolation of the complex field at ``r``."""
        if self.panels is None:
            return np.interp(r, self.grid, self.re) + 1j * np.interp(r, self.grid, self.im)
        return self.panels.interpolate(self.values, r)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "re", "im"])
            for row in zip(self.grid, self.re, self.im):
                w.writerow([repr(float(x)) for x in row])


@dataclass
class HomogeneousPair:
    geom: RadialGeometry
    lam: float
    r_max: float
    tol: float
    panels: PanelGrid = field(repr=False)
    u_reg: ComplexRadialField = field(repr=False)
    u_out: ComplexRadialField = field(repr=False)
    W: complex = 0j
    abel_drift: float = 0.0
    doubling_change: float | None = None
    r_min: float = 0.0
    _reg: object = field(default=None, repr=False)
    _out: object = field(default=None, repr=False)

    @property
    def V(self) -> float:
        return self.geom.kappa ** 2 / 4 + self.lam ** 2

    def reg(self, r):
        """Dense ``(u_reg, u_reg')``."""
        return self._reg(r)

    def out(self, r):
        """Dense ``(u_out, u_out')``; radii below ``r_min`` are clamped."""
        y = self._out(np.maximum(r, self.r_min))
        return y[0], y[1]


def wkb_defect(geom: RadialGeometry, lam: float, r: float) -> float:
    """Relative size of the term dropped by first-order WKB seeding at ``r``."""
    c = geom.kappa ** 2 / 4 - 0.5 * geom.dell(r) - 0.25 * geom.ell(r) ** 2
    return abs(float(c)) / (4 * lam ** 2)


def _outgoing(geom, lam, r_max, r_min, tol):
    V = geom.kappa ** 2 / 4 + lam ** 2
    ell = geom._ell
    amp = math.exp(-0.5 * geom.log_f(r_max))
    u0 = amp * np.exp(1j * lam * r_max)
    du0 = (1j * lam - 0.5 * geom.ell(r_max)) * u0

    def rhs(r, y):
        return [y[1], -ell(r) * y[1] - V * y[0]]

    rtol = max(0.02 * tol, 2.5e-14)
    res = solve_ivp(rhs, (r_max, r_min), [u0, du0], method="DOP853", rtol=rtol, atol=1e-250,
                    dense_output=True)
    if res.status != 0:
        raise ArithmeticError(f"outgoing solve failed: {res.message}")
    return res.sol


def homogeneous_pair(geom: RadialGeometry, lam: float, r_max: float = 40.0, tol: float = 1e-10,
                     panels: PanelGrid | None = None, check_doubling: bool = True,
                     doubling_tol: float = 1e-7) -> HomogeneousPair:
    """Regular and outgoing solutions of ``(L - lambda^2) u = 0`` on ``[0, r_max]``.

    ``u_reg(0) = 1``; ``u_out`` is integrated backward from the WKB data
    ``f^{-1/2} e^{i lambda r}`` at ``r_max``.  With ``check_doubling`` the
    outgoing solution is recomputed from ``2 r_max`` and the normalized
    kernel ``u_out / (f W)`` compared on ``[0, r_max/2]``.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if geom.d0 <= 0:
        raise ValueError("the pair needs a geometry with a regular singular origin (d0 > 0)")
    defect = wkb_defect(geom, lam, r_max)
    if defect > tol:
        raise TruncationTooSmall(
            f"r_max = {r_max:g} is below the asymptotic onset (WKB defect {defect:.2e} > tol {tol:.1e})")
    coeffs = CoefficientProfile.helmholtz(geom, lam)
    panels = panels or PanelGrid(default_breakpoints(r_max))
    if abs(panels.r_max - r_max) > 1e-12 * r_max:
        raise ValueError("panel grid does not end at r_max")
    x = panels.nodes
    reg = solve_radial_ivp(geom, coeffs, 1.0, r_max, tol)
    r_min = float(x[1]) * 0.5
    out = _outgoing(geom, lam, r_max, r_min, tol)

    ur, dur = reg(x)
    yo = out(np.maximum(x, r_min))
    uo, duo = yo[0], yo[1]
    uo[0] = np.nan
    duo[0] = np.nan
    fx = geom.f(x)
    fW = fx[1:] * (ur[1:] * duo[1:] - dur[1:] * uo[1:])
    W = complex(fW[-1])
    if abs(W) < 1e-10:
        raise DegeneratePair(f"|f W| = {abs(W):.2e} < 1e-10")
    drift = float(np.max(np.abs(fW - W)) / abs(W))

    meta = {"lambda": lam, "geometry": geom.label()}
    pair = HomogeneousPair(
        geom=geom, lam=float(lam), r_max=float(r_max), tol=tol, panels=panels,
        u_reg=ComplexRadialField(x, ur, np.zeros_like(ur), dict(meta, route="regular"), panels,
                                 dur, np.zeros_like(dur)),
        u_out=ComplexRadialField(x, uo.real, uo.imag, dict(meta, route="outgoing"), panels,
                                 duo.real, duo.imag),
        W=W, abel_drift=drift, r_min=r_min, _reg=reg, _out=out)

    if check_doubling:
        out2 = _outgoing(geom, lam, 2 * r_max, r_min, tol)
        y2 = out2(np.maximum(x, r_min))
        W2 = geom.f(r_max) * (ur[-1] * y2[1][-1] - dur[-1] * y2[0][-1])
        sel = (x > 0) & (x <= r_max / 2)
        k1 = uo[sel] / W
        k2 = y2[0][sel] / W2
        change = float(np.max(np.abs(k1 - k2)) / np.max(np.abs(k1)))
        pair.doubling_change = change
        if change > doubling_tol:
            raise TruncationTooSmall(f"doubling r_max changes the outgoing kernel by {change:.2e}")
    return pair


def bump(center: float, width: float, amplitude: float = 1.0):
    """Smooth compactly supported radial bump on ``[center - width, center + width]``."""
    def g(r):
        x = (np.asarray(r, dtype=float) - center) / width
        out = np.zeros_like(x)
        inside = np.abs(x) < 1
        out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
        return out
    g.support = (max(center - width, 0.0), center + width)
    return g


def _support_check(vals, x, r_max, frac=0.9, rel=1e-12):
    big = np.max(np.abs(vals))
    tail = np.abs(vals[x >= frac * r_max])
    if tail.size and np.max(tail) > rel * big:
        raise SupportViolation(
            f"source is {np.max(tail) / big:.1e} (relative) on the outer tenth of [0, {r_max:g}]")
    return big


def apply_resolvent(pair: HomogeneousPair, g, geom: RadialGeometry | None = None, *,
                    check: bool = True) -> ComplexRadialField:
    """``(L - lambda^2 - i0)^{-1} g`` by variation of parameters.

    ``g`` is a callable of ``r`` or an array of values on ``pair.panels``.
    Callables are integrated with Gauss-Legendre on every node gap using the
    dense outputs; sampled data use the spectral panel integrator.
    """
    if geom is not None and geom != pair.geom:
        raise MismatchedProblem("geometry differs from the one the pair was built for")
    P = pair.panels
    x = P.nodes
    geo = pair.geom
    fW = pair.W
    meta = {"lambda": pair.lam, "geometry": geo.label(), "route": "variation_of_parameters"}

    gx = np.asarray(g(x) if callable(g) else g, dtype=float)
    if gx.shape != x.shape:
        raise ValueError("sampled g must live on the pair's panel nodes")
    if not np.all(np.isfinite(gx)):
        raise ValueError("g has non-finite values")
    if np.max(np.abs(gx)) == 0:
        z = np.zeros_like(x)
        return ComplexRadialField(x, z, z.copy(), meta, P, z.copy(), z.copy())
    _support_check(gx, x, pair.r_max)

    ur = pair.u_reg.re
    dur = pair.u_reg.dre
    uo = pair.u_out.values
    duo = pair.u_out.derivative
    fx = geo.f(x)
    if callable(g):
        xs, ws = P.subinterval_gauss(8)
        q = g(xs)
        fq = geo.f(xs)
        a_loc = np.sum(ws * pair.reg(xs.ravel())[0].reshape(xs.shape) * q * fq, axis=1)
        b_loc = np.sum(ws * pair.out(xs.ravel())[0].reshape(xs.shape) * q * fq, axis=1)
        A = np.concatenate([[0.0], np.cumsum(a_loc)])
        Bc = np.concatenate([[0.0], np.cumsum(b_loc)])
        B = Bc[-1] - Bc
    else:
        A = P.cumulative(ur * gx * fx)
        integrand = np.where(x > 0, np.nan_to_num(uo) * gx * fx, 0.0)
        B = P.cumulative_from_right(integrand)
    first = np.where(x > 0, np.nan_to_num(uo) * A, 0.0)
    dfirst = np.where(x > 0, np.nan_to_num(duo) * A, 0.0)
    u = -(first + ur * B) / fW
    du = -(dfirst + dur * B) / fW
    out = ComplexRadialField(x, u.real, u.imag, meta, P, du.real, du.imag)
    if check:
        src = (lambda r: g(r)) if callable(g) else (lambda r: P.interpolate(gx, r))
        res = helmholtz_residual(out, geo, pair.V, src)
        meta["residual"] = float(np.max(res))
        meta["residual_homogeneous_im"] = float(np.max(helmholtz_residual(
            out, geo, pair.V, None, part="imag")))
    return out


def weak_residual(field: ComplexRadialField, geom: RadialGeometry, V, source,
                  checkpoints=None, window: float = 0.1, part: str = "complex",
                  scale=None) -> np.ndarray:
    """Windowed weak-form defect of ``(f u')' + f (V u + s) = 0``.

    ``V`` is a constant or callable, ``source`` a callable ``s(r, u)`` or
    None.  Each window value is divided by ``int_a^b f (V U + S)`` where
    ``U`` and ``S`` are global sup-norm scales of ``u`` and ``s``.
    """
    x = field.grid
    r_max = float(x[-1])
    if checkpoints is None:
        checkpoints = np.linspace(0.1, r_max - window - 1e-9, 40)
    vals = field.values
    dvals = field.derivative
    if part == "real":
        vals, dvals = vals.real, dvals.real
    elif part == "imag":
        vals, dvals = vals.imag, dvals.imag
    Vf = V if callable(V) else (lambda r, c=V: np.full_like(np.asarray(r, dtype=float), c))
    if scale is None:
        U = float(np.max(np.abs(vals)))
        S = 0.0
        if source is not None:
            S = float(np.max(np.abs(source(x, vals))))
    else:
        U, S = scale
    P = field.panels

    def interp(y, r):
        return P.interpolate(y, r) if P is not None else np.interp(r, x, y)

    out = []
    for a in np.atleast_1d(checkpoints):
        b = a + window
        xs = 0.5 * window * _GL_X + 0.5 * (a + b)
        ws = 0.5 * window * _GL_W
        lf_a = geom.log_f(a)
        fx = np.exp(geom.log_f(xs) - lf_a)
        fb = math.exp(geom.log_f(b) - lf_a)
        u = interp(vals, xs)
        s = source(xs, u) if source is not None else 0.0
        da, db = interp(dvals, a), interp(dvals, b)
        weak = fb * db - da + np.sum(ws * fx * (Vf(xs) * u + s))
        denom = np.sum(ws * fx * (np.abs(Vf(xs)) * U + S))
        out.append(abs(weak) / denom if denom > 0 else abs(weak))
    return np.array(out)


def helmholtz_residual(field: ComplexRadialField, geom: RadialGeometry, V: float, g,
                       checkpoints=None, window: float = 0.1, part: str = "complex"):
    """Residual of ``(L - lambda^2) u = g``; ``g=None`` checks the homogeneous equation."""
    src = None if g is None else (lambda r, u: np.asarray(g(r)))
    return weak_residual(field, geom, V, src, checkpoints, window, part)


def kernel_from_pair(pair: HomogeneousPair, t):
    """Complex radial kernel ``-u_out(t) / (|S^{N-1}| f W)`` of the same resolvent."""
    uo, _ = pair.out(np.asarray(t, dtype=float))
    return -uo / (sphere_area(pair.geom.dim) * pair.W)


def _kernel_callable(N, lam, t_max, tol):
    """Vectorized real kernel; even N is tabulated once on a graded panel grid."""
    if N % 2:
        return lambda d: green_limit(N, lam, np.maximum(d, 1e-300))
    # smooth remainder: G + log(t)/(2 pi) for N=2, t^{N-2} G for N>=4
    br = np.concatenate([[1e-6, 1e-4, 1e-3, 1e-2, 0.05, 0.125, 0.25],
                         np.arange(0.5, t_max + 0.5, 0.5)])
    P = PanelGrid(br, n=14)
    tn = P.nodes
    G = np.asarray(green_limit(N, lam, tn, tol))
    if N == 2:
        H = G + np.log(tn) / (2 * np.pi)
        return lambda d: P.interpolate(H, np.clip(d, 1e-6, t_max)) - np.log(np.maximum(d, 1e-300)) / (2 * np.pi)
    H = G * tn ** (N - 2)
    return lambda d: P.interpolate(H, np.clip(d, 1e-6, t_max)) / np.maximum(d, 1e-300) ** (N - 2)


def _gl_panels(fn, breaks):
    a = breaks[:-1, None]
    b = breaks[1:, None]
    x = 0.5 * (b - a) * _GL_X + 0.5 * (a + b)
    return float(np.sum(0.5 * (b - a) * _GL_W * fn(x)))


def _adaptive_gl(fn, breaks, tol, scale, max_halvings=6):
    prev = _gl_panels(fn, breaks)
    for _ in range(max_halvings):
        mid = 0.5 * (breaks[1:] + breaks[:-1])
        nb = np.empty(2 * breaks.size - 1)
        nb[0::2], nb[1::2] = breaks, mid
        breaks = nb
        cur = _gl_panels(fn, breaks)
        if abs(cur - prev) <= tol * max(abs(cur), scale):
            return cur
        prev = cur
    raise QuadratureFailure(f"angular quadrature stalled at change {abs(cur - prev):.1e}")


def convolve_kernel(N: int, lam: float, g, r0, support, tol: float = 1e-10, kernel=None):
    """``(Re G * g)(r0)`` on ``H^N`` for real radial ``g`` by direct double integration.

    For real ``g`` this is the real part of the resolvent applied to ``g``.

    Uses ``cosh d = cosh r0 cosh r - sinh r0 sinh r cos(theta)``.  For odd N
    the angle is traded for the distance ``d`` (Jacobian ``sinh d / (sinh r0
    sinh r)``), which keeps the kernel singularity out of the integrand.
    Even N integrate over the angle on panels graded toward ``theta = 0``,
    where the kernel is singular when ``r = r0``.  The outer radial
    integral is adaptive (QUADPACK).
    """
    a_s, b_s = support
    r0 = np.atleast_1d(np.asarray(r0, dtype=float))
    G = kernel or _kernel_callable(N, lam, float(np.max(r0)) + b_s + 1.0, 1e-9)
    S_full = sphere_area(N)
    S_sub = sphere_area(N - 1) if N > 2 else 2.0
    grade = np.concatenate([[0.0], np.geomspace(1e-10, 0.5, 24), np.linspace(0.5, math.pi, 6)[1:]])

    def inner(r, x0):
        if x0 == 0.0:
            return S_full * float(G(np.array(r)))
        ch = math.cosh(x0) * math.cosh(r)
        sh = math.sinh(x0) * math.sinh(r)
        lo, hi = abs(r - x0), r + x0
        if N % 2:
            def fd(d):
                c = (ch - np.cosh(d)) / sh
                return G(d) * np.sinh(d) * np.maximum(1 - c * c, 0.0) ** ((N - 3) / 2)
            val = _adaptive_gl(fd, np.linspace(lo, hi, 3), tol * 1e-2, 1e-14)
            return S_sub * val / sh

        def fth(th):
            d = np.arccosh(np.maximum(ch - sh * np.cos(th), 1.0))
            return G(d) * np.sin(th) ** (N - 2)
        return S_sub * _adaptive_gl(fth, grade, tol * 1e-2, 1e-14)

    out = []
    for x0 in r0:
        fo = lambda r: float(g(np.array([r]))[0]) * math.sinh(r) ** (N - 1) * inner(r, x0)
        pts = [x0] if a_s < x0 < b_s else None
        val, err = integrate.quad(fo, a_s, b_s, points=pts, epsabs=tol * 1e-2, epsrel=tol, limit=400)
        if not math.isfinite(val) or err > max(1e3 * tol * abs(val), 1e-12):
            raise QuadratureFailure(f"convolution at r0={x0:g}: error estimate {err:.1e}")
        out.append(val)
    return np.array(out)


def lebesgue_norm(values, panels: PanelGrid, geom: RadialGeometry, p: float) -> float:
    """Radial ``L^p(dV)`` norm, ``dV = |S^{N-1}| f dr``."""
    S = sphere_area(geom.dim)
    if math.isinf(p):
        return float(np.max(np.abs(values)))
    fx = geom.f(panels.nodes)
    return float((S * panels.integral(np.abs(values) ** p * fx)) ** (1.0 / p))


def check_exponents(N: int, p: float, q: float):
    if not (1 <= p < 2 < q):
        raise ExponentOutOfRange("need 1 <= p < 2 < q")
    if 1 / p - 1 / q > 2 / N + 1e-15:
        raise ExponentOutOfRange("need 1/p - 1/q <= 2/N")
    if N > 2 and p == 1 and abs(q - N / (N - 2)) < 1e-12:
        raise ExponentOutOfRange("(1, N/(N-2)) is excluded")
    if p == N / 2 and math.isinf(q):
        raise ExponentOutOfRange("(N/2, inf) is excluded")


def norm_probe(pair: HomogeneousPair, family, p: float, q: float) -> dict:
    """``||R_lambda g||_q / ||g||_p`` over a family of radial test functions."""
    geom = pair.geom
    check_exponents(geom.dim, p, q)
    ratios = []
    for g in family:
        gx = np.asarray(g(pair.panels.nodes), dtype=float)
        if np.max(np.abs(gx)) == 0:
            raise ValueError("degenerate test function g = 0")
        u = apply_resolvent(pair, g, check=False)
        num = lebesgue_norm(u.values, pair.panels, geom, q)
        den = lebesgue_norm(gx, pair.panels, geom, p)
        ratios.append(num / den)
    ratios = np.array(ratios)
    running = np.maximum.accumulate(ratios)
    half = running[len(running) // 2 - 1] if len(running) > 1 else running[-1]
    return {"p": p, "q": q, "ratios": ratios.tolist(), "max_ratio": float(running[-1]),
            "min_ratio": float(np.min(ratios)), "spread": float(np.max(ratios) / np.min(ratios)),
            "running_max": running.tolist(),
            "late_growth": float(running[-1] / half)}


def bump_family(n: int = 20, seed: int = 0, r_max: float = 30.0):
    """Bumps with log-spaced widths and centers; the seed shuffles their order."""
    rng = np.random.default_rng(seed)
    widths = np.geomspace(0.05, 2.0, n)
    centers = np.linspace(0.0, 0.5 * r_max, n)
    rng.shuffle(centers)
    return [bump(max(c, w * 1.01) if c < w else c, w) for c, w in zip(centers, widths)]
