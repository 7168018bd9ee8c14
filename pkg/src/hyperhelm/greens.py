"""Green's kernels of ``L - (lambda + i mu)^2`` on hyperbolic space ``H^N``.

With ``D = (1/sinh t) d/dt`` and ``z = i lambda - mu`` the kernels are

* odd N:   ``G(t) = c_N / z * D^{(N-1)/2} [e^{z t}]``
* even N:  ``G(t) = c_N / z * int_t^inf sinh s (cosh s - cosh t)^{-1/2} D^{N/2}[e^{z s}] ds``

``D`` acts on terms ``e^{zt} cosh^a(t) sinh^{-b}(t)`` by

    D(a, b) = z (a, b + 1) + a (a - 1, b) - b (a + 1, b + 2)

so odd-N kernels are finite term lists.  ``c_N`` is fixed by matching the
small-t singularity to the Euclidean fundamental solution of ``-Delta``,
which makes it independent of lambda and mu.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EvenDimension, ExtrapolationUnstable, QuadratureFailure, RequiresAbsorption
from .model import _log_cosh, _log_sinh, sphere_area
from .reports import BoundReport

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
MU0 = 0.1


def _double_factorial(n: int) -> int:
    return math.prod(range(n, 0, -2)) if n > 0 else 1


def norm_constant(N: int) -> float:
    """``c_N`` such that ``G(t) ~ t^{2-N} / ((N-2)|S^{N-1}|)`` (``-log t / 2 pi`` for N=2)."""
    N = int(N)
    if N < 2:
        raise ValueError("N must be >= 2")
    if N == 2:
        return 1.0 / (2 * math.pi * math.sqrt(2))
    if N % 2:
        k = (N - 1) // 2
        return (-1) ** (k - 1) / (_double_factorial(2 * k - 3) * (N - 2) * sphere_area(N))
    k = N // 2
    n = 2 * k - 3
    wallis = _double_factorial(n - 1) / _double_factorial(n)  # int_0^{pi/2} cos^n
    return (-1) ** (k - 1) / (math.sqrt(2) * _double_factorial(n) * wallis * (N - 2) * sphere_area(N))


def apply_D(terms: dict, z: complex) -> dict:
    """One application of ``(1/sinh) d/dt`` to ``{(a, b): coef}``."""
    out: dict = {}

    def add(key, c):
        if c != 0:
            out[key] = out.get(key, 0) + c

    for (a, b), c in terms.items():
        add((a, b + 1), z * c)
        if a:
            add((a - 1, b), a * c)
        if b:
            add((a + 1, b + 2), -b * c)
    return {k: v for k, v in out.items() if v != 0}


def D_power(k: int, z: complex) -> dict:
    terms = {(0, 0): 1.0 + 0j}
    for _ in range(k):
        terms = apply_D(terms, z)
    return terms


def eval_terms(terms, z, t, sinh_shift: int = 0):
    """``sum coef e^{zt} cosh^a sinh^{sinh_shift - b}`` evaluated in log form."""
    t = np.asarray(t, dtype=float)
    lc = _log_cosh(t)
    ls = _log_sinh(t)
    out = np.zeros(t.shape, dtype=complex)
    for (a, b), c in terms.items():
        out += c * np.exp(z * t + a * lc + (sinh_shift - b) * ls)
    return out


@dataclass(frozen=True)
class KernelTerm:
    coef: complex
    expArg: complex
    coshPower: int
    sinhInversePower: int


@dataclass(frozen=True)
class GreenKernel:
    """Evaluable ``G_{lambda + i mu}``; call it on ``t > 0``."""

    N: int
    lam: float
    mu: float
    normConst: float
    terms: tuple = ()
    inner_terms: tuple = field(default=(), repr=False)
    tol: float = 1e-12

    @property
    def z(self) -> complex:
        return complex(-self.mu, self.lam)

    @property
    def odd(self) -> bool:
        return self.N % 2 == 1

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0) or not np.all(np.isfinite(t)):
            raise ValueError("kernel is evaluated at finite t > 0 only")
        if self.odd:
            td = {(k.coshPower, k.sinhInversePower): k.coef for k in self.terms}
            return eval_terms(td, self.z, t)
        flat = np.atleast_1d(t)
        vals = np.array([_even_integral(self.N, self.z, float(x), self.tol)[0] for x in flat])
        vals = vals * self.normConst / self.z
        return vals.reshape(t.shape) if t.ndim else complex(vals[0])

    def table(self, t):
        return np.asarray(t, dtype=float), np.asarray(self(t))

    def to_csv(self, path, t):
        t, g = self.table(t)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "ReG", "ImG"])
            for a, b in zip(np.atleast_1d(t), np.atleast_1d(g)):
                w.writerow([repr(float(a)), repr(float(b.real)), repr(float(b.imag))])


def build_kernel_odd(N: int, lam: float, mu: float = 0.0) -> GreenKernel:
    N = int(N)
    if N % 2 == 0:
        raise EvenDimension("build_kernel_odd needs odd N; use eval_kernel_even")
    if N < 3:
        raise ValueError("N must be >= 3")
    if not (lam > 0 and mu >= 0):
        raise ValueError("need lambda > 0 and mu >= 0")
    z = complex(-mu, lam)
    cN = norm_constant(N)
    raw = D_power((N - 1) // 2, z)
    terms = tuple(KernelTerm(coef=c * cN / z, expArg=z, coshPower=a, sinhInversePower=b)
                  for (a, b), c in sorted(raw.items()))
    return GreenKernel(N=N, lam=float(lam), mu=float(mu), normConst=cN, terms=terms)


def build_kernel_even(N: int, lam: float, mu: float, tol: float = 1e-12) -> GreenKernel:
    N = int(N)
    if N % 2:
        raise ValueError("build_kernel_even needs even N")
    if mu <= 0:
        raise RequiresAbsorption("even-N quadrature needs mu > 0")
    z = complex(-mu, lam)
    inner = tuple(sorted(D_power(N // 2, z).items()))
    return GreenKernel(N=N, lam=float(lam), mu=float(mu), normConst=norm_constant(N),
                       inner_terms=inner, tol=tol)


def build_kernel(N: int, lam: float, mu: float = 0.0, tol: float = 1e-12) -> GreenKernel:
    return build_kernel_odd(N, lam, mu) if N % 2 else build_kernel_even(N, lam, mu, tol)


def _even_integrand(terms, z, t, w):
    """Integrand after ``s = t + w^2`` including the Jacobian ``2w``.

    ``cosh s - cosh t = 2 sinh(t + w^2/2) sinh(w^2/2)`` keeps the difference
    free of cancellation; ``w / sqrt(sinh(w^2/2))`` is folded analytically.
    """
    s = t + w * w
    x = 0.5 * w * w
    lsc = np.where(x > 1e-8, _log_sinh(np.maximum(x, 1e-8)) - np.log(np.maximum(x, 1e-8)), x * x / 6)
    base = math.log(2.0) - 0.5 * _log_sinh(t + x) - 0.5 * lsc
    lc = _log_cosh(s)
    ls = _log_sinh(s)
    out = np.zeros(w.shape, dtype=complex)
    for (a, b), c in terms:
        out += c * np.exp(z * s + a * lc + (1 - b) * ls + base)
    return out


def _composite(fn, breaks):
    a = breaks[:-1, None]
    b = breaks[1:, None]
    x = 0.5 * (b - a) * _GL_X + 0.5 * (a + b)
    return np.sum(0.5 * (b - a) * _GL_W * fn(x))


def _refine(breaks):
    mid = 0.5 * (breaks[1:] + breaks[:-1])
    out = np.empty(2 * breaks.size - 1)
    out[0::2] = breaks
    out[1::2] = mid
    return out


def truncation_length(N: int, mu: float, tol: float) -> float:
    """Length of ``[t, t + L]`` beyond which the integrand is below ``tol``.

    ``D^{N/2}`` contributes ``sinh^{-N/2}``, so the integrand decays like
    ``e^{-((N-1)/2 + mu)(s - t)}`` relative to its size near ``s = t``.
    """
    rate = 0.5 * (N - 1) + mu
    return math.log(1.0 / tol) / rate + 4.0


def _even_integral(N, z, t, tol, max_halvings: int = 6, terms=None):
    """Bracket integral for even N, refined until halving changes it by <= tol.

    Returns ``(value, last_change)``.
    """
    if terms is None:
        terms = tuple(sorted(D_power(N // 2, z).items()))
    L = truncation_length(N, -z.real, tol)
    # w-substitution on [t, t + 1], plain s beyond
    if t < 1:
        q = math.sqrt(t)
        head = [0.0] + [q * 2.0 ** j for j in range(-4, 8) if q * 2.0 ** j < 1] + [1.0]
    else:
        head = [0.0, 0.25, 0.5, 0.75, 1.0]
    bw = np.array(head)
    bs = t + 1 + np.linspace(0.0, L, int(math.ceil(L / 0.5)) + 1)
    f_w = lambda w: _even_integrand(terms, z, t, w)
    f_s = lambda s: _even_integrand(terms, z, t, np.sqrt(s - t)) / (2 * np.sqrt(s - t))
    prev = _composite(f_w, bw) + _composite(f_s, bs)
    change = math.inf
    for _ in range(max_halvings):
        bw, bs = _refine(bw), _refine(bs)
        cur = _composite(f_w, bw) + _composite(f_s, bs)
        change = abs(cur - prev)
        if change <= tol * max(abs(cur), 1e-300):
            return cur, change
        prev = cur
    raise QuadratureFailure(f"even-N quadrature at t={t:g} stalled at relative change {change / abs(cur):.2e}")


def eval_kernel_even(N: int, lam: float, mu: float, t, tol: float = 1e-10):
    """``G_{lambda + i mu}(t)`` for even N by quadrature (scalar or array t)."""
    N = int(N)
    if N % 2:
        raise ValueError("eval_kernel_even needs even N")
    if mu <= 0:
        raise RequiresAbsorption("the even-N formula is evaluated for mu > 0 only")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise ValueError("t must be positive")
    z = complex(-mu, lam)
    terms = tuple(sorted(D_power(N // 2, z).items()))
    pref = norm_constant(N) / z
    vals = np.array([_even_integral(N, z, float(x), tol, terms=terms)[0]
                     for x in np.atleast_1d(t_arr)]) * pref
    return vals.reshape(t_arr.shape) if t_arr.ndim else complex(vals[0])


def _richardson(samples):
    """Richardson table for samples at mu0 / 2^j with an error series in mu."""
    n = len(samples)
    T = np.full((n, n), np.nan, dtype=np.asarray(samples).dtype)
    T[:, 0] = samples
    for j in range(1, n):
        for k in range(1, j + 1):
            T[j, k] = T[j, k - 1] + (T[j, k - 1] - T[j - 1, k - 1]) / (2.0 ** k - 1)
    return T


def green_limit_estimate(N: int, lam: float, t: float, tol: float = 1e-8,
                         mu0: float = MU0, max_levels: int = 8, part: str = "real"):
    """``lim_{mu -> 0+} Re G_{lambda + i mu}(t)`` with an error estimate.

    Odd N uses the closed form at ``mu = 0`` (error 0).  Even N starts from
    ``mu0, mu0/2, mu0/4`` and adds levels until two successive diagonal
    extrapolants agree to ``tol`` relative.  ``part="complex"`` extrapolates
    the full complex value instead of the real part.
    """
    t = float(t)
    if t <= 0:
        raise ValueError("t must be positive")
    pick = (lambda z: z.real) if part == "real" else (lambda z: complex(z))
    if N % 2:
        return pick(build_kernel_odd(N, lam, 0.0)(t)), 0.0
    inner_tol = 1e-13
    samples = [eval_kernel_even(N, lam, mu0 / 2 ** j, t, inner_tol) for j in range(3)]
    while True:
        T = _richardson(np.array(samples, dtype=complex) if part != "real"
                        else np.array(samples).real)
        J = len(samples) - 1
        err = abs(T[J, J] - T[J - 1, J - 1])
        scale = max(abs(T[J, J]), 1e-300)
        if err <= tol * scale or len(samples) >= max_levels:
            break
        samples.append(eval_kernel_even(N, lam, mu0 / 2 ** len(samples), t, inner_tol))
    if err > 10 * tol * scale:
        raise ExtrapolationUnstable(
            f"Richardson extrapolants differ by {err / scale:.2e} (relative) at t={t:g}")
    return pick(T[J, J]), float(err)


def green_limit(N: int, lam: float, t, tol: float = 1e-8):
    """Real limiting kernel ``G(t) = lim Re G_{lambda + i mu}(t)``."""
    t_arr = np.asarray(t, dtype=float)
    if N % 2:
        if np.any(t_arr <= 0):
            raise ValueError("t must be positive")
        return build_kernel_odd(N, lam, 0.0)(t_arr).real
    vals = np.array([green_limit_estimate(N, lam, x, tol)[0] for x in np.atleast_1d(t_arr)])
    return vals.reshape(t_arr.shape) if t_arr.ndim else float(vals[0])


def default_t_grid():
    small = np.geomspace(1e-4, 1.0, 41)
    large = np.linspace(1.0, 15.0, 57)
    return small, large


def _trend(values, scale):
    """Log-log slope of ``values`` against the divergence ``scale`` on the last third."""
    n = len(values)
    sl = slice(2 * n // 3, n)
    x = np.log(scale[sl])
    y = np.log(np.maximum(values[sl], 1e-300))
    if np.ptp(x) == 0:
        return 0.0
    return float(np.polyfit(x, y, 1)[0])


def certify_asymptotics(kern: GreenKernel, t_small=None, t_large=None,
                        max_slope: float = 0.25) -> BoundReport:
    """Check ``|G| <= C max(t^{2-N}, |log t|)`` and ``|G| <= C e^{((1-N)/2 - mu) t}``.

    Both ratios must be finite and show no growth trend toward the singular
    end: the log-log slope against the divergence scale (``1/t`` or
    ``|log t|`` near 0, ``t`` at infinity) over the last third of each grid
    must stay below ``max_slope``.
    """
    ds, dl = default_t_grid()
    ts = np.sort(np.asarray(ds if t_small is None else t_small, dtype=float))[::-1]
    tl = np.sort(np.asarray(dl if t_large is None else t_large, dtype=float))
    N, mu = kern.N, kern.mu
    Gs = np.abs(np.asarray(kern(ts)))
    Gl = np.abs(np.asarray(kern(tl)))
    sing = np.maximum(ts ** (2.0 - N), np.abs(np.log(ts)))
    ratio_s = Gs / sing
    ratio_l = Gl * np.exp((0.5 * (N - 1) + mu) * tl)
    scale_s = 1.0 / ts if N > 2 else np.maximum(np.abs(np.log(ts)), 1.0)
    slope_s = _trend(ratio_s, scale_s)
    slope_l = _trend(ratio_l, tl)
    finite = bool(np.all(np.isfinite(ratio_s)) and np.all(np.isfinite(ratio_l)))
    ok = finite and slope_s <= max_slope and slope_l <= max_slope
    i_s, i_l = int(np.argmax(ratio_s)), int(np.argmax(ratio_l))
    # the pass criterion is on the trend, so report the steeper end
    worst = max(slope_s, slope_l)
    loc = float(ts[-1]) if slope_s >= slope_l else float(tl[-1])
    details = {"N": N, "lambda": kern.lam, "mu": mu,
               "sup_small": float(ratio_s[i_s]), "sup_large": float(ratio_l[i_l]),
               "slope_small": slope_s, "slope_large": slope_l,
               "limit_small": float(ratio_s[-1]), "limit_large": float(ratio_l[-1])}
    return BoundReport("Green kernel asymptotics", ok, loc, float(worst), max_slope, details)
