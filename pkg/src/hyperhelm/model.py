"""Manifold models, coefficient profiles and the hypothesis checker.

A rotationally symmetric model is described by its volume density ``f(r)``;
the radial Laplace-Beltrami operator is ``d^2/dr^2 + (f'/f) d/dr``.  All
quantities the solvers need are the log-derivative ``ell = f'/f``, its
derivative ``dell``, the limit ``kappa`` of ``ell`` and the strength ``d0``
of the origin singularity (``r * ell(r) -> d0``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator
from scipy.special import gamma as gamma_fn

from .errors import NonFiniteInput, OriginSingular

ArrayLike = "float | np.ndarray"


def _as_radius(r):
    arr = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"radius must be finite, got {r!r}")
    if np.any(arr < 0):
        raise ValueError(f"radius must be nonnegative, got {r!r}")
    return arr


def _out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def sphere_area(dim: int) -> float:
    """Surface area of the unit sphere S^{dim-1} in R^dim."""
    return 2.0 * math.pi ** (dim / 2.0) / gamma_fn(dim / 2.0)


def _log_sinh(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        small = np.log(np.sinh(np.minimum(x, 20.0)))
    large = x - math.log(2.0) + np.log1p(-np.exp(-2.0 * np.maximum(x, 20.0)))
    return np.where(x < 20.0, small, large)


def _log_cosh(x):
    x = np.abs(np.asarray(x, dtype=float))
    return x - math.log(2.0) + np.log1p(np.exp(-2.0 * x))


@dataclass(frozen=True)
class RadialGeometry:
    """Volume density of a rotationally symmetric model.

    Use the constructors :meth:`hyperbolic`, :meth:`euclidean`,
    :meth:`damek_ricci` or :meth:`custom` rather than the raw initializer.
    """

    kind: str
    params: tuple
    kappa: float
    d0: float
    dim: int
    _f: Callable = field(repr=False, compare=False, default=None)
    _log_f: Callable = field(repr=False, compare=False, default=None)
    _ell: Callable = field(repr=False, compare=False, default=None)
    _dell: Callable = field(repr=False, compare=False, default=None)
    _custom_id: int = field(repr=False, default=0)

    @classmethod
    def hyperbolic(cls, N: int) -> "RadialGeometry":
        N = int(N)
        if N < 2:
            raise ValueError("hyperbolic space needs N >= 2")
        k = N - 1
        return cls(
            kind="hyperbolic", params=(N,), kappa=float(k), d0=float(k), dim=N,
            _f=lambda r: np.sinh(r) ** k,
            _log_f=lambda r: k * _log_sinh(r),
            _ell=lambda r: k / np.tanh(r),
            _dell=lambda r: -k / np.sinh(r) ** 2,
        )

    @classmethod
    def euclidean(cls, N: int) -> "RadialGeometry":
        N = int(N)
        if N < 2:
            raise ValueError("euclidean space needs N >= 2")
        k = N - 1
        with np.errstate(divide="ignore"):
            return cls(
                kind="euclidean", params=(N,), kappa=0.0, d0=float(k), dim=N,
                _f=lambda r: np.asarray(r, dtype=float) ** k,
                _log_f=lambda r: k * np.log(r),
                _ell=lambda r: k / np.asarray(r, dtype=float),
                _dell=lambda r: -k / np.asarray(r, dtype=float) ** 2,
            )

    @classmethod
    def damek_ricci(cls, m: int, k: int) -> "RadialGeometry":
        """Density sinh^{m+k}(r/2) cosh^k(r/2) of a Damek-Ricci space."""
        m, k = int(m), int(k)
        if m < 1 or k < 1:
            raise ValueError("Damek-Ricci space needs m, k >= 1")
        a = m + k
        return cls(
            kind="damek_ricci", params=(m, k), kappa=(m + 2 * k) / 2.0,
            d0=float(a), dim=m + k + 1,
            _f=lambda r: np.sinh(r / 2) ** a * np.cosh(r / 2) ** k,
            _log_f=lambda r: a * _log_sinh(r / 2) + k * _log_cosh(r / 2),
            _ell=lambda r: 0.5 * a / np.tanh(r / 2) + 0.5 * k * np.tanh(r / 2),
            _dell=lambda r: -0.25 * a / np.sinh(r / 2) ** 2
            + 0.25 * k / np.cosh(r / 2) ** 2,
        )

    @classmethod
    def custom(cls, f, ell, dell, kappa: float, d0: float, dim: int = 2,
               log_f=None) -> "RadialGeometry":
        """User-supplied density.  ``dell`` must be given explicitly."""
        if kappa < 0 or d0 < 0:
            raise ValueError("kappa and d0 must be nonnegative")
        if log_f is None:
            def log_f(r, _f=f):
                with np.errstate(divide="ignore"):
                    return np.log(_f(r))
        return cls(kind="custom", params=(), kappa=float(kappa), d0=float(d0),
                   dim=int(dim), _f=f, _log_f=log_f, _ell=ell, _dell=dell,
                   _custom_id=id(f))

    # -- evaluation -------------------------------------------------------

    def f(self, r):
        arr = _as_radius(r)
        return _out(np.asarray(self._f(arr), dtype=float), r)

    def log_f(self, r):
        arr = _as_radius(r)
        with np.errstate(divide="ignore"):
            return _out(np.asarray(self._log_f(arr), dtype=float), r)

    def ell(self, r):
        arr = _as_radius(r)
        if self.d0 > 0 and np.any(arr == 0):
            raise OriginSingular("f'/f is singular at r = 0 for this model")
        return _out(np.asarray(self._ell(arr), dtype=float), r)

    def dell(self, r):
        arr = _as_radius(r)
        if self.d0 > 0 and np.any(arr == 0):
            raise OriginSingular("(log f)'' is singular at r = 0 for this model")
        return _out(np.asarray(self._dell(arr), dtype=float), r)

    @property
    def sphere_area(self) -> float:
        return sphere_area(self.dim)

    def label(self) -> str:
        if self.kind == "custom":
            return "custom"
        return f"{self.kind}{self.params}"


def volume_density(geom: RadialGeometry, r):
    return geom.f(r)


def log_derivative(geom: RadialGeometry, r):
    return geom.ell(r)


def kappa(geom: RadialGeometry) -> float:
    return geom.kappa


# -- coefficient profiles ---------------------------------------------------


class Profile:
    """A scalar radial profile with derivative and limit at infinity."""

    limit: float = 0.0

    def __call__(self, r):
        raise NotImplementedError

    def derivative(self, r):
        raise NotImplementedError

    @property
    def is_zero(self) -> bool:
        return False


@dataclass(frozen=True)
class ConstantProfile(Profile):
    value: float

    def __call__(self, r):
        return np.full_like(np.asarray(r, dtype=float), self.value) \
            if np.ndim(r) else float(self.value)

    def derivative(self, r):
        return np.zeros_like(np.asarray(r, dtype=float)) if np.ndim(r) else 0.0

    @property
    def limit(self):
        return float(self.value)

    @property
    def is_zero(self):
        return self.value == 0.0


@dataclass(frozen=True)
class ExpProfile(Profile):
    """``inf + amp * exp(-rate * r)``."""

    inf: float
    amp: float
    rate: float = 1.0

    def __call__(self, r):
        return self.inf + self.amp * np.exp(-self.rate * np.asarray(r, dtype=float)) \
            if np.ndim(r) else self.inf + self.amp * math.exp(-self.rate * r)

    def derivative(self, r):
        val = -self.rate * self.amp * np.exp(-self.rate * np.asarray(r, dtype=float))
        return val if np.ndim(r) else float(val)

    @property
    def limit(self):
        return float(self.inf)


class TableProfile(Profile):
    """Tabulated profile with monotone cubic (PCHIP) interpolation.

    Beyond the last knot the profile is continued by its last value.
    """

    def __init__(self, r, values):
        r = np.asarray(r, dtype=float)
        values = np.asarray(values, dtype=float)
        if r.ndim != 1 or r.shape != values.shape or r.size < 2:
            raise ValueError("table needs matching 1-D r and value columns")
        if np.any(np.diff(r) <= 0):
            raise ValueError("table radii must be strictly increasing")
        self.r = r
        self.values = values
        self._interp = PchipInterpolator(r, values, extrapolate=True)
        self._deriv = self._interp.derivative()

    @classmethod
    def from_csv(cls, path):
        import csv

        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader)]
            if header != ["r", "value"]:
                raise ValueError(f"{path}: expected header 'r,value', got {header}")
            rows = [(float(a), float(b)) for a, b in reader]
        r, v = zip(*rows)
        return cls(r, v)

    def __call__(self, r):
        x = np.asarray(r, dtype=float)
        out = np.where(x > self.r[-1], self.values[-1], self._interp(np.minimum(x, self.r[-1])))
        return out if np.ndim(r) else float(out)

    def derivative(self, r):
        x = np.asarray(r, dtype=float)
        out = np.where(x > self.r[-1], 0.0, self._deriv(np.minimum(x, self.r[-1])))
        return out if np.ndim(r) else float(out)

    @property
    def limit(self):
        return float(self.values[-1])

    @property
    def is_zero(self):
        return bool(np.all(self.values == 0.0))


class CallableProfile(Profile):
    def __init__(self, fn, dfn, limit):
        self._fn = fn
        self._dfn = dfn
        self._limit = float(limit)

    def __call__(self, r):
        return self._fn(r)

    def derivative(self, r):
        return self._dfn(r)

    @property
    def limit(self):
        return self._limit


def as_profile(x) -> Profile:
    if isinstance(x, Profile):
        return x
    return ConstantProfile(float(x))


@dataclass(frozen=True)
class CoefficientProfile:
    """Data ``(V, Gamma, p, lam)`` of the radial problem

    ``-u'' - ell u' - V u = Gamma |u|^{p-2} u``.

    ``lam`` is set when ``V = kappa^2/4 + lam^2`` encodes a Helmholtz problem.
    """

    V: Profile
    Gamma: Profile = ConstantProfile(0.0)
    p: float = 3.0
    lam: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "V", as_profile(self.V))
        object.__setattr__(self, "Gamma", as_profile(self.Gamma))
        if not self.p > 2:
            raise ValueError(f"p must exceed 2, got {self.p}")

    @classmethod
    def helmholtz(cls, geom: RadialGeometry, lam: float, Gamma=0.0, p: float = 3.0):
        if not lam > 0:
            raise ValueError("lambda must be positive")
        return cls(V=ConstantProfile(geom.kappa ** 2 / 4 + lam ** 2),
                   Gamma=Gamma, p=p, lam=float(lam))

    @property
    def p_dual(self) -> float:
        return self.p / (self.p - 1)

    @property
    def V_inf(self) -> float:
        return self.V.limit

    @property
    def Gamma_inf(self) -> float:
        return self.Gamma.limit

    @property
    def gamma_zero(self) -> bool:
        return self.Gamma.is_zero

    def nonlinearity(self, r, u):
        """``Gamma(r) |u|^{p-2} u`` evaluated as ``sign(u)|u|^{p-1}``."""
        if self.gamma_zero:
            return np.zeros_like(u) if np.ndim(u) else 0.0
        return self.Gamma(r) * np.sign(u) * np.abs(u) ** (self.p - 1)


@dataclass
class HypothesisReport:
    H1_ok: bool
    H2_ok: bool
    H3_ok: bool
    f_monotone: bool
    ell_tail_error: float
    dell_tail: float
    ell_sq_tail_integral: float
    V_positive: bool
    V_tail_error: float
    V_prime_tail_integral: float
    margin: float
    Gamma_nonnegative: bool
    Gamma_tail_error: float
    Gamma_log_tail_integral: float | None
    r_max: float
    tol: float

    @property
    def all_ok(self) -> bool:
        return self.H1_ok and self.H2_ok and self.H3_ok

    def messages(self) -> list[str]:
        out = []
        if not self.H1_ok:
            out.append(f"H1 violated: |ell - kappa| = {self.ell_tail_error:.3g}, "
                       f"tail integral of |ell^2 - kappa^2| = {self.ell_sq_tail_integral:.3g}")
        if not self.H2_ok:
            out.append(f"H2 violated: V_inf - kappa^2/4 = {self.margin:.6g}, "
                       f"V positive = {self.V_positive}")
        if not self.H3_ok:
            out.append("H3 violated: Gamma must be >= 0 with |Gamma'|/Gamma integrable")
        return out


def _tail_quad(fn, a, b):
    val, _ = integrate.quad(fn, a, b, limit=200)
    return float(val)


def check_hypotheses(geom: RadialGeometry, coeffs: CoefficientProfile,
                     r_max: float = 50.0, tol: float = 1e-6) -> HypothesisReport:
    """Numerical evidence for (H1)-(H3) over the window ``(0, r_max]``.

    Nothing is raised; each condition is reported with the measured
    quantities so callers can decide how to act on a failure.
    """
    if r_max < 10:
        raise ValueError("r_max must be at least 10")
    probe = np.linspace(r_max / 2000, r_max, 2000)
    a = r_max / 2

    kap = geom.kappa
    logf = geom.log_f(probe)
    f_monotone = bool(np.all(np.diff(logf) >= -1e-12))
    ell_err = abs(geom.ell(r_max) - kap)
    dell_tail = abs(geom.dell(r_max))
    ell_sq = _tail_quad(lambda s: abs(geom.ell(s) ** 2 - kap ** 2), a, r_max)
    H1 = f_monotone and ell_err <= tol and dell_tail <= tol and ell_sq <= tol

    V = coeffs.V
    Vvals = np.asarray(V(np.concatenate([[0.0], probe])), dtype=float)
    V_pos = bool(np.all(Vvals > 0))
    V_err = abs(V(r_max) - V.limit)
    V_prime = _tail_quad(lambda s: abs(V.derivative(s)), a, r_max)
    margin = V.limit - kap ** 2 / 4
    H2 = V_pos and margin > 0 and V_err <= tol and V_prime <= tol

    G = coeffs.Gamma
    Gvals = np.asarray(G(np.concatenate([[0.0], probe])), dtype=float)
    G_nonneg = bool(np.all(Gvals >= 0))
    G_err = abs(G(r_max) - G.limit)
    if coeffs.gamma_zero:
        G_log = None
        H3 = True
    else:
        positive = bool(np.all(Gvals > 0))
        G_log = _tail_quad(lambda s: abs(G.derivative(s)) / G(s), a, r_max) if positive else math.inf
        H3 = G_nonneg and positive and G_err <= tol and G_log <= tol

    return HypothesisReport(
        H1_ok=bool(H1), H2_ok=bool(H2), H3_ok=bool(H3), f_monotone=f_monotone,
        ell_tail_error=float(ell_err), dell_tail=float(dell_tail),
        ell_sq_tail_integral=ell_sq, V_positive=V_pos, V_tail_error=float(V_err),
        V_prime_tail_integral=V_prime, margin=float(margin),
        Gamma_nonnegative=G_nonneg, Gamma_tail_error=float(G_err),
        Gamma_log_tail_integral=G_log, r_max=float(r_max), tol=float(tol),
    )
