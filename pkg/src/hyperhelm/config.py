"""Plain-text experiment configuration.

One ``key = value`` per line; ``#`` starts a comment.  Lists are comma
separated.  Coefficient profiles are written ``const:5.0``,
``exp:inf,amp[,rate]`` (``inf + amp e^{-rate r}``) or ``table:path`` (CSV
with header ``r,value``, relative to the config file).  A bare number means
``const``.  Every key and its default is listed in :data:`KEYS`.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, field

from .errors import ConfigError
from .model import (CoefficientProfile, ConstantProfile, ExpProfile, RadialGeometry,
                    TableProfile)

KINDS = ("solve", "energy", "zeros", "green", "resolvent", "smallsol", "dualvar",
         "strichartz", "sweep")

# key: (type, default, unit / meaning)
KEYS = {
    "kind": (str, None, "experiment kind; must match the subcommand when both are given"),
    "geometry": (str, "hyperbolic", "hyperbolic, euclidean or damek_ricci"),
    "dim": (int, 3, "dimension N (hyperbolic, euclidean)"),
    "m": (int, 2, "Damek-Ricci m"),
    "k": (int, 1, "Damek-Ricci k"),
    "lambda": (float, None, "spectral parameter; sets V = kappa^2/4 + lambda^2 when V is absent"),
    "V": (str, None, "potential profile"),
    "Gamma": (str, "const:0", "nonlinearity coefficient profile"),
    "p": (float, 3.0, "nonlinearity exponent"),
    "gamma": (float, 1.0, "initial value u(0)"),
    "r_max": (float, 30.0, "radial truncation (length units of the model)"),
    "tol": (float, 1e-10, "integrator tolerance (relative)"),
    "h": (float, 0.01, "output grid spacing"),
    "check_tol": (float, 1e-8, "tolerance for residual checks"),
    "spacing_tol": (float, 1e-3, "tolerance for the zero-spacing check"),
    "decay_tol": (float, 0.01, "relative tolerance on the fitted envelope decay rate"),
    "abel_tol": (float, 1e-8, "relative drift allowed in f times the Wronskian"),
    "residual_tol": (float, 1e-7, "Helmholtz residual tolerance of the resolvent"),
    "doubling_tol": (float, 1e-7, "interior change allowed when r_max is doubled"),
    "conv_tol": (float, 1e-5, "kernel-convolution agreement tolerance"),
    "richardson_tol": (float, 1e-6, "relative stability of the mu -> 0 extrapolation"),
    "mu": (float, 0.0, "absorption parameter of the Green kernel"),
    "t_max": (float, 15.0, "largest t in kernel tables"),
    "t_count": (int, 200, "number of t samples in kernel tables"),
    "bump_center": (float, 1.5, "resolvent source centre"),
    "bump_width": (float, 0.5, "resolvent source half width"),
    "eps": (float, 1e-3, "small-solution amplitude"),
    "max_iter": (int, 30, "Picard iteration cap"),
    "ratio_tol": (float, 2.0, "allowed factor between ||u - w||/eps^2 at eps and eps/10"),
    "dual_tol": (float, 1e-4, "relative dual residual target"),
    "nlh_tol": (float, 1e-3, "NLH residual tolerance for the recovered solution"),
    "p_max": (float, None, "upper exponent for the dual search (default 2N/(N-2))"),
    "exponents": (list, [2.0, 2.1, 2.5, 3.0, 4.0], "Lebesgue exponents for the norm scan"),
    "R_cap": (float, 400.0, "largest ball radius in the norm scan"),
    "gammas": (list, [1e-3, 1e-2, 0.1, 1.0, 10.0], "sweep initial values"),
    "ps": (list, [2.5, 3.0, 4.0], "sweep exponents"),
    "ratio_bound": (float, 100.0, "sweep bound on C*/c*"),
    "seed": (int, 0, "seed for every randomized choice"),
}


def parse_profile(text: str, base_dir: str = ".", field_name: str = "profile"):
    text = text.strip()
    try:
        if ":" not in text:
            return ConstantProfile(float(text))
        tag, arg = text.split(":", 1)
        tag = tag.strip().lower()
        if tag == "const":
            return ConstantProfile(float(arg))
        if tag == "exp":
            vals = [float(x) for x in arg.split(",")]
            if len(vals) not in (2, 3):
                raise ValueError("exp needs inf,amp[,rate]")
            return ExpProfile(*vals)
        if tag == "table":
            path = arg.strip()
            if not os.path.isabs(path):
                path = os.path.join(base_dir, path)
            return TableProfile.from_csv(path)
        raise ValueError(f"unknown profile tag {tag!r}")
    except (ValueError, OSError) as exc:
        raise ConfigError(f"bad {field_name} profile {text!r}: {exc}", field=field_name) from exc


def _convert(key, raw, line):
    typ = KEYS[key][0]
    try:
        if typ is list:
            return [float(x) for x in raw.split(",") if x.strip()]
        if typ is int:
            return int(raw)
        if typ is float:
            val = float(raw)
            if math.isnan(val):
                raise ValueError("NaN")
            return val
        return raw
    except ValueError as exc:
        raise ConfigError(f"line {line}: {key} = {raw!r} is not a valid {typ.__name__}",
                          line=line, field=key) from exc


@dataclass
class ExperimentConfig:
    kind: str
    values: dict = field(default_factory=dict)
    base_dir: str = "."
    text: str = ""

    def get(self, key):
        if key in self.values:
            return self.values[key]
        return KEYS[key][1]

    def geometry(self) -> RadialGeometry:
        kind = self.get("geometry").lower()
        if kind == "hyperbolic":
            return RadialGeometry.hyperbolic(self.get("dim"))
        if kind == "euclidean":
            return RadialGeometry.euclidean(self.get("dim"))
        if kind in ("damek_ricci", "damekricci", "dr"):
            return RadialGeometry.damek_ricci(self.get("m"), self.get("k"))
        raise ConfigError(f"unknown geometry {kind!r}", field="geometry")

    def coefficients(self, p=None) -> CoefficientProfile:
        geom = self.geometry()
        lam = self.get("lambda")
        Gamma = parse_profile(self.get("Gamma"), self.base_dir, "Gamma")
        p = self.get("p") if p is None else p
        if self.get("V") is not None:
            V = parse_profile(self.get("V"), self.base_dir, "V")
            return CoefficientProfile(V=V, Gamma=Gamma, p=p, lam=lam)
        if lam is None:
            raise ConfigError("either V or lambda must be given", field="V")
        return CoefficientProfile(V=ConstantProfile(geom.kappa ** 2 / 4 + lam ** 2),
                                  Gamma=Gamma, p=p, lam=lam)

    def echo(self) -> dict:
        out = {k: self.get(k) for k in KEYS if k in self.values}
        out["kind"] = self.kind
        return out

    @property
    def experiment_id(self) -> str:
        canon = ";".join(f"{k}={self.values[k]!r}" for k in sorted(self.values))
        return f"{self.kind}-" + hashlib.sha1(canon.encode()).hexdigest()[:10]


def parse_config(text: str, kind: str | None = None, base_dir: str = ".") -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'", line=lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}", line=lineno, field=key)
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}", line=lineno, field=key)
        if val == "":
            raise ConfigError(f"line {lineno}: empty value for {key!r}", line=lineno, field=key)
        values[key] = _convert(key, val, lineno)
    cfg_kind = values.get("kind")
    if kind and cfg_kind and kind != cfg_kind:
        raise ConfigError(f"config kind {cfg_kind!r} does not match subcommand {kind!r}", field="kind")
    kind = kind or cfg_kind
    if kind not in KINDS:
        raise ConfigError(f"experiment kind must be one of {', '.join(KINDS)}", field="kind")
    values["kind"] = kind
    return ExperimentConfig(kind=kind, values=values, base_dir=base_dir, text=text)


def load_config(path: str, kind: str | None = None) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, kind, os.path.dirname(os.path.abspath(path)))
