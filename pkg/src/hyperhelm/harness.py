"""Experiment orchestration: dispatch, CSV artifacts and the JSON report.

Every run writes ``report.json`` to the output directory, also when the
configuration is invalid or a solver raises.  Exit codes: 0 all checks
pass, 1 some check failed, 2 error (bad config, hypothesis violation,
solver failure).
"""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import energy, greens, nonlinear, normscan, odesolver, resolvent
from .config import ExperimentConfig, parse_config, parse_profile
from .errors import ConfigError, HyperHelmError, MissingArtifact, TooFewZeros
from .model import ConstantProfile, CoefficientProfile, check_hypotheses
from .reports import dumps

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2

# kinds whose operator is the Helmholtz operator fixed by lambda
_HELMHOLTZ_KINDS = ("green", "resolvent", "smallsol", "dualvar", "strichartz")


class HypothesisViolation(HyperHelmError):
    pass


def check(name, passed, value, tolerance, location=None) -> dict:
    return {"name": name, "pass": bool(passed), "value": value, "tolerance": tolerance,
            "location": location}


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if not isinstance(x, str) else x for x in row])


class _Run:
    """Mutable state of one run: checks, results and artifact paths."""

    def __init__(self, cfg: ExperimentConfig, out_dir: str, jobs: int = 1):
        self.cfg = cfg
        self.out = out_dir
        self.jobs = max(1, int(jobs))
        self.checks: list[dict] = []
        self.results: dict = {}
        self.artifacts: dict = {}

    def path(self, name):
        p = os.path.join(self.out, name)
        self.artifacts[os.path.splitext(name)[0]] = p
        return p

    def add(self, *items):
        self.checks.extend(items)

    def add_bound(self, rep):
        self.add(check(rep.check, rep.passed, rep.worst_value, rep.tolerance, rep.worst_location))


# ------------------------------------------------------------------ gating


def _helmholtz_coeffs(cfg, geom, p=None):
    lam = cfg.get("lambda")
    if lam is None:
        raise ConfigError("lambda is required for this experiment", field="lambda")
    Gamma = parse_profile(cfg.get("Gamma"), cfg.base_dir, "Gamma")
    return CoefficientProfile(V=ConstantProfile(geom.kappa ** 2 / 4 + lam ** 2), Gamma=Gamma,
                              p=cfg.get("p") if p is None else p, lam=lam)


def hypothesis_gate(cfg: ExperimentConfig):
    """Run the hypothesis checker; H2 or H3 failures abort the run.

    H1 failures are recorded but do not abort, so flat-space comparison
    runs remain possible.
    """
    geom = cfg.geometry()
    coeffs = _helmholtz_coeffs(cfg, geom) if cfg.kind in _HELMHOLTZ_KINDS else cfg.coefficients()
    rep = check_hypotheses(geom, coeffs, r_max=max(float(cfg.get("r_max")), 10.0))
    summary = {"H1_ok": rep.H1_ok, "H2_ok": rep.H2_ok, "H3_ok": rep.H3_ok,
               "margin": rep.margin, "messages": rep.messages()}
    fatal = [m for m in rep.messages() if not m.startswith("H1")]
    return geom, coeffs, summary, fatal


# ------------------------------------------------------------------ kinds


def _solve(run: _Run, geom, coeffs):
    cfg = run.cfg
    r_max, h = cfg.get("r_max"), cfg.get("h")
    sol = odesolver.solve_radial_ivp(geom, coeffs, cfg.get("gamma"), r_max, cfg.get("tol"))
    grid = np.linspace(0.0, r_max, int(round(r_max / h)) + 1)
    u, du = sol(grid)
    _write_rows(run.path("solution.csv"), ["r", "u", "du"], zip(grid, u, du))
    return sol


def _spacing_check(run, sol, geom, coeffs):
    target = odesolver.asymptotic_spacing(geom, coeffs)
    tol = run.cfg.get("spacing_tol")
    try:
        got = odesolver.zero_spacing_limit(sol)
    except TooFewZeros as exc:
        run.add(check("zero spacing", False, None, tol))
        run.results["zero_spacing_note"] = str(exc)
        return
    run.add(check("zero spacing", abs(got - target) <= tol, abs(got - target), tol,
                  float(sol.zeros[-1])))
    run.results.update(zero_spacing=got, zero_spacing_limit=target)


def run_solve(run: _Run, geom, coeffs):
    sol = _solve(run, geom, coeffs)
    res = odesolver.ode_residuals(sol)
    tol = run.cfg.get("check_tol")
    run.add(check("ode residual", float(np.max(res)) <= tol, float(np.max(res)), tol))
    _spacing_check(run, sol, geom, coeffs)
    run.results.update(nfev=sol.nfev, nsteps=sol.nsteps, zero_count=len(sol.zeros))
    # closed form on H^3 with constant V and no nonlinearity
    if (geom.label() == "hyperbolic(3,)" and coeffs.gamma_zero
            and isinstance(coeffs.V, ConstantProfile) and coeffs.V_inf > 1):
        k = math.sqrt(coeffs.V_inf - 1)
        r = np.linspace(0.0, sol.r_max, 2001)
        exact = sol.gamma * np.where(r > 0, np.sin(k * r) / (k * np.sinh(np.maximum(r, 1e-300))), 1.0)
        err = np.abs(sol.u_at(r) - exact)
        i = int(np.argmax(err))
        run.add(check("closed form", err[i] <= 1e2 * sol.tol, float(err[i]), 1e2 * sol.tol,
                      float(r[i])))


def run_zeros(run: _Run, geom, coeffs):
    sol = _solve(run, geom, coeffs)
    z = sol.zeros
    spacing = np.diff(z, prepend=np.nan)
    _write_rows(run.path("zeros.csv"), ["index", "r", "spacing"],
                zip(range(1, len(z) + 1), z, spacing))
    _spacing_check(run, sol, geom, coeffs)
    if len(z) >= 10:
        # zero count n(R) against R on the tail half: slope 1/spacing
        tail = z[len(z) // 2:]
        slope = float(np.polyfit(tail, np.arange(len(z) // 2, len(z)) + 1, 1)[0])
        target = 1.0 / odesolver.asymptotic_spacing(geom, coeffs)
        rel = abs(slope - target) / target
        run.add(check("linear zero count", rel <= 0.01, rel, 0.01))
        run.results["count_slope"] = slope
    run.results["zero_count"] = len(z)


def run_energy(run: _Run, geom, coeffs):
    cfg = run.cfg
    sol = odesolver.solve_radial_ivp(geom, coeffs, cfg.get("gamma"), cfg.get("r_max"), cfg.get("tol"))
    trace = energy.energy_trace(sol, geom, coeffs, h=cfg.get("h"))
    trace.to_csv(run.path("energy.csv"))
    for rep in energy.check_growth_bound(trace, coeffs, geom, tol=cfg.get("check_tol")):
        run.add_bound(rep)
    try:
        run.results["two_sided"] = energy.check_two_sided_bounds(trace)
    except HyperHelmError as exc:
        run.results["two_sided"] = {"note": str(exc)}
    if geom.kappa > 0 and sol.gamma != 0:
        tol = cfg.get("decay_tol")
        try:
            sigma = energy.fit_decay_exponent(sol)
        except TooFewZeros as exc:
            run.add(check("envelope decay rate", False, None, tol))
            run.results["decay_rate_note"] = str(exc)
            return
        target = 0.5 * geom.kappa
        rel = abs(sigma - target) / target
        run.add(check("envelope decay rate", rel <= tol, rel, tol))
        run.results["decay_rate"] = sigma


def _t_grid(cfg):
    t_max, n = cfg.get("t_max"), cfg.get("t_count")
    return np.linspace(t_max / n, t_max, n)


def run_green(run: _Run, geom, coeffs):
    cfg = run.cfg
    if not geom.label().startswith("hyperbolic"):
        raise ConfigError("green needs geometry = hyperbolic", field="geometry")
    N, lam, mu = geom.dim, cfg.get("lambda"), cfg.get("mu")
    t = _t_grid(cfg)
    if N % 2 == 0 and mu == 0:
        tol = cfg.get("richardson_tol")
        est = [greens.green_limit_estimate(N, lam, x, tol=0.1 * tol, part="complex") for x in t]
        G = np.array([e[0] for e in est])
        err = np.array([e[1] / max(abs(e[0]), 1e-300) for e in est])
        i = int(np.argmax(err))
        run.add(check("Richardson stability", err[i] <= tol, float(err[i]), tol, float(t[i])))
    else:
        kern = greens.build_kernel(N, lam, mu)
        G = np.atleast_1d(kern(t))
        run.add_bound(greens.certify_asymptotics(kern))
        if N == 3:
            exact = np.exp(complex(-mu, lam) * t) / (4 * math.pi * np.sinh(t))
            e = float(np.max(np.abs(G - exact)))
            run.add(check("closed form", e <= 1e-10, e, 1e-10))
    _write_rows(run.path("green.csv"), ["t", "ReG", "ImG"], zip(t, G.real, G.imag))
    run.results.update(N=N, normConst=greens.norm_constant(N))


def run_resolvent(run: _Run, geom, coeffs):
    cfg = run.cfg
    lam = cfg.get("lambda")
    pair = resolvent.homogeneous_pair(geom, lam, cfg.get("r_max"), cfg.get("tol"),
                                      doubling_tol=cfg.get("doubling_tol"))
    g = resolvent.bump(cfg.get("bump_center"), cfg.get("bump_width"))
    fld = resolvent.apply_resolvent(pair, g)
    fld.to_csv(run.path("resolvent.csv"))
    run.add(check("Abel drift", pair.abel_drift <= cfg.get("abel_tol"), pair.abel_drift,
                  cfg.get("abel_tol")))
    run.add(check("Helmholtz residual", fld.meta["residual"] <= cfg.get("residual_tol"),
                  fld.meta["residual"], cfg.get("residual_tol")))
    run.add(check("doubling r_max", pair.doubling_change <= cfg.get("doubling_tol"),
                  pair.doubling_change, cfg.get("doubling_tol")))
    run.results.update(W=[pair.W.real, pair.W.imag], r_min=pair.r_min)
    if geom.label().startswith("hyperbolic"):
        lo, hi = g.support
        r0 = np.array([x for x in (0.5, 1.0, 2.0, 4.0, 8.0) if x < 0.5 * pair.r_max])
        conv = resolvent.convolve_kernel(geom.dim, lam, g, r0, (lo, hi))
        err = np.abs(conv - fld(r0).real) / np.max(np.abs(fld.re))
        i = int(np.argmax(err))
        run.add(check("kernel convolution (real part)", err[i] <= cfg.get("conv_tol"), float(err[i]),
                      cfg.get("conv_tol"), float(r0[i])))


def run_smallsol(run: _Run, geom, coeffs):
    cfg = run.cfg
    lam, p, eps = cfg.get("lambda"), cfg.get("p"), cfg.get("eps")
    pair = resolvent.homogeneous_pair(geom, lam, cfg.get("r_max"), 1e-11)
    ratios = []
    for e in (eps, eps / 10):
        fld, hist = nonlinear.small_solution(geom, lam, coeffs.Gamma, p, e, pair=pair,
                                             max_iter=cfg.get("max_iter"))
        ratios.append(fld.meta["w_distance"] / e ** 2)
        if e == eps:
            fld.to_csv(run.path("smallsol.csv"))
            run.results["history"] = hist.to_dict()
            tol = cfg.get("check_tol")
            run.add(check("NLH residual", hist.residual <= tol, hist.residual, tol))
            run.add(check("cutoff inactive", fld.meta["sup"] <= 0.5, fld.meta["sup"], 0.5))
    factor = max(ratios) / min(ratios) if min(ratios) > 0 else math.inf
    run.add(check("quadratic correction ratio", factor <= cfg.get("ratio_tol"), factor,
                  cfg.get("ratio_tol")))
    run.results["correction_ratios"] = ratios


def run_dualvar(run: _Run, geom, coeffs):
    cfg = run.cfg
    pair = resolvent.homogeneous_pair(geom, cfg.get("lambda"), cfg.get("r_max"), 1e-11)
    st = nonlinear.critical_point_search(coeffs.Gamma, cfg.get("p"), pair, tol=cfg.get("dual_tol"),
                                         seed=cfg.get("seed"), p_max=cfg.get("p_max"))
    x = pair.panels.nodes
    _write_rows(run.path("dualvar.csv"), ["r", "v", "u"], zip(x, st.v, st.u.re))
    run.add(check("dual residual", st.relative_residual <= cfg.get("dual_tol"),
                  st.relative_residual, cfg.get("dual_tol")))
    run.add(check("NLH residual", st.nlh_residual <= cfg.get("nlh_tol"), st.nlh_residual,
                  cfg.get("nlh_tol")))
    run.add(check("ray maximum positive", st.ray["J_star"] > 0, st.ray["J_star"], 0.0))
    run.results["state"] = st.to_dict()


def run_strichartz(run: _Run, geom, coeffs):
    cfg = run.cfg
    rep = normscan.classify_strichartz_threshold(geom, cfg.get("lambda"), cfg.get("exponents"),
                                                 R_cap=cfg.get("R_cap"))
    for e, prof in rep["profiles"].items():
        prof.to_csv(run.path(f"norm_r{e:g}.csv"))
    thr = rep["threshold"]
    run.add(check("threshold bracketed", rep["bracketed"], thr, None))
    run.add(check("threshold at 2", thr is not None and abs(thr - 2.0) < 1e-12, thr, 0.0))
    out = {k: v for k, v in rep.items() if k != "profiles"}
    out["tail_change_30_40"] = {
        str(e): float(abs(p.norms[3] - p.norms[2]) / p.norms[3])
        for e, p in rep["profiles"].items() if len(p.norms) >= 4 and p.R_list[3] == 40.0}
    run.results.update(out)


def sweep_point(values: dict, base_dir: str, gamma: float, p: float) -> dict:
    """One (gamma, p) point of a sweep; top level so worker processes can run it."""
    cfg = ExperimentConfig("sweep", dict(values), base_dir)
    geom = cfg.geometry()
    coeffs = cfg.coefficients(p)
    sol = odesolver.solve_radial_ivp(geom, coeffs, gamma, cfg.get("r_max"), cfg.get("tol"))
    trace = energy.energy_trace(sol, geom, coeffs, h=cfg.get("h"))
    try:
        b = energy.check_two_sided_bounds(trace)
    except HyperHelmError as exc:
        return {"gamma": gamma, "p": p, "error": str(exc)}
    return {"gamma": gamma, "p": p, **b, "K_gamma": trace.K_gamma}


def run_sweep(run: _Run, geom, coeffs):
    cfg = run.cfg
    points = [(float(g), float(p)) for g in cfg.get("gammas") for p in cfg.get("ps")]
    for _, p in points:
        if p <= 2:
            raise ConfigError("sweep exponents must exceed 2", field="ps")
    args = [(cfg.values, cfg.base_dir, g, p) for g, p in points]
    if run.jobs > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=run.jobs) as ex:
            rows = list(ex.map(sweep_point, *zip(*args)))
    else:
        rows = [sweep_point(*a) for a in args]
    rows.sort(key=lambda d: (d["gamma"], d["p"]))
    good = [r for r in rows if "error" not in r]
    _write_rows(run.path("sweep.csv"), ["gamma", "p", "c_star", "C_star", "onset"],
                [(r["gamma"], r["p"], r["c_star"], r["C_star"], r["onset"]) for r in good])
    run.results["points"] = rows
    bad = [r for r in rows if "error" in r]
    run.add(check("all sweep points asymptotic", not bad, len(bad), 0))
    if good:
        lo = min(good, key=lambda r: r["c_star"])
        hi = max(good, key=lambda r: r["C_star"])
        ratio = hi["C_star"] / lo["c_star"]
        run.add(check("C*/c* across sweep", ratio <= cfg.get("ratio_bound"), ratio,
                      cfg.get("ratio_bound"), None))
        run.results.update(c_star=lo["c_star"], C_star=hi["C_star"],
                           c_star_at=[lo["gamma"], lo["p"]], C_star_at=[hi["gamma"], hi["p"]])


DISPATCH = {
    "solve": run_solve, "zeros": run_zeros, "energy": run_energy, "green": run_green,
    "resolvent": run_resolvent, "smallsol": run_smallsol, "dualvar": run_dualvar,
    "strichartz": run_strichartz, "sweep": run_sweep,
}


# ------------------------------------------------------------------ entry points


def _finish(report, out_dir, t0):
    report["wall_clock"] = time.perf_counter() - t0
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "report.json")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(report) + "\n")
    return report


def error_report(message, out_dir, kind=None, config_text="", t0=None, **extra):
    """Report for a run that never got past configuration."""
    t0 = time.perf_counter() if t0 is None else t0
    report = {"experiment_id": None, "kind": kind, "config": {"text": config_text}, "checks": [],
              "results": {}, "artifacts": {}, "status": "error", "exit_code": EXIT_ERROR,
              "error": message, **extra}
    return _finish(report, out_dir, t0)


def run(config: ExperimentConfig, out_dir: str, seed: int | None = None, jobs: int = 1):
    """Execute one experiment; returns ``(report, exit_code)``.

    ``seed`` overrides the config's seed.  ``report.json`` and every CSV
    artifact are written to ``out_dir``.
    """
    t0 = time.perf_counter()
    if seed is not None:
        config.values["seed"] = int(seed)
    os.makedirs(out_dir, exist_ok=True)
    state = _Run(config, out_dir, jobs)
    report = {"experiment_id": config.experiment_id, "kind": config.kind,
              "config": config.echo(), "error": None}
    code = EXIT_OK
    try:
        geom, coeffs, hyp, fatal = hypothesis_gate(config)
        report["hypotheses"] = hyp
        if fatal:
            raise HypothesisViolation("; ".join(fatal))
        DISPATCH[config.kind](state, geom, coeffs)
        if not all(c["pass"] for c in state.checks):
            code = EXIT_FAIL
    except (HyperHelmError, ValueError, ArithmeticError) as exc:
        report["error"] = f"{type(exc).__name__}: {exc}"
        code = EXIT_ERROR
    report.update(checks=state.checks, results=state.results, artifacts=state.artifacts,
                  exit_code=code, status={0: "pass", 1: "fail", 2: "error"}[code])
    return _finish(report, out_dir, t0), code


def run_text(text: str, out_dir: str, kind: str | None = None, seed=None, jobs: int = 1,
             base_dir: str = "."):
    """Parse ``text`` and run it; config errors still produce a report."""
    t0 = time.perf_counter()
    try:
        cfg = parse_config(text, kind, base_dir)
    except ConfigError as exc:
        rep = error_report(f"ConfigError: {exc}", out_dir, kind, text, t0,
                           error_line=exc.line, error_field=exc.field)
        return rep, EXIT_ERROR
    return run(cfg, out_dir, seed, jobs)


def _series_columns(series):
    cols = [c.strip() for c in (series.split(",") if isinstance(series, str) else series)]
    if len(cols) < 2 or not all(cols):
        raise ValueError("a series needs at least two column names")
    return cols


def emit_plot_data(report: dict, series, out_path: str, artifact: str | None = None) -> str:
    """Copy the selected columns of a report artifact into a new CSV.

    ``series`` is a list (or comma string) of column names, e.g.
    ``("r", "u")``.  The first artifact whose header holds every column is
    used unless ``artifact`` names one.  Values are copied verbatim.
    """
    cols = _series_columns(series)
    arts = report.get("artifacts") or {}
    names = [artifact] if artifact else sorted(arts)
    if artifact and artifact not in arts:
        raise MissingArtifact(f"report has no artifact {artifact!r}")
    for name in names:
        path = arts[name]
        if not os.path.exists(path):
            raise MissingArtifact(f"artifact {name!r} is missing on disk: {path}")
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header = rows[0]
        if all(c in header for c in cols):
            idx = [header.index(c) for c in cols]
            with open(out_path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(cols)
                for row in rows[1:]:
                    w.writerow([row[i] for i in idx])
            return out_path
    raise MissingArtifact(f"no artifact in the report has columns {', '.join(cols)}")
