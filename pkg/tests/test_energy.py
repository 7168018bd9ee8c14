import csv
import math

import numpy as np
import pytest

from hyperhelm.energy import (Z_prime, check_growth_bound, check_two_sided_bounds,
                              energy_trace, fit_decay_exponent, gronwall_sandwich,
                              psi_expanded)
from hyperhelm.errors import MismatchedProblem, NotAsymptotic
from hyperhelm.model import CoefficientProfile, ExpProfile, RadialGeometry
from hyperhelm.odesolver import solve_radial_ivp


@pytest.fixture(scope="module")
def decaying(h3):
    c = CoefficientProfile(V=ExpProfile(2.0, 1.0), Gamma=ExpProfile(1.0, 1.0), p=3)
    sol = solve_radial_ivp(h3, c, 1.0, 30.0, 1e-11)
    return sol, c, energy_trace(sol, h3, c)


def test_constant_coefficients_Z_nonincreasing(h3):
    c = CoefficientProfile(V=5.0, Gamma=1.0, p=3)
    sol = solve_radial_ivp(h3, c, 1.0, 20.0)
    tr = energy_trace(sol, h3, c)
    assert np.all(tr.m == 0)
    assert np.all(np.diff(tr.Z) <= 1e-10)
    assert all(check_growth_bound(tr, c, h3))


def test_Z_prime_matches_finite_difference(decaying, h3):
    sol, c, tr = decaying
    dZ = Z_prime(tr, h3, c)
    fd = np.gradient(tr.Z, tr.grid, edge_order=2)
    sel = (tr.grid > 0.5) & (tr.grid < 29.5)
    assert np.max(np.abs(dZ[sel] - fd[sel])) < 1e-4 * np.max(np.abs(tr.Z))


def test_growth_bound_with_decaying_coefficients(decaying, h3):
    _, c, tr = decaying
    pointwise, integrated = check_growth_bound(tr, c, h3)
    assert pointwise.passed and integrated.passed
    assert pointwise.to_dict()["check"] == "Z' <= m Z"


def test_psi_forms_agree(decaying, h3):
    _, c, tr = decaying
    sel = tr.grid > 0
    r = tr.grid[sel]
    alt = psi_expanded(tr.u[sel], tr.du[sel], tr.f[sel], h3.ell(r), c.V(r) - 1.0, c.Gamma(r), 3)
    np.testing.assert_allclose(alt, tr.psi[sel], rtol=1e-9, atol=1e-300)


def test_two_sided_bounds(decaying):
    _, _, tr = decaying
    b = check_two_sided_bounds(tr)
    assert 0 < b["c_star"] <= b["C_star"] < 10 * b["c_star"]


def test_two_sided_needs_nontrivial(h3):
    c = CoefficientProfile(V=2.0)
    tr = energy_trace(solve_radial_ivp(h3, c, 0.0, 10.0), h3, c)
    with pytest.raises(NotAsymptotic):
        check_two_sided_bounds(tr)


def test_mismatched_problem(decaying, h3):
    sol, _, _ = decaying
    with pytest.raises(MismatchedProblem):
        energy_trace(sol, h3, CoefficientProfile(V=3.0))


@pytest.mark.parametrize("N", [2, 3, 5])
def test_decay_exponent(N):
    geom = RadialGeometry.hyperbolic(N)
    c = CoefficientProfile.helmholtz(geom, 2.0)
    sol = solve_radial_ivp(geom, c, 1.0, 30.0)
    assert fit_decay_exponent(sol) == pytest.approx((N - 1) / 2, rel=1e-2)


def test_euclidean_power_decay():
    geom = RadialGeometry.euclidean(3)
    sol = solve_radial_ivp(geom, CoefficientProfile(V=1.0), 1.0, 200.0)
    assert fit_decay_exponent(sol, scale="log") == pytest.approx(1.0, abs=0.02)
    assert fit_decay_exponent(sol) == pytest.approx(0.0, abs=0.01)


def test_gronwall_sandwich(decaying, h3):
    _, c, tr = decaying
    s = gronwall_sandwich(tr, h3, c)
    assert np.all(s["lower"] <= s["ratio"] * (1 + 1e-9))
    assert np.all(s["ratio"] <= s["upper"] * (1 + 1e-9))


def test_csv_header(decaying, tmp_path):
    _, _, tr = decaying
    p = tmp_path / "e.csv"
    tr.to_csv(p)
    with open(p) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["r", "u", "du", "Z", "psi", "c", "f", "ratio"]
    assert len(rows) == len(tr.grid) + 1
