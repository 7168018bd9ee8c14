import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hyperhelm.errors import BlowUp, InvalidHypothesis, TooFewZeros
from hyperhelm.model import CoefficientProfile, RadialGeometry
from hyperhelm.odesolver import (asymptotic_spacing, find_zeros, ode_residuals,
                                 solve_radial_ivp, zero_spacing_limit)


def oracle_h3(r, lam):
    return np.where(r > 0, np.sin(lam * r) / (lam * np.sinh(np.maximum(r, 1e-300))), 1.0)


@pytest.mark.parametrize("lam", [0.5, 1.0, 3.0])
def test_h3_closed_form(h3, lam):
    sol = solve_radial_ivp(h3, CoefficientProfile(V=lam ** 2 + 1), 1.0, 20.0, 1e-10)
    r = np.linspace(0, 20, 4001)
    assert np.max(np.abs(sol.u_at(r) - oracle_h3(r, lam))) <= 1e-9


def test_euclidean_closed_form():
    # u = sin(r)/r in R^3 with V = 1
    sol = solve_radial_ivp(RadialGeometry.euclidean(3), CoefficientProfile(V=1.0), 1.0, 30.0)
    r = np.linspace(0.01, 30, 500)
    np.testing.assert_allclose(sol.u_at(r), np.sin(r) / r, atol=1e-9)
    z = sol.zeros
    np.testing.assert_allclose(z, math.pi * np.arange(1, len(z) + 1), atol=1e-9)


@given(st.floats(0.1, 5.0))
@settings(max_examples=10, deadline=None)
def test_linear_scaling(gamma):
    geom = RadialGeometry.hyperbolic(2)
    c = CoefficientProfile(V=2.0)
    a = solve_radial_ivp(geom, c, 1.0, 10.0)
    b = solve_radial_ivp(geom, c, gamma, 10.0)
    r = np.linspace(0, 10, 50)
    np.testing.assert_allclose(b.u_at(r), gamma * a.u_at(r), atol=1e-8 * gamma)


def test_dense_output_and_derivative(h3):
    sol = solve_radial_ivp(h3, CoefficientProfile(V=5.0, Gamma=1.0, p=3), 0.7, 15.0)
    r = np.linspace(0.5, 14.5, 30)
    h = 1e-5
    fd = (sol.u_at(r + h) - sol.u_at(r - h)) / (2 * h)
    np.testing.assert_allclose(sol(r)[1], fd, atol=1e-7)
    with pytest.raises(ValueError):
        sol(16.0)
    u, du = sol(0.0)
    assert u == 0.7 and du == 0.0


def test_residuals_small(h3):
    sol = solve_radial_ivp(h3, CoefficientProfile(V=3.0, Gamma=1.0, p=4), 2.0, 25.0)
    assert np.max(ode_residuals(sol)) < 1e-8


def test_trivial_solution(h3):
    sol = solve_radial_ivp(h3, CoefficientProfile(V=2.0), 0.0, 10.0)
    assert sol.u_at(5.0) == 0.0 and len(sol.zeros) == 0


def test_invalid_inputs(h3):
    with pytest.raises(InvalidHypothesis):
        solve_radial_ivp(h3, CoefficientProfile(V=-1.0), 1.0, 10.0)
    with pytest.raises(ValueError):
        solve_radial_ivp(h3, CoefficientProfile(V=2.0), 1.0, math.inf)
    with pytest.raises(ValueError):
        solve_radial_ivp(h3, CoefficientProfile(V=2.0), 1.0, 10.0, tol=1e-1)


def test_blow_up_with_defocusing_sign():
    geom = RadialGeometry.euclidean(3)
    with pytest.raises(BlowUp):
        solve_radial_ivp(geom, CoefficientProfile(V=1.0, Gamma=-1.0, p=3), 10.0, 10.0)


def test_zero_spacing_limits():
    for geom in (RadialGeometry.hyperbolic(2), RadialGeometry.damek_ricci(2, 1)):
        c = CoefficientProfile(V=geom.kappa ** 2 / 4 + 4.0, Gamma=1.0)
        sol = solve_radial_ivp(geom, c, 1.0, 40.0)
        assert zero_spacing_limit(sol) == pytest.approx(asymptotic_spacing(geom, c), abs=1e-6)


def test_too_few_zeros(h3):
    sol = solve_radial_ivp(h3, CoefficientProfile(V=1.5), 1.0, 5.0)
    with pytest.raises(TooFewZeros):
        zero_spacing_limit(sol)


def test_find_zeros_are_roots(h3):
    sol = solve_radial_ivp(h3, CoefficientProfile(V=5.0, Gamma=1.0), 1.0, 20.0)
    z = find_zeros(sol)
    assert len(z) > 5
    assert np.max(np.abs(sol.u_at(z))) < 1e-12
