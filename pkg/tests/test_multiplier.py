import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from psilab.catalog import catalog, scaled_phase_grid
from psilab.errors import GridError
from psilab.geometry import geometry_fields
from psilab.grid import TimeGrid
from psilab.multiplier import (build_multiplier, certify_with_halving, check_thm_245,
                               closed_form_zero, eta_integral, quasi_convexity_defect,
                               rho1_bruteforce, rho1_separable, smoothed_fields,
                               theta_bruteforce, theta_running_max)
from psilab.suites import SMOOTHED_C_MAX

LAM = 16.0


def fields_for(name, Lam=LAM, M=33, T=0.25):
    return geometry_fields(catalog(name, None, scaled_phase_grid(Lam), TimeGrid(T, M)))


@pytest.fixture(scope="module")
def zero():
    g = fields_for("zero", M=17)
    return g, build_multiplier(g)


@pytest.fixture(scope="module")
def product():
    g = fields_for("product_monotone")
    return g, build_multiplier(g)


def test_rho1_trivial_cases():
    om = np.full((6, 2), 1.5)
    np.testing.assert_array_equal(rho1_separable(om, np.zeros((6, 2))), 3.0)
    np.testing.assert_array_equal(rho1_separable(om, np.full((6, 2), 0.7)), 3.0)
    sig = np.cumsum(np.random.default_rng(0).random(8))
    th = theta_running_max(sig, np.zeros(8), 0.1, 0.35)
    np.testing.assert_allclose(th, 0.0, atol=1e-15)


fields = arrays(np.float64, (9, 3), elements=st.floats(-5, 5, allow_nan=False))


@given(fields, fields, st.floats(0.01, 0.5), st.floats(0.05, 1.0))
@settings(max_examples=100, deadline=None)
def test_recurrences_match_bruteforce_exactly(a, b, dt, T):
    omega = np.abs(a) + 0.1
    sigma = np.sort(b, axis=0)
    rho = rho1_separable(omega, sigma)
    assert np.array_equal(rho, rho1_bruteforce(omega, sigma))
    assert np.array_equal(theta_running_max(sigma, rho, dt, T), theta_bruteforce(sigma, rho, dt, T))


def test_zero_closed_form(zero):
    geom, mf = zero
    rho, theta, m = closed_form_zero(mf.T, mf.time.M)
    np.testing.assert_allclose(mf.rho1, rho[:, None, None] * np.ones_like(mf.rho1), atol=1e-14)
    np.testing.assert_allclose(mf.theta[:, 0, 0], theta, atol=1e-14)
    np.testing.assert_allclose(mf.m[:, 3, 5], m, atol=1e-14)
    np.testing.assert_allclose(mf.eta, 2 * mf.T)


def test_zero_margins_are_closed_form(zero):
    geom, mf = zero
    ents = check_thm_245(mf, geom)
    assert all(e.passed for e in ents)
    # (a)-(c) are tight; (d) has margin 1 - 1/(2^{3/2} sqrt(Lambda)) with C0 = 1
    for e in ents[:3]:
        assert e.margin == pytest.approx(0.0, abs=1e-11)
    assert ents[3].margin == pytest.approx(1 - 1 / (2 ** 1.5 * math.sqrt(LAM)), abs=1e-11)
    assert ents[0].witness["C0"] == 1.0


def test_product_family_passes(product):
    geom, mf = product
    ents = check_thm_245(mf, geom)
    assert [e.name for e in ents] == ["multiplier_a", "multiplier_b", "multiplier_c", "multiplier_d"]
    assert all(e.passed for e in ents), [(e.name, e.margin, e.witness) for e in ents]


def test_corrupted_theta_fails_a(product):
    geom, mf = product
    bad = dataclasses.replace(mf, theta=3 * mf.theta)
    ea = check_thm_245(bad, geom, C0=1.0)[0]
    assert not ea.passed and ea.witness["deficit"] > 0
    k, i, j = ea.witness["node"]
    assert abs(bad.theta[k, i, j]) > bad.rho1[k, i, j]


def test_eta_split_rule_keeps_product_inequality(product):
    geom, mf = product
    d0, dt, T = geom.delta0, mf.time.dt, mf.T
    eta = eta_integral(d0, dt, T, LAM, "split")
    step = (d0[1:] * eta[1:] - d0[:-1] * eta[:-1]) / dt
    need = np.minimum(d0[1:] ** 2, d0[:-1] ** 2) / math.sqrt(LAM)
    assert np.all(step >= need - 1e-12)
    assert np.all(eta >= 0) and np.all(eta <= 4 * T)
    with pytest.raises(ValueError):
        eta_integral(d0, dt, T, LAM, "simpson")


def test_halving_reaches_a_passing_window():
    def fam(T):
        return catalog("shifted_sum", None, scaled_phase_grid(LAM), TimeGrid(T, 17))
    T, mf, geom, ents = certify_with_halving(fam, T0=0.25)
    assert T <= 0.25 and ents[3].passed


def test_quasi_convexity_zero(zero):
    _, mf = zero
    assert quasi_convexity_defect(mf.rho1[:, :2, :2], mf.sigma1[:, :2, :2]) == pytest.approx(-2)


def test_smoothed_zero_and_gradient(zero):
    geom, mf = zero
    _, consts, entry = smoothed_fields(mf, geom)
    assert entry.passed and consts["delta0"] == 0 and consts["conv"] == 0
    g = fields_for("gradient_model", M=17)
    _, consts, entry = smoothed_fields(build_multiplier(g), g, C_max=SMOOTHED_C_MAX)
    assert entry.passed, consts


def test_build_multiplier_window(product):
    geom, _ = product
    mf = build_multiplier(geom, T=0.125)
    assert mf.time.M == 17 and mf.T == 0.125
    with pytest.raises(GridError):
        build_multiplier(geom, T=0.5)
