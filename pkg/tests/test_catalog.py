import math

import numpy as np
import pytest

from psilab.catalog import (NONTRIVIAL, a4_pair, catalog, catalog_names, default_params,
                            fitting_ell0, plateau, scaled_phase_grid, smooth_step, time_cutoff)
from psilab.errors import ConfigError
from psilab.geometry import geometry_fields
from psilab.grid import TimeGrid, gamma_seminorms


@pytest.fixture(scope="module")
def tg():
    return TimeGrid(0.25, 9)


def test_names_and_defaults():
    assert catalog_names() == ["zero", *NONTRIVIAL]
    assert default_params("zero") == {}
    assert default_params("shifted_sum")["slope"] == 0.3
    with pytest.raises(ConfigError):
        default_params("nope")


def test_cutoffs():
    u = np.linspace(-1, 2, 301)
    s = smooth_step(u)
    assert np.all(np.diff(s) >= 0) and s[0] == 0 and s[-1] == 1
    assert plateau(0.3, 0.5, 1.0) == 1 and plateau(1.2, 0.5, 1.0) == 0
    np.testing.assert_array_equal(time_cutoff(np.array([-0.5, 0.0, 0.5])), 1.0)


def test_zero_family(tg):
    q = catalog("zero", None, scaled_phase_grid(4.0), tg)
    assert q.psi_validated and not q.values.any()
    assert not geometry_fields(q).delta0.any()
    with pytest.raises(ConfigError):
        catalog("zero", {"ell0": 2.0}, scaled_phase_grid(4.0), tg)


@pytest.mark.parametrize("name", NONTRIVIAL)
def test_families_satisfy_sign_rule(name, tg):
    q = catalog(name, None, scaled_phase_grid(16.0), tg)
    assert q.psi_validated and q.name == name


def test_shifted_sum_changes_sign_in_t_and_x(tg):
    q = catalog("shifted_sum", None, scaled_phase_grid(16.0), tg).values
    tol = 1e-9 * 16
    assert (q > tol).any() and (q < -tol).any()
    # sign change along t at a fixed point and along X at a fixed time
    col = q[:, 32, 32]
    assert col.min() < -tol < tol < col.max()
    row = q[4]
    assert row.min() < -tol < tol < row.max()


def test_shifted_sum_parameter_guard(tg):
    with pytest.raises(ConfigError):
        catalog("shifted_sum", {"slope": 0.4, "offset": 0.2}, scaled_phase_grid(4.0), tg)
    with pytest.raises(ConfigError):
        catalog("product_monotone", {"bogus": 1.0}, scaled_phase_grid(4.0), tg)


def test_seminorms_independent_of_lambda(tg):
    # the semiclassical scaling keeps gamma_k fixed across Lambda
    gam = [gamma_seminorms(catalog("product_monotone", None, scaled_phase_grid(L), tg)).gamma
           for L in (4.0, 64.0)]
    np.testing.assert_allclose(gam[0][:3], gam[1][:3], rtol=0.05)


def test_a4_pair(tg):
    a0, b1 = a4_pair(None, scaled_phase_grid(4.0), tg)
    assert np.all(a0.values == 1)
    assert np.all(np.diff(b1.values, axis=0) >= 0)


def test_grid_helpers():
    g = scaled_phase_grid(16.0, N=32, ell0=2.0)
    assert g.L_x == g.L_xi == 1.5 * 2.0 * 4.0 and g.Lambda == 16.0
    assert fitting_ell0(10.0, 4.0) == pytest.approx(10.0 / (1.25 * 2.0))
    assert math.isclose(fitting_ell0(5.0, 64.0) * 1.25 * 8, 5.0)
