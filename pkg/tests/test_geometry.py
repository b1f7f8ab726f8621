import math

import numpy as np
import pytest

from psilab.catalog import NONTRIVIAL, catalog, scaled_phase_grid
from psilab.errors import HypothesisError
from psilab.geometry import (E_GRAD, E_NEGL, beals_fefferman_factor, check_delta0_monotone,
                             check_gradient_points, check_inclusion_chain, check_lipschitz,
                             check_weight_order, classify_points, fit_C0, geometry_fields,
                             lipschitz_constant, partition_of_unity, sign_partition,
                             truncated_distance)
from psilab.grid import PhaseGrid, SymbolFamily, TimeGrid, check_slow_variation, validate_psi

LAM = 16.0


@pytest.fixture(scope="module")
def grid():
    return PhaseGrid(64, 64, 8.0, 8.0, LAM)


def family(grid, fn, M=5):
    f = SymbolFamily.from_function(TimeGrid(0.25, M), grid, fn)
    assert validate_psi(f).passed
    return f


def test_sign_partition_needs_validation(grid):
    f = SymbolFamily.from_function(TimeGrid(0.25, 3), grid, lambda t, x, xi: x)
    with pytest.raises(HypothesisError):
        sign_partition(f)


def test_sign_partition_examples(grid):
    X = grid.mesh()[0]
    reg = sign_partition(family(grid, lambda t, x, xi: x))
    tol = reg.tol
    for k in range(5):
        assert np.array_equal(reg.Xplus[k], X > tol)
        assert np.array_equal(reg.Xminus[k], X < -tol)
    flip = sign_partition(family(grid, lambda t, x, xi: t + 0 * x))
    assert not flip.plus[:2].any() and flip.plus[3:].all()
    assert flip.minus[:2].all() and not flip.minus[3:].any()
    assert flip.zero[2].all()


def test_truncated_distance(grid):
    X = grid.mesh()[0]
    assert not truncated_distance(np.ones(grid.shape, bool), grid, 3.0).any()
    np.testing.assert_array_equal(truncated_distance(np.zeros(grid.shape, bool), grid, 3.0), 3.0)
    d = truncated_distance(X <= 0, grid, 5.0)
    assert np.max(np.abs(d - np.minimum(np.maximum(X, 0), 5.0))) <= grid.dx
    with pytest.raises(ValueError):
        truncated_distance(X <= 0, grid, 0.0)


def test_delta0_linear_symbol(grid):
    X = grid.mesh()[0]
    f = geometry_fields(family(grid, lambda t, x, xi: x))
    expect = np.sign(X) * np.minimum(np.abs(X), math.sqrt(LAM))
    assert np.max(np.abs(f.delta0 - expect)) <= grid.dx


def test_zero_symbol_fields(grid):
    f = geometry_fields(family(grid, lambda t, x, xi: 0 * x))
    assert not f.delta0.any()
    np.testing.assert_array_equal(f.mu, 1.0)
    np.testing.assert_array_equal(f.nu, 1.0)
    cl = classify_points(f)
    assert cl.count(E_NEGL) == f.delta0.size and f.nu.max() <= 2


def test_gradient_symbol_weights(grid):
    s = math.sqrt(LAM)
    f = geometry_fields(family(grid, lambda t, x, xi: s * x))
    inner = (slice(None), slice(2, -2), slice(2, -2))
    np.testing.assert_allclose(f.mu[inner], (1 + f.delta0 ** 2 + LAM)[inner], rtol=1e-9)
    labels = classify_points(f).labels
    i0 = int(np.argmin(np.abs(grid.x)))
    assert (labels[:, i0, 2:-2] == E_GRAD).all()
    with pytest.raises(ValueError):
        classify_points(f, r1=0.7)


@pytest.fixture(scope="module", params=NONTRIVIAL)
def catalog_fields(request):
    q = catalog(request.param, None, scaled_phase_grid(LAM), TimeGrid(0.25, 9))
    return geometry_fields(q)


def test_catalog_structural_checks(catalog_fields):
    for check in (check_inclusion_chain, check_lipschitz, check_delta0_monotone,
                  check_weight_order):
        e = check(catalog_fields)
        assert e.passed, (e.name, e.witness)
    ratio = catalog_fields.nu / catalog_fields.mu
    assert ratio.min() > 0 and ratio.max() <= 2


def test_catalog_mu_slowly_varying(catalog_fields):
    e = check_slow_variation(catalog_fields.mu, catalog_fields.grid, 0.25, 8.0, max_points=32)
    assert e.passed, e.witness


def test_catalog_sign_masks_monotone(catalog_fields):
    reg = catalog_fields.regions
    assert not (reg.plus[:-1] & ~reg.plus[1:]).any()
    assert not (reg.minus[1:] & ~reg.minus[:-1]).any()


def test_lipschitz_constant_linear(grid):
    X, XI = grid.mesh()
    assert lipschitz_constant(3 * X, grid) == pytest.approx(3.0)
    assert lipschitz_constant(X + XI, grid) == pytest.approx(math.sqrt(2))


def test_fit_C0_zero_and_catalog(grid, catalog_fields):
    f0 = geometry_fields(family(grid, lambda t, x, xi: 0 * x))
    C0, wit = fit_C0(f0, n_samples=None, stride=4)
    # R = Lambda^{-1/2} and the right-hand side is 2: ratio 1/8 clamps to 1
    assert C0 == 1.0 and wit["max_ratio"] == pytest.approx(1 / (2 * math.sqrt(LAM)))
    C0, _ = fit_C0(catalog_fields, n_samples=2000)
    assert 1.0 <= C0 < 1e3


def test_partition_flat_weight(grid):
    part = partition_of_unity(np.ones(grid.shape), grid)
    np.testing.assert_allclose(part.chi_sum(), 1.0, atol=1e-12)
    k = len(part) // 2
    assert np.all(part.psi(k)[part.chi(k) > 0] == 1.0)


def test_partition_catalog_overlap(catalog_fields):
    part = partition_of_unity(catalog_fields.nu[4], catalog_fields.grid)
    assert part.overlap <= 20
    np.testing.assert_allclose(part.chi_sum(), 1.0, atol=1e-12)
    with pytest.raises(ValueError):
        partition_of_unity(np.zeros(catalog_fields.grid.shape), catalog_fields.grid)


def test_bf_linear():
    res = beals_fefferman_factor(lambda x: x[0], 1)
    assert res.branch == "factor" and res.passed
    assert res.t0 == pytest.approx(0, abs=1e-12)
    np.testing.assert_allclose(res.alpha, 0, atol=1e-12)
    np.testing.assert_allclose(res.e, 1, atol=1e-8)


def test_bf_quadratic_oracle():
    # x + x^2/10 = x (1 + x/10): root at 0, e = 1 + x/10
    res = beals_fefferman_factor(lambda x: x[0] + x[0] ** 2 / 10, 1)
    assert res.passed and res.t0 == pytest.approx(0, abs=1e-12)
    np.testing.assert_allclose(res.e, 1 + res.nodes / 10, atol=1e-8)


def test_bf_sine_oracle():
    # x1 + 0.1 sin(x2) = (y1 + alpha(y2)) e forces alpha = +0.1 sin(y2), e = 1
    res = beals_fefferman_factor(lambda x: x[0] + 0.1 * math.sin(x[1]), 2, align=False)
    assert res.passed
    np.testing.assert_allclose(res.alpha, 0.1 * np.sin(res.nodes), atol=1e-10)
    np.testing.assert_allclose(res.e, 1, atol=1e-8)
    assert res.bounds["alpha_lipschitz"] <= 1


def test_bf_branches_and_errors():
    far = beals_fefferman_factor(lambda x: 1.0 + 0.1 * x[0], 1)
    assert far.branch == "distance_bound" and not far.passed
    with pytest.raises(HypothesisError):
        beals_fefferman_factor(lambda x: x[0] + 2 * x[0] ** 2, 1)
    with pytest.raises(HypothesisError):
        beals_fefferman_factor(lambda x: -x[0] + 0 * x[1], 2, align=False)


def test_gradient_points_factorize():
    q = catalog("gradient_model", None, scaled_phase_grid(LAM), TimeGrid(0.25, 5))
    e = check_gradient_points(geometry_fields(q), n_points=4)
    assert e.passed and e.witness["points"] > 0, e.witness
