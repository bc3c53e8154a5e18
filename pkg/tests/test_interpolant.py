import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from accsc.estimates import lebesgue_bound
from accsc.interpolant import (
    VectorValuedInterpolant,
    cc_quadrature_weights,
    lagrange_basis_1d,
    lebesgue_estimate,
    smolyak_operator,
)
from accsc.sparse_grid import build_grid, cc_nodes, growth_m


def polynomial_space(grid):
    """Exponent vectors spanning the Smolyak space of the grid's index set."""
    exps = set()
    for l in grid.index_set():
        exps.update(itertools.product(*[range(growth_m(v)) for v in l]))
    return exps


def monomial(Y, p):
    return np.prod(np.asarray(Y, float) ** np.asarray(p), axis=-1)


@pytest.mark.parametrize("l", [2, 3, 4, 5])
def test_lagrange_1d_against_product_formula(l):
    nodes = cc_nodes(l)
    y = np.linspace(-0.97, 0.93, 11)
    got = lagrange_basis_1d(l, y)
    for j, xj in enumerate(nodes):
        others = np.delete(nodes, j)
        ref = np.prod((y[:, None] - others) / (xj - others), axis=1)
        assert np.allclose(got[:, j], ref, atol=1e-12)


@pytest.mark.parametrize("l", [1, 2, 3, 4, 5, 6])
def test_cc_weights_integrate_lagrange_basis(l):
    # oracle: Gauss-Legendre integration of each Lagrange polynomial
    x, w = np.polynomial.legendre.leggauss(40)
    ref = lagrange_basis_1d(l, x).T @ w / 2
    assert np.allclose(cc_quadrature_weights(l), ref, atol=1e-14)


def test_constant_data_is_reproduced():
    grid = build_grid(3, 3)
    v = np.array([1.5, -2.0, 7.0])
    f = VectorValuedInterpolant(grid, np.tile(v, (grid.size, 1)))
    assert np.allclose(f.evaluate([0.3, -0.2, 0.9]), v, atol=1e-12)
    assert np.allclose(f.quadrature(), v, atol=1e-12)


def test_quadratic_in_one_dimension():
    grid = build_grid(1, 1)
    f = VectorValuedInterpolant(grid, grid.points[:, 0] ** 2)
    assert f.evaluate([0.5])[0] == pytest.approx(0.25, abs=1e-15)
    assert f.quadrature()[0] == pytest.approx(1 / 3, abs=1e-15)


def test_odd_data_integrates_to_zero():
    grid = build_grid(2, 2)
    f = VectorValuedInterpolant(grid, grid.points[:, 0])
    assert abs(f.quadrature()[0]) < 1e-15


@pytest.mark.parametrize("N,W", [(1, 4), (2, 4), (3, 4)])
def test_delta_property(N, W):
    grid = build_grid(W, N)
    B = smolyak_operator(grid).basis_values(grid.points)
    assert np.max(np.abs(B - np.eye(grid.size))) < 1e-10


@pytest.mark.parametrize("N,W", [(1, 3), (2, 2), (2, 3)])
def test_polynomial_exactness_total_degree_four(N, W):
    grid = build_grid(W, N)
    space = polynomial_space(grid)
    Y = np.random.default_rng(0).uniform(-1, 1, (50, N))
    for p in space:
        if sum(p) > 4:
            continue
        f = VectorValuedInterpolant(grid, monomial(grid.points, p))
        assert np.max(np.abs(f.evaluate_many(Y)[:, 0] - monomial(Y, p))) < 1e-10


def test_monomial_outside_space_is_not_exact():
    grid = build_grid(1, 2)  # space spanned by 1, y1, y1^2, y2, y2^2
    f = VectorValuedInterpolant(grid, monomial(grid.points, (1, 1)))
    assert abs(f.evaluate([0.5, 0.5])[0] - 0.25) > 0.1


@pytest.mark.parametrize("N", [1, 2, 3])
def test_quadrature_moments(N):
    grid = build_grid(3, N)
    q = smolyak_operator(grid).quadrature_weights()
    assert q.sum() == pytest.approx(1.0, abs=1e-12)
    for n in range(N):
        assert q @ grid.points[:, n] ** 2 == pytest.approx(1 / 3, abs=1e-12)
        assert q @ grid.points[:, n] ** 4 == pytest.approx(1 / 5, abs=1e-12)


def test_lebesgue_examples():
    assert lebesgue_estimate(build_grid(0, 3), 100) == 1.0
    one = lebesgue_estimate(build_grid(1, 1), 2000)
    assert 1.0 <= one <= 6.0
    assert lebesgue_estimate(build_grid(2, 2), 4000) <= 144.0


@given(st.integers(1, 3), st.integers(0, 3), st.integers(0, 1000))
def test_lebesgue_below_bound(N, W, seed):
    assert lebesgue_estimate(build_grid(W, N), 256, seed) <= lebesgue_bound(W, N)


@given(st.integers(1, 3), st.integers(0, 3), st.integers(0, 2**31))
def test_basis_is_partition_of_unity(N, W, seed):
    grid = build_grid(W, N)
    Y = np.random.default_rng(seed).uniform(-1, 1, (8, N))
    assert np.allclose(smolyak_operator(grid).basis_values(Y).sum(axis=1), 1.0, atol=1e-12)


@given(st.integers(0, 2**31))
def test_linear_in_data(seed):
    rng = np.random.default_rng(seed)
    grid = build_grid(2, 2)
    a, b = rng.standard_normal((2, grid.size, 3))
    y = rng.uniform(-1, 1, 2)
    fa, fb = VectorValuedInterpolant(grid, a), VectorValuedInterpolant(grid, b)
    fab = VectorValuedInterpolant(grid, 2 * a - b)
    assert np.allclose(fab.evaluate(y), 2 * fa.evaluate(y) - fb.evaluate(y), atol=1e-12)


def test_errors():
    grid = build_grid(2, 2)
    with pytest.raises(ValueError):
        VectorValuedInterpolant(grid, np.zeros((grid.size - 1, 2)))
    f = VectorValuedInterpolant(grid, np.zeros((grid.size, 2)))
    with pytest.raises(ValueError):
        f.evaluate([1.5, 0.0])
    with pytest.raises(ValueError):
        f.evaluate([0.0, 0.0, 0.0])


def test_data_snapshot_is_read_only():
    grid = build_grid(1, 1)
    data = np.ones((grid.size, 2))
    f = VectorValuedInterpolant(grid, data)
    data[:] = 5
    assert np.all(f.data == 1)
    with pytest.raises(ValueError):
        f.data[0, 0] = 3
