import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import qmc

from accsc.model_problems import (
    DomainError,
    anisotropy_weights_ex2,
    ex2_phi,
    ex2_zeta,
    ex51_problem,
    ex52_problem,
    eval_coeff_ex1,
    eval_coeff_ex2,
    make_problem,
)

SQ3 = math.sqrt(3.0)


def test_ex1_at_origin_parameter():
    assert eval_coeff_ex1(0.5, np.zeros(4)) == pytest.approx(2.0, abs=1e-15)


def test_ex1_first_mode_and_symmetric_mode():
    expected = 1.0 + math.exp(math.exp(-1.0 / 8.0))
    assert eval_coeff_ex1(0.0, [1, 0, 0, 0]) == pytest.approx(expected, rel=1e-14)
    assert eval_coeff_ex1(0.25, [0, 0, 0, 1]) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(3.4169, abs=1e-4)


@pytest.mark.parametrize("x, y", [(1.5, np.zeros(4)), (0.5, [2, 0, 0, 0]), (-0.1, np.zeros(4))])
def test_ex1_rejects_out_of_domain(x, y):
    with pytest.raises(DomainError):
        eval_coeff_ex1(x, y)


def test_ex2_mean_field():
    val = eval_coeff_ex2(np.array([0.3, 0.7]), np.zeros(5), 1 / 64)
    assert val == pytest.approx(0.5 + math.e, rel=1e-15)


def test_ex2_zeta_two():
    # R_c = 1/2 gives R_p = 1 and R = 1/2
    expected = math.sqrt(math.sqrt(math.pi) * 0.5) * math.exp(-((math.pi / 2) ** 2) / 8)
    assert ex2_zeta(2, 0.5) == pytest.approx(expected, rel=1e-14)
    assert ex2_zeta(2, 0.5) == pytest.approx(0.6916, abs=1e-4)


def test_ex2_mode_shapes():
    assert ex2_phi(2, 1.0, 0.5) == pytest.approx(0.0, abs=1e-15)
    assert ex2_phi(3, 1.0, 0.5) == pytest.approx(-1.0, abs=1e-15)


def test_ex2_needs_a_parameter():
    with pytest.raises(DomainError):
        eval_coeff_ex2(np.array([0.5, 0.5]), np.zeros(0), 1 / 64)


def test_anisotropy_weights():
    a = anisotropy_weights_ex2()
    assert len(a) == 11
    assert a[0] == 0.85 and a[10] == 3.7
    assert min(a) == 0.8


def test_ellipticity_on_a_million_quasi_random_pairs():
    ys = qmc.Sobol(4, seed=1).random(1024)[:1000] * 2 - 1
    xs = qmc.Sobol(1, seed=2).random(1024)[:1000, 0]
    lo = min(float(eval_coeff_ex1(xs, y).min()) for y in ys)
    assert lo > 1.0

    ys = (qmc.Sobol(7, seed=3).random(1024)[:1000] * 2 - 1) * SQ3
    X = qmc.Sobol(2, seed=4).random(1024)[:1000]
    lo = min(float(eval_coeff_ex2(X, y, 1 / 64).min()) for y in ys)
    assert lo > 0.5


@given(st.floats(0, 1), st.lists(st.floats(-1, 1), min_size=4, max_size=4))
def test_ex1_is_pure(x, y):
    a, b = eval_coeff_ex1(x, y), eval_coeff_ex1(x, y)
    assert np.array_equal(a, b) and a > 1.0


@given(st.floats(0, 1), st.floats(0, 1), st.lists(st.floats(-SQ3, SQ3), min_size=1, max_size=11))
def test_ex2_is_pure_and_elliptic(x1, x2, y):
    x = np.array([x1, x2])
    a = eval_coeff_ex2(x, y, 0.5)
    assert np.array_equal(a, eval_coeff_ex2(x, y, 0.5)) and a > 0.5


@pytest.mark.parametrize("R_c", [1 / 64, 1 / 2, 2.0])
def test_zeta_decays_per_frequency(R_c):
    z = [ex2_zeta(n, R_c) for n in range(2, 30)]
    assert all(z[i + 2] < z[i] for i in range(len(z) - 2))


def test_problem_factories():
    assert ex51_problem().n_params == 4
    assert ex52_problem(7).n_params == 7
    for name in ("ex51", "ex52", "ex53_power5", "ex53_u_du", "constant1d", "constant2d"):
        assert make_problem(name).name
    with pytest.raises(ValueError):
        make_problem("nope")


def test_reference_cube_maps_to_physical_box():
    p = ex52_problem(3)
    assert np.allclose(p.physical([1.0, -1.0, 0.0]), [SQ3, -SQ3, 0.0])
