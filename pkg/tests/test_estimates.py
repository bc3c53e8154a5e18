import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from accsc import estimates as est
from accsc.driver import RunConfig, interpolation_cost, run_experiment
from accsc.sparse_grid import count_points

P = est.EstimateParams


def test_mesh_size_examples():
    assert est.h_of_eps(P(C_fem=1, s=1), 0.3) == pytest.approx(0.1)
    p = P(s=2)
    assert est.h_of_eps(p, 0.3 / 4) == pytest.approx(est.h_of_eps(p, 0.3) / 2)


def test_max_level_example():
    p = P(N=2, C_sc=1, r=1)
    assert 2 / math.log(2) * math.log(math.log(1e9) / 2) == pytest.approx(2.885 * math.log(10.36), rel=1e-3)
    assert est.Lmax_of_eps(p, 3e-9) == 7


def test_max_level_domain_error():
    with pytest.raises(est.EstimateDomainError):
        est.Lmax_of_eps(P(C_sc=1), 3.0)
    with pytest.raises(est.EstimateDomainError):
        est.h_of_eps(P(), 0.0)


def test_tau_examples():
    assert est.tau_of_eps(P(beta=1, N=1), 0.3, 2) == pytest.approx(0.00625)
    assert est.tau_of_eps(P(beta=4, N=1), 0.3, 2) == pytest.approx(2 * 0.00625)
    taus = [est.tau_of_eps(P(N=N), 0.3, L) for N in (1, 2, 3) for L in (1, 2, 3)]
    grid = np.array(taus).reshape(3, 3)
    assert np.all(np.diff(grid, axis=0) < 0) and np.all(np.diff(grid, axis=1) < 0)


def test_lebesgue_bound_examples():
    assert [est.lebesgue_bound(0, 1), est.lebesgue_bound(1, 1), est.lebesgue_bound(2, 2)] == [2, 6, 144]


def test_k_bounds_examples():
    assert est.k_bounds(P(), 1e-6, 1.0, 2) == (0.0, 0.0)
    # the rate blows up as kappa -> 1+, so both bounds shrink towards zero
    seq = [est.k_bounds(P(), 1e-6, 1 + 10.0**-k, 2) for k in range(1, 15)]
    assert all(a[0] > b[0] and a[1] > b[1] for a, b in zip(seq, seq[1:]))
    assert est.k_bounds(P(alpha=1, u_h_norm=1), 2.0, 100.0, 1)[0] == 0.0
    accs = [est.k_bounds(P(C_sc=1e3), 1e-10, 1e4, L)[1] for L in range(1, 6)]
    assert all(a > b for a, b in zip(accs, accs[1:]))


def test_cg_rate_matches_formula():
    k = 400.0
    assert est.cg_rate(k) == pytest.approx(math.log(21 / 19))
    assert est.cg_iteration_bound(1.0, 1e-6, k) == math.ceil(math.log(2e6) / math.log(21 / 19))


def test_point_count_bound_n4_l3():
    b = est.point_count_bound(3, 4)
    assert b == pytest.approx(2 * math.e**3 * 2**3 * 2**3, rel=1e-12)
    assert b == pytest.approx(2570.9, abs=0.1)
    assert count_points(3, 4) == 137 <= b


@given(st.integers(1, 5), st.integers(0, 6))
def test_measured_points_below_bound(N, L):
    assume(N <= 3 or L <= 5)
    assert count_points(L, N) <= est.point_count_bound(L, N)


@given(st.integers(1, 4), st.integers(1, 5), st.integers(1, 300))
def test_measured_interpolation_cost_below_level_bound(N, W, M_h):
    counts = [count_points(w, N) for w in range(W + 1)]
    assert interpolation_cost(counts, M_h) <= est.interpolation_cost_level_bound(W, N, M_h)


def test_dimension_factor_arithmetic():
    assert 2 ** (1 / 1) - 1 == 1
    assert 2 ** (1 / 11) - 1 == pytest.approx(0.0650, abs=1e-4)


def test_constants():
    c = est._constants(P(N=2, r=0.5, alpha=4, beta=1, u_h_norm=2))
    assert c["C1"] == pytest.approx((math.e / math.log(2)) * 2.0**2)
    assert c["C2"] == pytest.approx(1.0)
    assert c["C3"] == pytest.approx(6 * 2 * 2)
    assert c["C4"] == pytest.approx(4 * math.log(4 / math.log(2)))
    assert c["C5"] == pytest.approx(c["C4"] + math.log(8))
    assert c["C8"] == pytest.approx(64 * math.e**2)


@pytest.mark.parametrize("N", [1, 2, 4, 11])
def test_total_bounds_monotone_in_eps(N):
    p = P(N=N, r=0.05, C_sc=10.0, kappa=1e4)
    eps = np.geomspace(1e-2, 1e-14, 25)
    rows = np.array([est.K_bounds(p, e, M_h=255) for e in eps])
    assert np.all(np.diff(rows, axis=0) >= -1e-9 * np.abs(rows[:-1]))


def test_acceleration_factor_shrinks_with_dimension():
    # as eps -> 0 the ratio K_acc / K_zero tends to 2 (2^{1/N} - 1)
    ratios = []
    for N in (2, 4, 8):
        p = P(N=N, r=0.01, C_sc=1.0, kappa=1e4)
        b = [est.K_bounds(p, eps, M_h=100) for eps in (1e-100, 1e-300)]
        limit = 2 * (2 ** (1 / N) - 1)
        assert abs(b[1].K_acc / b[1].K_zero - limit) < abs(b[0].K_acc / b[0].K_zero - limit)
        ratios.append(b[1].K_acc / b[1].K_zero)
    assert ratios[0] > ratios[1] > ratios[2]


def test_total_bounds_domain_error():
    with pytest.raises(est.EstimateDomainError):
        est.K_bounds(P(N=2, r=1.0, C_sc=1.0), 1.0)


def test_params_validation_and_mapping():
    with pytest.raises(ValueError):
        P(r=0.0)
    p = P.from_mapping({"N": "3", "r": "0.5", "kappa": "none", "other": "x"})
    assert p.N == 3 and p.r == 0.5 and p.kappa is None


def test_fitters_recover_synthetic_constants():
    w = np.arange(6)
    errs = 3.0 * np.exp(-0.4 * 2 * 2.0 ** (w / 2))
    C, r = est.fit_sc_constants(w, errs, 2)
    assert C == pytest.approx(3.0) and r == pytest.approx(0.4)
    h = 1 / 2.0 ** np.arange(3, 8)
    C, s = est.fit_fem_constants(h, 0.7 * h**2)
    assert C == pytest.approx(0.7) and s == pytest.approx(2.0)
    with pytest.raises(ValueError):
        est.fit_fem_constants([0.1], [0.2])


@pytest.fixture(scope="module")
def diag_report():
    cfg = RunConfig(problem="ex51", mesh_n=64, W=2, tau=1e-6, mode="zero", diagnostics=True)
    return run_experiment(cfg).to_dict()


def test_check_report_passes_for_a_real_run(diag_report):
    rows = est.check_report(diag_report, [(1, 1, 2.0)])
    assert est.all_hold(rows)
    assert sum(r["check"].startswith("k_") for r in rows) == len(diag_report["points"])


def test_check_report_detects_tampering(diag_report):
    bad = dict(diag_report, points=[dict(p, iterations=100 * p["iterations"]) for p in diag_report["points"]])
    assert not est.all_hold(est.check_report(bad))


def test_check_report_needs_measurements(diag_report):
    stripped = dict(diag_report, points=[{k: v for k, v in p.items() if k != "kappa"} for p in diag_report["points"]])
    with pytest.raises(KeyError):
        est.check_report(stripped)
