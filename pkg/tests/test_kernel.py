import numpy as np
import pytest
from oracles import brace_ref, kernel_ref

from bleach_design.kernel import (
    KernelAccuracyError,
    brace,
    kernel_beta0,
    kernel_beta0_matrix,
    kernel_direct,
    kernel_direct_matrix,
    kernel_ode_march,
    kernel_rhs_matrix,
)


def test_brace_matches_reference():
    for q, r, rho in [(0.3, 0.5, 0.1), (0.9, 2.0, 7.0), (0.5, 0.5, 400.0), (1e-3, 3.0, 1.0)]:
        assert brace(q, r, rho) == pytest.approx(brace_ref(q, r, rho), rel=1e-13, abs=1e-300)


@pytest.mark.parametrize("r, s", [(0.5, 0.5), (0.1, 0.1), (1.0, 2.0), (0.3, 4.0), (5.0, 5.0), (0.95, 1.05)])
def test_beta0_against_adaptive_quadrature(r, s):
    assert kernel_beta0(r, s) == pytest.approx(kernel_ref(r, s, 0.0), rel=1e-9)


@pytest.mark.parametrize(
    "r, s, beta",
    [(0.3, 1.2, 1.0), (2.0, 2.0, 3.0), (0.7, 0.9, 10.0), (0.1, 0.1, 0.1), (1.0, 1.05, 19.9), (4.5, 5.0, 0.5)],
)
def test_direct_against_adaptive_quadrature(r, s, beta):
    assert kernel_direct(r, s, beta) == pytest.approx(kernel_ref(r, s, beta), rel=1e-8)


def test_beta0_large_radius_growth():
    # k(r, r; 0) grows like r^2 / 4 once the disk covers the observation region
    ratio = kernel_beta0(8.0, 8.0) / kernel_beta0(4.0, 4.0)
    assert 3.0 < ratio < 4.5


def test_symmetry_and_zero_radius():
    assert kernel_direct(0.4, 1.3, 2.0) == pytest.approx(kernel_direct(1.3, 0.4, 2.0), rel=1e-12)
    assert kernel_beta0(0.0, 1.0) == 0.0
    assert kernel_direct(0.0, 1.0, 2.0) == 0.0
    K = kernel_beta0_matrix([0.0, 0.5, 1.0])
    assert np.array_equal(K, K.T) and np.all(K[0] == 0)


def test_direct_argument_checks():
    with pytest.raises(ValueError):
        kernel_direct(1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        kernel_direct(-1.0, 1.0, 1.0)


def test_direct_accuracy_error_is_raised_when_unreachable():
    with pytest.raises(KernelAccuracyError) as info:
        kernel_direct(0.5, 3.0, 5.0, n_q=1, n_v=2, rtol=1e-14)
    assert info.value.estimate is not None


def test_rhs_is_beta_derivative():
    radii = np.array([0.3, 0.9, 1.6])
    beta, h = 2.0, 1e-3
    fd = (kernel_direct_matrix(radii, beta + h, 16, 96) - kernel_direct_matrix(radii, beta - h, 16, 96)) / (2 * h)
    rhs = kernel_rhs_matrix(radii, beta)
    np.testing.assert_allclose(rhs, fd, rtol=1e-5)
    assert np.all(np.diag(rhs) <= 0)


def test_march_matches_direct(small_table):
    t = small_table
    rng = np.random.default_rng(3)
    for _ in range(8):
        i, j, b = rng.integers(1, t.r_grid.size, 2).tolist() + [int(rng.integers(1, t.beta_grid.size))]
        ref = kernel_direct(t.r_grid[i], t.r_grid[j], t.beta_grid[b])
        assert t.values[b, i, j] == pytest.approx(ref, rel=1e-5)
    assert t.meta["beta0_march_discrepancy"] < 1e-5
    assert {"rtol", "integrator", "config_hash", "rhs_evaluations"} <= set(t.meta)


def test_march_beta0_slice_is_closed_form(small_table):
    np.testing.assert_array_equal(small_table.values[0], kernel_beta0_matrix(small_table.r_grid))


def test_march_argument_checks():
    with pytest.raises(ValueError):
        kernel_ode_march([0.0, 1.0], beta_grid=[0.5, 1.0])
    with pytest.raises(ValueError):
        kernel_ode_march([1.0, 0.5], beta_grid=[0.0, 1.0])
    with pytest.raises(ValueError):
        kernel_ode_march([0.0, 1.0], s_grid=[0.0, 2.0], beta_grid=[0.0, 1.0])
    with pytest.raises(ValueError):
        kernel_ode_march([0.0, 1.0], beta_grid=[0.0, 1.0], tol=0.0)


def test_march_single_slice():
    t = kernel_ode_march([0.0, 0.5, 1.0], beta_grid=[0.0])
    assert t.shape == (1, 3, 3)
