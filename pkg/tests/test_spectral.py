import numpy as np
import pytest

from bleach_design.core import BleachShape, ExperimentGeometry
from bleach_design.forward_model import oracle_sensitivity
from bleach_design.spectral import PowerIterationError, l2_optimal_design, power_iteration, sensitivity_gram


def test_power_iteration_matches_eigh():
    rng = np.random.default_rng(2)
    A = rng.normal(size=(30, 30))
    A = A @ A.T
    lam, x, hist = power_iteration(A, tol=1e-14, max_iter=100000)
    w, V = np.linalg.eigh(A)
    assert lam == pytest.approx(w[-1], rel=1e-10)
    assert abs(abs(x @ V[:, -1]) - 1) < 1e-5
    assert np.all(np.diff(hist) >= -1e-12 * lam)


def test_power_iteration_reports_nonconvergence():
    A = np.diag([1.0, 0.999999])
    with pytest.raises(PowerIterationError) as info:
        power_iteration(A, tol=1e-15, max_iter=5, x0=[1.0, 1.0])
    assert info.value.rayleigh is not None


def test_power_iteration_zero_matrix():
    lam, _, _ = power_iteration(np.zeros((3, 3)))
    assert lam == 0.0


def test_gram_matches_oracle_for_binary_profiles():
    geom = ExperimentGeometry.from_beta(2.0)
    edges = np.array([0.0, 0.4, 0.8, 1.3])
    G = sensitivity_gram(geom, edges, n_q=16, n_tau=64)
    # annulus (0.4, 1.3) = cells 1 + 2
    c = np.array([0.0, 1.0, 1.0])
    ref = oracle_sensitivity(BleachShape((0.4, 1.3)), geom).s_int
    assert c @ G @ c == pytest.approx(ref, rel=1e-6)


def test_l2_design_properties():
    geom = ExperimentGeometry.from_beta(1.0)
    d = l2_optimal_design(geom, n_radial=32, c2=2.0)
    area = np.pi * (d.edges[1:] ** 2 - d.edges[:-1] ** 2)
    assert np.sum(d.profile**2 * area) == pytest.approx(4.0, rel=1e-12)
    assert d.profile.sum() > 0
    assert d.iterations == len(d.rayleigh_history) - 1
    assert np.all(np.diff(d.rayleigh_history) >= -1e-12 * d.rayleigh_history[-1])
    with pytest.raises(ValueError):
        l2_optimal_design(geom, c2=0.0)
