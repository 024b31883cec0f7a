import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bleach_design.special_functions import (
    bessel_i0_scaled,
    bessel_i1_scaled,
    composite_gauss_legendre,
    gauss_legendre,
)

mpmath.mp.dps = 30


def ref_scaled(order, x):
    return float(mpmath.besseli(order, x) * mpmath.exp(-x))


@pytest.mark.parametrize("x", [0.0, 1e-300, 1e-12, 1e-3, 0.5, 3.0, 7.75, 8.0, 8.01, 15.0, 39.9, 40.1, 700.0, 1e6, 1e12])
def test_bessel_against_mpmath_at_branch_points(x):
    for order, fn in ((0, bessel_i0_scaled), (1, bessel_i1_scaled)):
        ref = ref_scaled(order, x)
        got = fn(x)
        if ref == 0:
            assert got == 0
        else:
            assert abs(got / ref - 1) < 1e-13


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=0.0, max_value=1e4, allow_nan=False))
def test_bessel_relative_error_property(x):
    for order, fn in ((0, bessel_i0_scaled), (1, bessel_i1_scaled)):
        ref = ref_scaled(order, x)
        if ref > 0:
            assert abs(fn(x) / ref - 1) < 5e-14


def test_bessel_exact_at_zero_and_vectorised():
    assert bessel_i0_scaled(0.0) == 1.0
    assert bessel_i1_scaled(0.0) == 0.0
    x = np.array([[0.0, 1.0], [10.0, 100.0]])
    assert bessel_i0_scaled(x).shape == (2, 2)
    assert np.all(np.diff(bessel_i0_scaled(np.linspace(0, 50, 200))) < 0)  # e^-x I0 decreases


@pytest.mark.parametrize("bad", [-1.0, -1e-300, float("nan")])
def test_bessel_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        bessel_i0_scaled(bad)
    with pytest.raises(ValueError):
        bessel_i1_scaled(np.array([1.0, bad]))


@pytest.mark.parametrize("n", [1, 2, 5, 16, 64, 200])
def test_gauss_legendre_matches_numpy(n):
    x, w = np.polynomial.legendre.leggauss(n)
    rule = gauss_legendre(n)
    assert np.allclose(rule.nodes, x, atol=1e-14)
    assert np.allclose(rule.weights, w, atol=1e-14)


def test_gauss_legendre_polynomial_exactness():
    rng = np.random.default_rng(1)
    for n in (3, 8, 20):
        rule = gauss_legendre(n, -0.5, 2.0)
        c = rng.normal(size=2 * n)  # degree 2n - 1
        p = np.polynomial.Polynomial(c)
        exact = p.integ()(2.0) - p.integ()(-0.5)
        assert rule.integrate(p) == pytest.approx(exact, rel=1e-12, abs=1e-12)


def test_integral_representation_of_i0():
    # int_0^{2 pi} e^{cos t} dt = 2 pi I0(1)
    rule = gauss_legendre(40, 0.0, 2.0 * math.pi)
    val = rule.integrate(lambda t: np.exp(np.cos(t)))
    assert val == pytest.approx(2.0 * math.pi * bessel_i0_scaled(1.0) * math.e, rel=1e-14)


def test_composite_rule_handles_kinks():
    rule = composite_gauss_legendre([0.0, 0.3, 0.3, 1.0, 0.7], 10)
    assert rule.interval == (0.0, 1.0)
    assert rule.integrate(lambda x: np.abs(x - 0.3)) == pytest.approx(0.5 * (0.09 + 0.49), rel=1e-14)
    assert rule.integrate(np.ones_like) == pytest.approx(1.0, rel=1e-15)


def test_quadrature_argument_validation():
    with pytest.raises(ValueError):
        gauss_legendre(0)
    with pytest.raises(ValueError):
        gauss_legendre(4, 1.0, 1.0)
    with pytest.raises(ValueError):
        composite_gauss_legendre([1.0], 4)
