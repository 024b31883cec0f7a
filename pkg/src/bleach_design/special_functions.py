"""Exponentially scaled modified Bessel functions and Gauss-Legendre rules.

Only the scaled forms ``exp(-x) I0(x)`` and ``exp(-x) I1(x)`` are exposed.
Every integrand in the package pairs ``exp(-rho (q^2 + r^2))`` with
``I0(2 q r rho)``; writing that product as
``exp(-rho (q - r)^2) * i0_scaled(2 q r rho)`` keeps all factors bounded.

The scaled functions are evaluated from Chebyshev expansions on two
pieces (``x <= 8`` in ``x`` and ``x > 8`` in ``8/x``).  The expansion
coefficients are fitted once at import time against the convergent power
series and, for large arguments, the asymptotic expansion.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as C

__all__ = [
    "QuadratureRule",
    "bessel_i0_scaled",
    "bessel_i1_scaled",
    "gauss_legendre",
    "composite_gauss_legendre",
]

_SPLIT = 8.0
_SERIES_TERMS = 160
_ASYMPTOTIC_FROM = 40.0


def _series_scaled(x: np.ndarray, order: int) -> np.ndarray:
    """exp(-x) I_order(x) from the power series; all terms are positive."""
    x = np.asarray(x, dtype=float)
    half = 0.5 * x
    # Work in log space for the leading term so large x does not overflow.
    with np.errstate(divide="ignore"):
        log_lead = order * np.log(half) - math.lgamma(order + 1) - x
    lead = np.exp(log_lead) if order else np.exp(-x)
    total = np.ones_like(x)
    term = np.ones_like(x)
    h2 = half * half
    for k in range(1, _SERIES_TERMS):
        term = term * h2 / (k * (k + order))
        total = total + term
    return lead * total


def _i1_over_x_scaled(x: np.ndarray) -> np.ndarray:
    """exp(-x) I1(x) / x, finite at x = 0."""
    half = 0.5 * x
    total = np.full_like(x, 0.5)
    term = np.full_like(x, 0.5)
    h2 = half * half
    for k in range(1, _SERIES_TERMS):
        term = term * h2 / (k * (k + 1))
        total = total + term
    return np.exp(-x) * total


def _asymptotic_scaled_sqrt(x: np.ndarray, order: int) -> np.ndarray:
    """sqrt(x) exp(-x) I_order(x) from the large-argument expansion."""
    x = np.asarray(x, dtype=float)
    mu = 4.0 * order * order
    total = np.ones_like(x)
    term = np.ones_like(x)
    for k in range(1, 30):
        term = -term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        total = total + term
    return total / math.sqrt(2.0 * math.pi)


def _reference_scaled_sqrt(x: np.ndarray, order: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < _ASYMPTOTIC_FROM
    out[small] = np.sqrt(x[small]) * _series_scaled(x[small], order)
    out[~small] = _asymptotic_scaled_sqrt(x[~small], order)
    return out


@functools.lru_cache(maxsize=None)
def _coefficients(order: int) -> tuple[np.ndarray, np.ndarray]:
    # For order 1 the near piece fits exp(-x) I1(x) / x, which keeps the
    # relative accuracy as x -> 0.
    def near_fn(t):
        x = _SPLIT * 0.5 * (t + 1.0)
        if order == 0:
            return _series_scaled(x, 0)
        return _i1_over_x_scaled(x)

    near = C.chebinterpolate(near_fn, 48)
    # u = 8/x in (0, 1] mapped to t in (-1, 1]; u = 0 is the x -> inf limit.
    def far_fn(t):
        u = 0.5 * (t + 1.0)
        out = np.full_like(u, 1.0 / math.sqrt(2.0 * math.pi))
        pos = u > 0
        out[pos] = _reference_scaled_sqrt(_SPLIT / u[pos], order)
        return out

    far = C.chebinterpolate(far_fn, 40)
    return near, far


def _scaled(x, order: int):
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("scaled Bessel functions require x >= 0")
    near, far = _coefficients(order)
    out = np.empty_like(arr)
    lo = arr <= _SPLIT
    if np.any(lo):
        xl = arr[lo]
        out[lo] = C.chebval(xl * (2.0 / _SPLIT) - 1.0, near)
        if order == 1:
            out[lo] *= xl
    hi = ~lo
    if np.any(hi):
        xh = arr[hi]
        out[hi] = C.chebval(2.0 * _SPLIT / xh - 1.0, far) / np.sqrt(xh)
    if order == 0:
        out[arr == 0] = 1.0
    if np.ndim(x) == 0:
        return float(out)
    return out


def bessel_i0_scaled(x):
    """Return exp(-x) * I0(x) for x >= 0 (scalar or array)."""
    return _scaled(x, 0)


def bessel_i1_scaled(x):
    """Return exp(-x) * I1(x) for x >= 0 (scalar or array)."""
    return _scaled(x, 1)


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    interval: tuple[float, float]

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


@functools.lru_cache(maxsize=256)
def _legendre_reference(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1] by Newton iteration on P_n."""
    k = np.arange(1, n + 1)
    x = np.cos(np.pi * (k - 0.25) / (n + 0.5))
    for _ in range(100):
        p0 = np.ones_like(x)
        p1 = x.copy()
        for j in range(2, n + 1):
            p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
        if n == 1:
            p1, p0 = x.copy(), np.ones_like(x)
        dp = n * (x * p1 - p0) / (x * x - 1.0)
        dx = p1 / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-14:
            break
    p0 = np.ones_like(x)
    p1 = x.copy()
    for j in range(2, n + 1):
        p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
    if n == 1:
        p1, p0 = x.copy(), np.ones_like(x)
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    x, w = x[order], w[order]
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n: int, lo: float = -1.0, hi: float = 1.0) -> QuadratureRule:
    """n-point Gauss-Legendre rule on [lo, hi]."""
    if int(n) != n or n < 1:
        raise ValueError(f"need a positive integer node count, got {n!r}")
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    x, w = _legendre_reference(int(n))
    half = 0.5 * (hi - lo)
    return QuadratureRule(lo + half * (x + 1.0), half * w, (float(lo), float(hi)))


def composite_gauss_legendre(breakpoints, n: int) -> QuadratureRule:
    """Gauss-Legendre with ``n`` nodes on every panel between breakpoints.

    Duplicate and unsorted breakpoints are tolerated.
    """
    b = np.unique(np.asarray(breakpoints, dtype=float))
    if b.size < 2:
        raise ValueError("need at least two distinct breakpoints")
    x, w = _legendre_reference(int(n))
    a, c = b[:-1, None], b[1:, None]
    half = 0.5 * (c - a)
    nodes = (a + half * (x + 1.0)).ravel()
    weights = (half * w).ravel()
    return QuadratureRule(nodes, weights, (float(b[0]), float(b[-1])))
