"""Independent reference implementations used only by the tests.

Nothing here imports the package; Bessel functions come from scipy.special
and integrals from adaptive scipy quadrature.
"""

import math

import numpy as np
from scipy import integrate
from scipy.special import i0e, i1e
from scipy.stats import chi2, ncx2


def brace_ref(q, r, rho):
    x = 2.0 * q * r * rho
    return math.exp(-rho * (q - r) ** 2) * (r * i0e(x) - q * i1e(x))


def kernel_ref(r, s, beta, epsabs=1e-14, epsrel=1e-10):
    """k(r, s; beta) = int_0^1 q int_beta^inf B(q, r, rho) B(q, s, rho) r s drho dq."""

    def inner(q):
        f = lambda rho: brace_ref(q, r, rho) * brace_ref(q, s, rho)  # noqa: E731
        if beta == 0.0:
            a = integrate.quad(f, 0.0, 1.0, epsabs=epsabs, epsrel=epsrel, limit=200)[0]
            b = integrate.quad(f, 1.0, np.inf, epsabs=epsabs, epsrel=epsrel, limit=200)[0]
            return a + b
        return integrate.quad(f, beta, np.inf, epsabs=epsabs, epsrel=epsrel, limit=200)[0]

    pts = sorted({p for p in (r, s) if 0 < p < 1})
    val = integrate.quad(lambda q: q * inner(q), 0.0, 1.0, points=pts or None, epsabs=epsabs, epsrel=epsrel, limit=200)[0]
    return r * s * val


def radial_solution_ref(radii, beta, q, tau):
    """u for a 0/1 radial shape via non-central chi-square probabilities.

    A disk of radius a diffused to time tau is P(|X| <= a) for
    X ~ N(q e_1, sigma^2 I_2) with sigma^2 = tau / (2 beta).
    """
    sigma2 = tau / (2.0 * beta)
    nc = q * q / sigma2

    def disk(a):
        # scipy's ncx2 is inaccurate for subnormal noncentrality; the
        # central distribution is the exact limit there
        if nc < 1e-300:
            return chi2.cdf(a * a / sigma2, 2)
        return ncx2.cdf(a * a / sigma2, 2, nc)

    n = len(radii)
    total = 0.0
    for j, a in enumerate(radii):
        total += (1.0 if (n - j) % 2 == 1 else -1.0) * disk(a)
    return total
