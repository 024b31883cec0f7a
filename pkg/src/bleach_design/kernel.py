"""The sensitivity kernel k(r, s; beta) and its tabulation.

For a radial bleach shape with jump radii r_1 < ... < r_N the integrated
squared sensitivity is ``32 pi beta^3 T^3 / R^2`` times the alternating sum
``sum_jk (-1)^(j+k) k(r_j, r_k; beta)``.  The kernel is

    k(r, s; beta) = int_0^1 q int_beta^inf B(q, r, rho) B(q, s, rho) r s drho dq,
    B(q, r, rho)  = exp(-rho (q - r)^2) (r i0s(2 q r rho) - q i1s(2 q r rho)),

with ``i0s``/``i1s`` the exponentially scaled Bessel functions.  Three
evaluation routes are provided:

* :func:`kernel_beta0` - the beta = 0 limit as an angular integral;
* :func:`kernel_direct` - the double integral above, one (r, s) pair at a time;
* :func:`kernel_ode_march` - the whole table at once from
  ``dk/dbeta = -int_0^1 q B(q, r, beta) B(q, s, beta) r s dq``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time

import numpy as np
from scipy.integrate import solve_ivp

from .special_functions import (
    bessel_i0_scaled,
    bessel_i1_scaled,
    composite_gauss_legendre,
    gauss_legendre,
)
from .table import KernelTable

log = logging.getLogger(__name__)

__all__ = [
    "KernelAccuracyError",
    "KernelIntegrationError",
    "brace",
    "kernel_beta0",
    "kernel_beta0_matrix",
    "kernel_direct",
    "kernel_direct_matrix",
    "kernel_rhs_matrix",
    "kernel_ode_march",
]


class KernelAccuracyError(RuntimeError):
    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class KernelIntegrationError(RuntimeError):
    def __init__(self, message, beta_reached=None):
        super().__init__(message)
        self.beta_reached = beta_reached


def brace(q, r, rho):
    """B(q, r, rho) = exp(-rho (q-r)^2) (r i0s(2 q r rho) - q i1s(2 q r rho)).

    ``q`` and ``r`` broadcast against each other.
    """
    q = np.asarray(q, dtype=float)
    r = np.asarray(r, dtype=float)
    x = 2.0 * rho * q * r
    return np.exp(-rho * (q - r) ** 2) * (r * bessel_i0_scaled(x) - q * bessel_i1_scaled(x))


# --------------------------------------------------------------------------
# beta = 0
# --------------------------------------------------------------------------

def _beta0_integrand(q, cos_t, sin_half_sq, r, s):
    """Angular-reduced beta = 0 integrand; the theta_2 integral is done exactly.

    int_0^{2pi} (s - q cos t) / (a - 2 q s cos t) dt
        = (pi / s) (1 + (2 s^2 - a) / sqrt(a^2 - 4 q^2 s^2))
    with a = A + q^2 + s^2 and A = |q e^{i theta_1} - r|^2.
    """
    A = (q - r) ** 2 + 4.0 * q * r * sin_half_sq
    root = np.sqrt((A + (q - s) ** 2) * (A + (q + s) ** 2))
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(root > 0, (s * s - q * q - A) / root, 0.0)
    return q * r * (r - q * cos_t) * (1.0 + frac)


def kernel_beta0(r: float, s: float, quad_orders: tuple[int, int] = (128, 96)) -> float:
    """k(r, s; 0) from the angular representation.

    The theta_2 integral is evaluated in closed form, leaving a (q, theta_1)
    integral done by Gauss-Legendre with q-panels split at r and s.  The
    integrand is bounded but not continuous at (q, theta_1) = (r, 0) when
    r = s <= 1; the split puts that point on a panel corner.
    """
    if r < 0 or s < 0:
        raise ValueError("radii must be non-negative")
    if r == 0 or s == 0:
        return 0.0
    n_q, n_theta = quad_orders
    pts = [0.0, 1.0] + [x for x in (r, s) if 0.0 < x < 1.0]
    qr = composite_gauss_legendre(pts, n_q)
    # symmetric in theta_1 -> integrate over [0, pi] and double
    th = gauss_legendre(n_theta, 0.0, math.pi)
    q = qr.nodes[:, None]
    f = _beta0_integrand(q, np.cos(th.nodes)[None, :], np.sin(0.5 * th.nodes)[None, :] ** 2, r, s)
    val = 2.0 * (qr.weights @ f @ th.weights) / (4.0 * math.pi)
    return float(val)


def kernel_beta0_matrix(radii, quad_orders: tuple[int, int] = (128, 96)) -> np.ndarray:
    """Symmetric matrix of k(r_i, r_j; 0) over a radius grid."""
    radii = np.asarray(radii, dtype=float)
    n = radii.size
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            out[i, j] = out[j, i] = kernel_beta0(radii[i], radii[j], quad_orders)
    return out


# --------------------------------------------------------------------------
# direct double integral, rho = beta / tau, tau = v^2
# --------------------------------------------------------------------------

_OFFSETS = np.array([0.0, 1.0, 3.0, 8.0, 20.0])


def _q_rule(centres, rho, n_q):
    width = 1.0 / math.sqrt(2.0 * rho)
    pts = [0.0, 1.0, 0.5]
    for c in centres:
        if -20.0 * width < c < 1.0 + 20.0 * width:
            pts.extend(c + width * _OFFSETS)
            pts.extend(c - width * _OFFSETS)
        if c > 1.0:
            # exp(-rho (q - c)^2) decays away from q = 1 at rate 2 rho (c - 1)
            pts.extend(1.0 - _OFFSETS[1:] / (2.0 * rho * (c - 1.0)))
    return composite_gauss_legendre(np.clip(pts, 0.0, 1.0), n_q)


def _direct(r_vals, s_vals, beta, n_q, n_v, centres):
    """Matrix of k(r_i, s_j; beta) by Gauss quadrature in (v, q)."""
    r_vals = np.asarray(r_vals, dtype=float)
    s_vals = np.asarray(s_vals, dtype=float)
    gv = gauss_legendre(n_v, 0.0, 1.0)
    total = np.zeros((r_vals.size, s_vals.size))
    for v, wv in zip(gv.nodes, gv.weights):
        tau = v * v
        rho = beta / tau
        rule = _q_rule(centres, rho, n_q)
        Br = brace(rule.nodes[None, :], r_vals[:, None], rho)
        Bs = Br if s_vals is r_vals else brace(rule.nodes[None, :], s_vals[:, None], rho)
        # drho = beta / tau^2 dtau, dtau = 2 v dv
        scale = wv * 2.0 * v * beta / (tau * tau)
        total += scale * ((Br * (rule.nodes * rule.weights)) @ Bs.T)
    return total * np.outer(r_vals, s_vals)


def kernel_direct(
    r: float,
    s: float,
    beta: float,
    n_q: int = 16,
    n_v: int = 64,
    rtol: float = 1e-6,
) -> float:
    """k(r, s; beta) for beta > 0 from the double integral.

    Evaluated twice, at the given orders and doubled orders; if the two
    disagree by more than ``rtol`` (relative) a :class:`KernelAccuracyError`
    carrying the finer estimate is raised.
    """
    if not beta > 0:
        raise ValueError("kernel_direct needs beta > 0; use kernel_beta0 at beta = 0")
    if r < 0 or s < 0:
        raise ValueError("radii must be non-negative")
    if r == 0 or s == 0:
        return 0.0
    centres = sorted({r, s, 0.5 * (r + s)})
    rv, sv = np.array([r]), np.array([s])
    coarse = _direct(rv, sv, beta, n_q, n_v, centres)[0, 0]
    fine = _direct(rv, sv, beta, 2 * n_q, 2 * n_v, centres)[0, 0]
    err = abs(fine - coarse)
    if err > rtol * abs(fine):
        raise KernelAccuracyError(
            f"k({r}, {s}; {beta}) not converged: estimate {fine:.6g}, error {err:.3g}",
            estimate=fine,
            error=err,
        )
    return float(fine)


def kernel_direct_matrix(radii, beta: float, n_q: int = 8, n_v: int = 64) -> np.ndarray:
    """k(r_i, r_j; beta) over a radius grid by the double integral."""
    radii = np.asarray(radii, dtype=float)
    centres = radii[(radii > 0)]
    out = _direct(radii, radii, beta, n_q, n_v, centres)
    out = 0.5 * (out + out.T)
    out[radii == 0, :] = 0.0
    out[:, radii == 0] = 0.0
    return out


# --------------------------------------------------------------------------
# ODE in beta
# --------------------------------------------------------------------------

def _rhs_rule(n_q):
    return composite_gauss_legendre(np.linspace(0.0, 1.0, 5), n_q)


def kernel_rhs_matrix(radii, beta: float, n_q: int = 24) -> np.ndarray:
    """dk/dbeta for all pairs of ``radii`` (4 Gauss panels of ``n_q`` in q)."""
    radii = np.asarray(radii, dtype=float)
    rule = _rhs_rule(n_q)
    B = brace(rule.nodes[None, :], radii[:, None], beta) * radii[:, None]
    return -(B * (rule.nodes * rule.weights)) @ B.T


def config_hash(r_grid, beta_grid, meta_params: dict) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(r_grid, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(beta_grid, dtype="<f8").tobytes())
    h.update(json.dumps(meta_params, sort_keys=True).encode())
    return h.hexdigest()


def kernel_ode_march(
    r_grid,
    s_grid=None,
    beta_grid=None,
    tol: float = 1e-7,
    beta0_orders: tuple[int, int] = (128, 96),
    rhs_order: int = 24,
    terminal_orders: tuple[int, int] = (8, 64),
    progress=None,
) -> KernelTable:
    """Tabulate k on ``beta_grid x r_grid x r_grid``.

    The beta = 0 slice comes from :func:`kernel_beta0`.  The remaining slices
    are produced by one explicit Runge-Kutta 4(5) integration of
    ``dk/dbeta`` for all (r, s) pairs together.  The march runs from the
    largest beta down, starting from the direct integral at that beta:
    k decays to 0 as beta -> inf, so integrating in that direction keeps
    small entries accurate relative to their own size, which a march
    upward from beta = 0 cannot do.  The march's arrival value at beta = 0
    is compared with the beta = 0 slice and recorded in ``meta``.
    """
    t0 = time.perf_counter()
    r_grid = np.asarray(r_grid, dtype=float)
    if s_grid is not None and not np.array_equal(np.asarray(s_grid, dtype=float), r_grid):
        raise ValueError("s_grid must equal r_grid (the table is symmetric)")
    beta_grid = np.asarray(beta_grid, dtype=float)
    if beta_grid.size < 1 or beta_grid[0] != 0.0 or np.any(np.diff(beta_grid) <= 0):
        raise ValueError("beta_grid must start at 0 and increase")
    if np.any(np.diff(r_grid) <= 0) or r_grid[0] < 0:
        raise ValueError("r_grid must be non-negative and increasing")
    if not tol > 0:
        raise ValueError("tol must be positive")
    say = progress or (lambda msg: None)

    n = r_grid.size
    values = np.zeros((beta_grid.size, n, n))
    say("beta = 0 slice")
    k0 = kernel_beta0_matrix(r_grid, beta0_orders)
    values[0] = k0
    live = np.flatnonzero(r_grid > 0)
    iu = np.triu_indices(live.size)
    sub = r_grid[live]
    meta = {
        "beta0_orders": list(beta0_orders),
        "rhs_order": rhs_order,
        "terminal_orders": list(terminal_orders),
        "rtol": tol,
        "integrator": "RK45 (Dormand-Prince), backward from beta_max",
    }
    if beta_grid.size > 1:
        b_top = float(beta_grid[-1])
        say(f"terminal slice at beta = {b_top:g}")
        k_top = kernel_direct_matrix(sub, b_top, *terminal_orders)
        y0 = k_top[iu]

        def rhs(beta, y):
            return kernel_rhs_matrix(sub, beta, rhs_order)[iu]

        say("marching dk/dbeta")
        # atol only guards exact zeros; accuracy is relative per entry.
        sol = solve_ivp(
            rhs,
            (b_top, 0.0),
            y0,
            method="RK45",
            t_eval=beta_grid[::-1],
            rtol=tol,
            atol=1e-300,
        )
        if not sol.success:
            reached = float(sol.t[-1]) if sol.t.size else b_top
            raise KernelIntegrationError(f"beta march failed: {sol.message}", beta_reached=reached)
        marched = sol.y[:, ::-1]
        for b in range(1, beta_grid.size):
            slab = np.zeros((live.size, live.size))
            slab[iu] = marched[:, b]
            slab = slab + np.triu(slab, 1).T
            values[b][np.ix_(live, live)] = slab
        arrival = np.zeros((live.size, live.size))
        arrival[iu] = marched[:, 0]
        arrival = arrival + np.triu(arrival, 1).T
        scale = max(np.max(np.abs(k0)), 1e-300)
        meta["beta0_march_discrepancy"] = float(
            np.max(np.abs(arrival - k0[np.ix_(live, live)])) / scale
        )
        meta["rhs_evaluations"] = int(sol.nfev)
    meta["seconds"] = round(time.perf_counter() - t0, 3)
    params = {k: meta[k] for k in ("beta0_orders", "rhs_order", "terminal_orders", "rtol")}
    meta["config_hash"] = config_hash(r_grid, beta_grid, params)
    table = KernelTable(r_grid, beta_grid, values, meta)
    table.validate()
    return table
