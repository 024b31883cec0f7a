"""Best initial profile under a fixed L2 norm (top singular pair of the
initial-condition-to-sensitivity operator).

The radial profile is piecewise constant on ``n_radial`` annular cells of
``[0, r_max]``.  By linearity the sensitivity field of a cell is the
difference of two disk fields, so the discrete operator's columns come
straight from :func:`forward_model.sensitivity_field`.  Power iteration
runs on the Gram matrix ``K^T W K`` in the L2-orthonormal cell basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import BleachShape, ExperimentGeometry
from .forward_model import SpaceTimeGrid, sensitivity_field

__all__ = ["L2Design", "PowerIterationError", "sensitivity_gram", "power_iteration", "l2_optimal_design"]


class PowerIterationError(RuntimeError):
    def __init__(self, message, rayleigh=None):
        super().__init__(message)
        self.rayleigh = rayleigh


@dataclass
class L2Design:
    singular_value: float
    edges: np.ndarray
    profile: np.ndarray  # value on each cell, scaled to the requested L2 norm
    rayleigh_history: list[float] = field(default_factory=list)
    iterations: int = 0

    @property
    def centres(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])


def sensitivity_gram(geometry: ExperimentGeometry, edges, n_q: int = 8, n_tau: int = 48) -> np.ndarray:
    """Gram matrix <K chi_i, K chi_j> over the observation cylinder.

    ``chi_i`` is the indicator of the annulus ``[edges[i], edges[i+1]]``
    (a disk for ``edges[0] = 0``).  Dimensional (includes T^3 / R^2).
    """
    edges = np.asarray(edges, dtype=float)
    inner = edges[(edges > 0) & (edges < 1.0)]
    grid = SpaceTimeGrid.adapted(inner, geometry.beta, n_q=n_q, n_tau=n_tau)
    cols = np.empty((grid.q.size, edges.size))
    for k, r in enumerate(edges):
        cols[:, k] = 0.0 if r == 0 else sensitivity_field(BleachShape.disk(r), geometry, grid.q, grid.tau)
    # cell i = disk(edges[i+1]) - disk(edges[i])
    K = cols[:, 1:] - cols[:, :-1]
    # du/dD lives in physical units; dx dt = R^2 T dz dtau
    W = grid.weights * geometry.R**2 * geometry.T
    return K.T @ (K * W[:, None])


def power_iteration(A: np.ndarray, tol: float = 1e-8, max_iter: int = 20000, x0=None):
    """Largest eigenpair of a symmetric PSD matrix.

    Stops when the Rayleigh quotient changes by less than ``tol`` relative.
    Returns ``(eigenvalue, unit vector, Rayleigh quotient history)``.
    """
    n = A.shape[0]
    x = np.ones(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    x /= np.linalg.norm(x)
    history = [float(x @ A @ x)]
    for it in range(max_iter):
        y = A @ x
        norm = np.linalg.norm(y)
        if norm == 0:
            return 0.0, x, history
        x = y / norm
        history.append(float(x @ A @ x))
        if abs(history[-1] - history[-2]) <= tol * abs(history[-1]):
            return history[-1], x, history
    raise PowerIterationError(
        f"power iteration did not converge in {max_iter} steps (Rayleigh quotient {history[-1]:.6g})",
        rayleigh=history[-1],
    )


def l2_optimal_design(
    geometry: ExperimentGeometry,
    n_radial: int = 64,
    r_max: float = 3.0,
    c2: float = 1.0,
    tol: float = 1e-8,
    max_iter: int = 20000,
    quad: tuple[int, int] = (8, 48),
) -> L2Design:
    """Top singular value and optimal radial profile with ``||u0||_2 = c2``.

    ``r_max`` is in units of R.  The profile is returned as cell values
    (dimensionless concentrations) on ``edges * R``.
    """
    if not c2 > 0:
        raise ValueError("c2 must be positive")
    edges = np.linspace(0.0, r_max, n_radial + 1)
    G = sensitivity_gram(geometry, edges, *quad)
    # physical cell areas; the L2 norm^2 of sum c_i chi_i is sum c_i^2 area_i
    area = math.pi * (edges[1:] ** 2 - edges[:-1] ** 2) * geometry.R**2
    scale = 1.0 / np.sqrt(area)
    A = G * np.outer(scale, scale)
    A = 0.5 * (A + A.T)
    lam, y, history = power_iteration(A, tol, max_iter)
    c = y * scale
    if c.sum() < 0:
        c = -c
    c *= c2 / math.sqrt(np.sum(c * c * area))
    return L2Design(math.sqrt(max(lam, 0.0)), edges * geometry.R, c, history, len(history) - 1)
