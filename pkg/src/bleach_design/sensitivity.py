"""Sensitivity of a radial bleach shape assembled from the kernel table."""

from __future__ import annotations

import logging

import numpy as np

from .core import BleachShape, ExperimentGeometry, SensitivityValue, sensitivity_prefactor
from .table import KernelTable

log = logging.getLogger(__name__)

__all__ = ["alternating_sum", "shape_sensitivity", "shape_energy", "NEGATIVE_CLAMP"]

NEGATIVE_CLAMP = 1e-9


def alternating_sum(K: np.ndarray) -> float:
    """sum_jk (-1)^(j+k) K[j, k] for a matrix of kernel values at jump radii."""
    n = K.shape[0]
    sign = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    return float(sign @ K @ sign)


def shape_sensitivity(
    shape: BleachShape,
    table: KernelTable,
    beta: float,
    geometry: ExperimentGeometry | None = None,
) -> SensitivityValue:
    """S_int of ``shape`` from table values at its jump radii.

    Off-grid radii and beta are interpolated (bilinear in r, s; linear in
    beta).  Without ``geometry`` the prefactor uses R = T = 1.
    """
    r = np.asarray(shape.radii)
    g = table.r_grid
    if r[0] < g[0] or r[-1] > g[-1]:
        raise ValueError(f"radii {shape.radii} outside table range [{g[0]}, {g[-1]}]")
    b = table.beta_grid
    if not b[0] <= beta <= b[-1]:
        raise ValueError(f"beta = {beta} outside table range [{b[0]}, {b[-1]}]")
    R, T = (geometry.R, geometry.T) if geometry is not None else (1.0, 1.0)
    K = table.interpolate(r[:, None], r[None, :], beta)
    ksum = alternating_sum(np.atleast_2d(K))
    warnings = []
    if ksum < 0:
        scale = max(float(np.max(np.abs(K))), 1e-300)
        if ksum < -NEGATIVE_CLAMP * scale:
            raise ValueError(f"kernel sum {ksum:.3g} is negative beyond rounding; table is broken")
        msg = f"clamped kernel sum {ksum:.3g} to 0"
        log.warning(msg)
        warnings.append(msg)
        ksum = 0.0
    return SensitivityValue(
        kernel_sum=ksum,
        prefactor=sensitivity_prefactor(beta, R, T),
        beta=beta,
        warnings=warnings,
    )


def shape_energy(shape: BleachShape) -> float:
    """Bleached area in units of R^2 (pi times the sum of outer^2 - inner^2)."""
    return shape.energy
