"""Globally optimal binary radial bleach shapes for identifying a diffusion coefficient.

The sensitivity of an experiment with a radially symmetric binary initial
condition reduces to an alternating double sum of a tabulated kernel
``k(r, s; beta)`` over the jump radii of the shape.  Tabulating the kernel
once makes a global grid search over all shapes with up to four jumps cheap.
"""

from .core import BleachShape, ExperimentGeometry, SensitivityValue, sensitivity_prefactor
from .estimation import DataLayout, EstimationReport, run_estimation_experiment
from .forward_model import (
    SpaceTimeGrid,
    concentration,
    disk_mask,
    laplacian_radial,
    oracle_sensitivity,
    oracle_sensitivity_2d,
    sensitivity_field,
    solve_radial,
)
from .kernel import (
    KernelAccuracyError,
    KernelIntegrationError,
    kernel_beta0,
    kernel_direct,
    kernel_ode_march,
)
from .optimizer import (
    Configuration,
    DesignSweepResult,
    EnergyConstrainedMap,
    SweepReport,
    naive_search,
    problem2_map,
    solve_problem1,
    solve_problem2,
    sweep_beta,
)
from .sensitivity import alternating_sum, shape_energy, shape_sensitivity
from .special_functions import bessel_i0_scaled, bessel_i1_scaled, composite_gauss_legendre, gauss_legendre
from .spectral import L2Design, l2_optimal_design, power_iteration
from .table import KernelTable, TableError, export_csv, load_table, save_table

__version__ = "0.1.0"
