"""Shared data types: experiment geometry, radial bleach shapes, sensitivity values."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["ExperimentGeometry", "BleachShape", "SensitivityValue", "sensitivity_prefactor"]


@dataclass(frozen=True)
class ExperimentGeometry:
    """Observation cylinder of radius ``R`` and duration ``T`` plus noise model.

    ``beta = R^2 / (4 T D)`` is the characteristic diffusion time over the
    observation horizon.
    """

    R: float = 1.0
    T: float = 1.0
    D: float = 0.25
    sigma: float = 0.0
    u_ref: float = 1.0

    def __post_init__(self):
        if not (self.R > 0 and self.T > 0 and self.D > 0 and self.u_ref > 0):
            raise ValueError("R, T, D and u_ref must be positive")
        if not self.sigma >= 0:
            raise ValueError("sigma must be non-negative")

    @property
    def beta(self) -> float:
        return self.R**2 / (4.0 * self.T * self.D)

    @classmethod
    def from_beta(cls, beta: float, R: float = 1.0, T: float = 1.0, **kw) -> "ExperimentGeometry":
        if not beta > 0:
            raise ValueError("beta must be positive")
        return cls(R=R, T=T, D=R**2 / (4.0 * T * beta), **kw)

    def with_diffusivity(self, D: float) -> "ExperimentGeometry":
        return ExperimentGeometry(self.R, self.T, D, self.sigma, self.u_ref)


@dataclass(frozen=True)
class BleachShape:
    """Radially symmetric 0/1 initial condition given by its jump radii.

    Radii are in units of the observation radius.  The outermost interval
    ``[r_{N-1}, r_N]`` is bleached and occupancy alternates inward; for odd
    ``N`` the innermost piece is the disk ``[0, r_1]``.
    """

    radii: tuple[float, ...]

    def __init__(self, radii):
        r = tuple(float(x) for x in np.atleast_1d(radii))
        if len(r) < 1:
            raise ValueError("a shape needs at least one jump radius")
        if any(not x > 0 for x in r):
            raise ValueError(f"jump radii must be positive, got {r}")
        if any(b <= a for a, b in zip(r, r[1:])):
            raise ValueError(f"jump radii must be strictly increasing, got {r}")
        object.__setattr__(self, "radii", r)

    @property
    def N(self) -> int:
        return len(self.radii)

    @property
    def jump_signs(self) -> np.ndarray:
        """Sign of g' at each radius: -1 at the outer edge, alternating inward."""
        j = np.arange(1, self.N + 1)
        return np.where((self.N - j + 1) % 2 == 0, 1.0, -1.0)

    def occupied_intervals(self) -> list[tuple[float, float]]:
        r = (0.0,) + self.radii if self.N % 2 else self.radii
        return [(r[i], r[i + 1]) for i in range(0, len(r), 2)]

    @property
    def energy(self) -> float:
        """Scaled L1 norm: the bleached area in units of R^2."""
        return math.pi * sum(b * b - a * a for a, b in self.occupied_intervals())

    def indicator(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for a, b in self.occupied_intervals():
            out[(r >= a) & (r <= b)] = 1.0
        return out

    @classmethod
    def disk(cls, radius: float) -> "BleachShape":
        return cls((radius,))

    @classmethod
    def annulus(cls, inner: float, outer: float) -> "BleachShape":
        return cls((inner, outer))


def sensitivity_prefactor(beta: float, R: float = 1.0, T: float = 1.0) -> float:
    return 32.0 * math.pi * beta**3 * T**3 / R**2


@dataclass
class SensitivityValue:
    """Integrated squared D-sensitivity split into prefactor and kernel sum."""

    kernel_sum: float
    prefactor: float
    beta: float
    s_int: float = field(default=float("nan"))
    error_estimate: float | None = None
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        if math.isnan(self.s_int):
            self.s_int = self.prefactor * self.kernel_sum

    def to_dict(self) -> dict:
        return {
            "kernel_sum": self.kernel_sum,
            "prefactor": self.prefactor,
            "s_int": self.s_int,
            "beta": self.beta,
            "error_estimate": self.error_estimate,
            "warnings": list(self.warnings),
        }
