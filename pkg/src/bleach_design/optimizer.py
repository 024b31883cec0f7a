"""Exhaustive grid search for the most sensitive radial bleach shapes.

Problem 1 maximises the alternating kernel sum over all shapes with at
most ``n_max`` jumps on the radius grid.  Problem 2 does the same at fixed
bleached area.  Both searches enumerate every strictly increasing index
tuple; the running prefix sums of a tuple are the values of the shorter
shapes, so one nested loop serves every N.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .core import BleachShape, sensitivity_prefactor
from .table import KernelTable

log = logging.getLogger(__name__)

__all__ = [
    "Configuration",
    "DesignSweepResult",
    "SweepReport",
    "EnergyConstrainedSlice",
    "EnergyConstrainedMap",
    "solve_problem1",
    "sweep_beta",
    "solve_problem2",
    "problem2_map",
    "default_energy_grid",
    "naive_search",
]

MAX_SUPPORTED_N = 4


@dataclass(frozen=True)
class Configuration:
    radii: tuple[float, ...]
    kernel_sum: float

    @property
    def N(self) -> int:
        return len(self.radii)

    @property
    def energy(self) -> float:
        return BleachShape(self.radii).energy if self.radii else float("nan")


@dataclass
class DesignSweepResult:
    beta: float
    per_n_best: dict[int, Configuration]
    overall_best: Configuration
    s_int: float

    @property
    def nstar(self) -> int:
        return self.overall_best.N

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "nstar": self.nstar,
            "radii": list(self.overall_best.radii),
            "kernel_sum": self.overall_best.kernel_sum,
            "s_int": self.s_int,
            "energy": self.overall_best.energy,
            "per_n": {
                str(n): {"radii": list(c.radii), "kernel_sum": c.kernel_sum}
                for n, c in self.per_n_best.items()
            },
        }


@numba.njit(cache=True)
def _enumerate(K, n_max):
    """Best value and index tuple for each N <= n_max over increasing tuples.

    Ties keep the first tuple met in lexicographic order.
    """
    m = K.shape[0]
    best = np.full(n_max + 1, -np.inf)
    arg = np.full((n_max + 1, 4), -1, dtype=np.int64)
    for a in range(m):
        s1 = K[a, a]
        if s1 > best[1]:
            best[1] = s1
            arg[1, 0] = a
        if n_max < 2:
            continue
        for b in range(a + 1, m):
            s2 = s1 + K[b, b] - 2.0 * K[a, b]
            if s2 > best[2]:
                best[2] = s2
                arg[2, 0] = a
                arg[2, 1] = b
            if n_max < 3:
                continue
            for c in range(b + 1, m):
                s3 = s2 + K[c, c] + 2.0 * K[a, c] - 2.0 * K[b, c]
                if s3 > best[3]:
                    best[3] = s3
                    arg[3, 0] = a
                    arg[3, 1] = b
                    arg[3, 2] = c
                if n_max < 4:
                    continue
                for d in range(c + 1, m):
                    s4 = s3 + K[d, d] - 2.0 * K[a, d] + 2.0 * K[b, d] - 2.0 * K[c, d]
                    if s4 > best[4]:
                        best[4] = s4
                        arg[4, 0] = a
                        arg[4, 1] = b
                        arg[4, 2] = c
                        arg[4, 3] = d
    return best, arg


def _candidates(table: KernelTable) -> np.ndarray:
    return np.flatnonzero(table.r_grid > 0)


def _check_n_max(n_max: int) -> None:
    if not 1 <= n_max <= MAX_SUPPORTED_N:
        raise ValueError(f"n_max must be in 1..{MAX_SUPPORTED_N}, got {n_max}")


def solve_problem1(table: KernelTable, beta: float, n_max: int = 4) -> DesignSweepResult:
    """Global maximum of the kernel sum over shapes with N <= n_max jumps.

    ``beta`` must be a node of the table; radii range over the positive
    nodes of the radius grid.  Ties go to the lexicographically smallest
    radius tuple, then to the smaller N.
    """
    _check_n_max(n_max)
    b = table.beta_index(beta)
    idx = _candidates(table)
    K = np.ascontiguousarray(table.values[b][np.ix_(idx, idx)])
    best, arg = _enumerate(K, n_max)
    radii = table.r_grid[idx]
    per_n = {}
    for n in range(1, n_max + 1):
        if arg[n, 0] < 0:
            continue
        per_n[n] = Configuration(tuple(float(radii[i]) for i in arg[n, :n]), float(best[n]))
    overall = per_n[1]
    for n in range(2, n_max + 1):
        if n in per_n and per_n[n].kernel_sum > overall.kernel_sum:
            overall = per_n[n]
    beta_node = float(table.beta_grid[b])
    return DesignSweepResult(
        beta=beta_node,
        per_n_best=per_n,
        overall_best=overall,
        s_int=sensitivity_prefactor(beta_node) * overall.kernel_sum,
    )


def naive_search(table: KernelTable, beta: float, n_max: int = 4) -> dict[int, Configuration]:
    """Reference enumeration with itertools and the full double sum (slow)."""
    from itertools import combinations

    b = table.beta_index(beta)
    idx = _candidates(table)
    K = table.values[b]
    out = {}
    for n in range(1, n_max + 1):
        best = None
        for combo in combinations(idx, n):
            val = 0.0
            for j in range(n):
                for k in range(n):
                    val += (-1) ** (j + k) * K[combo[j], combo[k]]
            if best is None or val > best[1]:
                best = (combo, val)
        out[n] = Configuration(tuple(float(table.r_grid[i]) for i in best[0]), float(best[1]))
    return out


@dataclass
class Transition:
    beta: float
    uncertainty: float
    from_n: int
    to_n: int

    def to_dict(self) -> dict:
        return {"beta": self.beta, "uncertainty": self.uncertainty, "from_n": self.from_n, "to_n": self.to_n}


@dataclass
class SweepReport:
    results: list[DesignSweepResult]
    transitions: list[Transition]
    anomalies: list[str] = field(default_factory=list)

    @property
    def betas(self) -> np.ndarray:
        return np.array([r.beta for r in self.results])

    @property
    def nstar(self) -> np.ndarray:
        return np.array([r.nstar for r in self.results])

    def per_n_curve(self, n: int) -> np.ndarray:
        return np.array([r.per_n_best[n].kernel_sum if n in r.per_n_best else np.nan for r in self.results])

    def overall_curve(self) -> np.ndarray:
        return np.array([r.overall_best.kernel_sum for r in self.results])

    def energy_curve(self) -> np.ndarray:
        return np.array([r.overall_best.energy for r in self.results])


def detect_transitions(betas, nstar) -> tuple[list[Transition], list[str]]:
    transitions, anomalies = [], []
    for i in range(1, len(betas)):
        if nstar[i] != nstar[i - 1]:
            step = betas[i] - betas[i - 1]
            transitions.append(
                Transition(0.5 * (betas[i] + betas[i - 1]), step, int(nstar[i - 1]), int(nstar[i]))
            )
            if nstar[i] < nstar[i - 1]:
                anomalies.append(
                    f"optimal N decreases from {nstar[i - 1]} to {nstar[i]} between beta = {betas[i - 1]:g} and {betas[i]:g}"
                )
    return transitions, anomalies


def sweep_beta(table: KernelTable, n_max: int = 4, betas=None, progress=None) -> SweepReport:
    """Problem 1 at every beta node (or the given subset) plus transitions."""
    _check_n_max(n_max)
    betas = table.beta_grid if betas is None else np.asarray(betas, dtype=float)
    results = []
    for i, beta in enumerate(betas):
        results.append(solve_problem1(table, float(beta), n_max))
        if progress and i % 20 == 0:
            progress(f"beta = {beta:g}: N* = {results[-1].nstar}")
    transitions, anomalies = detect_transitions([r.beta for r in results], [r.nstar for r in results])
    for msg in anomalies:
        log.warning(msg)
    return SweepReport(results, transitions, anomalies)


# --------------------------------------------------------------------------
# Problem 2
# --------------------------------------------------------------------------

@numba.njit(cache=True)
def _enumerate_by_energy(K, n_max):
    """Best value for each N and each integer energy key.

    The radius grid is i * h, so a tuple's bleached area is pi h^2 times
    the integer key d^2 - c^2 + b^2 - a^2 (shorter tuples analogously).
    Candidate k has grid index k + 1.
    """
    m = K.shape[0]
    n_keys = m * m + 1
    best = np.full((n_max + 1, n_keys), -np.inf)
    arg = np.full((n_max + 1, n_keys, 4), -1, dtype=np.int64)
    for a in range(m):
        ia = (a + 1) * (a + 1)
        s1 = K[a, a]
        e1 = ia
        if s1 > best[1, e1]:
            best[1, e1] = s1
            arg[1, e1, 0] = a
        if n_max < 2:
            continue
        for b in range(a + 1, m):
            ib = (b + 1) * (b + 1)
            s2 = s1 + K[b, b] - 2.0 * K[a, b]
            e2 = ib - ia
            if s2 > best[2, e2]:
                best[2, e2] = s2
                arg[2, e2, 0] = a
                arg[2, e2, 1] = b
            if n_max < 3:
                continue
            for c in range(b + 1, m):
                ic = (c + 1) * (c + 1)
                s3 = s2 + K[c, c] + 2.0 * K[a, c] - 2.0 * K[b, c]
                e3 = ic - ib + ia
                if s3 > best[3, e3]:
                    best[3, e3] = s3
                    arg[3, e3, 0] = a
                    arg[3, e3, 1] = b
                    arg[3, e3, 2] = c
                if n_max < 4:
                    continue
                for d in range(c + 1, m):
                    s4 = s3 + K[d, d] - 2.0 * K[a, d] + 2.0 * K[b, d] - 2.0 * K[c, d]
                    e4 = (d + 1) * (d + 1) - ic + ib - ia
                    if s4 > best[4, e4]:
                        best[4, e4] = s4
                        arg[4, e4, 0] = a
                        arg[4, e4, 1] = b
                        arg[4, e4, 2] = c
                        arg[4, e4, 3] = d
    return best, arg


def default_energy_grid(r_max: float = 5.0, n_bins: int = 100) -> np.ndarray:
    """Bin centres of a uniform grid on [pi / 4, 0.9 pi r_max^2]."""
    lo, hi = 0.25 * math.pi, 0.9 * math.pi * r_max**2
    edges = np.linspace(lo, hi, n_bins + 1)
    return 0.5 * (edges[:-1] + edges[1:])


def _uniform_step(table: KernelTable) -> float:
    g = table.r_grid
    h = g[1] - g[0]
    if g[0] != 0.0 or not np.allclose(g, h * np.arange(g.size), rtol=0, atol=1e-9 * h):
        raise ValueError("Problem 2 needs a uniform radius grid starting at 0")
    return float(h)


@dataclass
class EnergyConstrainedSlice:
    """Problem 2 at one beta: best configuration per energy bin."""

    beta: float
    energy_grid: np.ndarray
    per_n_value: np.ndarray  # (n_max, n_energy); NaN where N cannot reach E
    nstar: np.ndarray  # 0 marks an empty bin
    configs: list[Configuration | None]
    envelopes: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]]  # N -> (energies, values, radius-index tuples)

    def envelope_value(self, n: int, energy: float) -> float:
        if n == 1:
            raise ValueError("the disk is evaluated directly, not through an envelope")
        e, v, _ = self.envelopes[n]
        if not e[0] <= energy <= e[-1]:
            return float("nan")
        return float(np.interp(energy, e, v))


def solve_problem2(
    table: KernelTable,
    beta: float,
    energy_grid=None,
    n_max: int = 4,
) -> EnergyConstrainedSlice:
    """Best N and radii for each prescribed bleached area.

    For N >= 2 the maximum at every attainable discrete area is found by
    enumeration and linearly interpolated onto ``energy_grid``; the stored
    configuration for a bin is the per-area optimum nearest the bin energy.
    The disk (N = 1) is fixed by its area and evaluated directly.
    """
    _check_n_max(n_max)
    h = _uniform_step(table)
    b = table.beta_index(beta)
    energy_grid = default_energy_grid(table.r_grid[-1]) if energy_grid is None else np.asarray(energy_grid, float)
    if np.any(energy_grid <= 0):
        raise ValueError("energies must be positive")
    idx = _candidates(table)
    K = np.ascontiguousarray(table.values[b][np.ix_(idx, idx)])
    best, arg = _enumerate_by_energy(K, n_max)
    quantum = math.pi * h * h
    n_e = energy_grid.size
    per_n = np.full((n_max, n_e), np.nan)
    chosen: dict[int, list] = {n: [None] * n_e for n in range(1, n_max + 1)}
    envelopes = {}
    radii = table.r_grid[idx]

    # disk: r = sqrt(E / pi)
    r1 = np.sqrt(energy_grid / math.pi)
    ok = (r1 >= table.r_grid[1]) & (r1 <= table.r_grid[-1])
    if np.any(ok):
        per_n[0, ok] = table.interpolate(r1[ok], r1[ok], table.beta_grid[b])
    for j in np.flatnonzero(ok):
        chosen[1][j] = Configuration((float(r1[j]),), float(per_n[0, j]))

    for n in range(2, n_max + 1):
        keys = np.flatnonzero(np.isfinite(best[n]))
        if keys.size == 0:
            continue
        e = keys * quantum
        v = best[n, keys]
        envelopes[n] = (e, v, arg[n, keys, :n])
        inside = (energy_grid >= e[0]) & (energy_grid <= e[-1])
        per_n[n - 1, inside] = np.interp(energy_grid[inside], e, v)
        near = np.clip(np.searchsorted(e, energy_grid), 0, e.size - 1)
        prev = np.clip(near - 1, 0, e.size - 1)
        near = np.where(np.abs(e[prev] - energy_grid) <= np.abs(e[near] - energy_grid), prev, near)
        for j in np.flatnonzero(inside):
            k = near[j]
            chosen[n][j] = Configuration(tuple(float(radii[i]) for i in arg[n, keys[k], :n]), float(v[k]))

    nstar = np.zeros(n_e, dtype=int)
    configs: list[Configuration | None] = [None] * n_e
    for j in range(n_e):
        col = per_n[:, j]
        if np.all(np.isnan(col)):
            continue
        n = int(np.nanargmax(col)) + 1
        nstar[j] = n
        configs[j] = chosen[n][j]
    return EnergyConstrainedSlice(float(table.beta_grid[b]), energy_grid, per_n, nstar, configs, envelopes)


@dataclass
class EnergyConstrainedMap:
    beta_grid: np.ndarray
    energy_grid: np.ndarray
    nstar: np.ndarray  # (n_beta, n_energy), 0 = empty
    kernel_sum: np.ndarray
    configs: list[list[Configuration | None]]

    def fraction(self, n: int) -> float:
        filled = self.nstar > 0
        return float(np.mean(self.nstar[filled] == n)) if np.any(filled) else float("nan")


def problem2_map(table: KernelTable, energy_grid=None, n_max: int = 4, betas=None, progress=None) -> EnergyConstrainedMap:
    betas = table.beta_grid if betas is None else np.asarray(betas, dtype=float)
    energy_grid = default_energy_grid(table.r_grid[-1]) if energy_grid is None else np.asarray(energy_grid, float)
    rows, vals, configs = [], [], []
    for i, beta in enumerate(betas):
        sl = solve_problem2(table, float(beta), energy_grid, n_max)
        rows.append(sl.nstar)
        vals.append([c.kernel_sum if c else np.nan for c in sl.configs])
        configs.append(sl.configs)
        if progress and i % 20 == 0:
            progress(f"beta = {beta:g}: {np.mean(sl.nstar == n_max):.0%} of bins pick N = {n_max}")
    return EnergyConstrainedMap(np.asarray(betas), energy_grid, np.array(rows), np.array(vals), configs)
