"""Synthetic estimation of D from noisy data, to check the error-sensitivity relation.

Data are taken on a square pixel lattice inside the observation disk at
equally spaced frames ``t_k = k T / n_frames``.  Each trial adds i.i.d.
Gaussian noise and refits D by golden-section search on ``log D`` over
``[D / 10, 10 D]``.  The mean squared relative error is compared with
``sigma^2 / (u_ref^2 S_GRS)``.

Trial ``i`` draws its noise from a Philox counter-based generator keyed by
``(seed, i)``, so results do not depend on the order trials are run in.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import BleachShape, ExperimentGeometry
from .forward_model import sensitivity_field, solve_radial

__all__ = ["DataLayout", "EstimationReport", "run_estimation_experiment", "golden_section", "trial_rng"]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class DataLayout:
    """Pixel lattice (spacing R / pixels_per_radius) times frame count."""

    pixels_per_radius: int = 8
    n_frames: int = 10

    def points(self, geometry: ExperimentGeometry):
        n = self.pixels_per_radius
        k = np.arange(-n, n + 1)
        X, Y = np.meshgrid(k, k)
        d2 = (X * X + Y * Y).ravel()
        d2 = d2[d2 <= n * n]
        # u depends on |x| only: keep unique radii and their multiplicities
        uniq, counts = np.unique(d2, return_counts=True)
        q = np.sqrt(uniq) / n
        tau = np.arange(1, self.n_frames + 1) / self.n_frames
        return q, counts, tau


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    if seed < 0 or trial < 0:
        raise ValueError("seed and trial must be non-negative")
    return np.random.Generator(np.random.Philox(key=(int(seed) << 64) + int(trial)))


def golden_section(f, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 500):
    """Minimise a unimodal ``f`` on [lo, hi]; returns (x, f(x), iterations)."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol and it < max_iter:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
        it += 1
    x = 0.5 * (a + b)
    return x, f(x), it


@dataclass
class EstimationReport:
    shape: tuple[float, ...]
    beta: float
    sigma: float
    u_ref: float
    seed: int
    n_trials: int
    n_data: int
    s_grs: float
    predicted: float
    empirical: float
    standard_error: float
    estimates: list[float] = field(default_factory=list)
    failures: list[int] = field(default_factory=list)

    @property
    def ratio(self) -> float:
        return self.empirical / self.predicted if self.predicted > 0 else float("nan")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["shape"] = list(self.shape)
        d["ratio"] = self.ratio
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _model(shape, geometry, D, q, tau):
    beta = geometry.R**2 / (4.0 * geometry.T * D)
    return solve_radial(shape, beta, q[:, None], tau[None, :])


def run_estimation_experiment(
    shape: BleachShape,
    geometry: ExperimentGeometry,
    n_trials: int = 200,
    seed: int = 0,
    layout: DataLayout = DataLayout(),
    tol: float = 1e-10,
) -> EstimationReport:
    """Monte-Carlo estimate of E|D_hat - D|^2 / D^2 against its prediction."""
    if n_trials < 1:
        raise ValueError("n_trials must be positive")
    D, sigma, u_ref = geometry.D, geometry.sigma, geometry.u_ref
    q, mult, tau = layout.points(geometry)
    weights = np.repeat(mult[:, None], tau.size, axis=1).astype(float)
    n_data = int(weights.sum())
    clean = _model(shape, geometry, D, q, tau)
    dudD = sensitivity_field(shape, geometry, q[:, None], tau[None, :])
    s_grs = D**2 / u_ref**2 * float(np.sum(weights * dudD**2))
    predicted = sigma**2 / (u_ref**2 * s_grs)

    # every lattice point gets its own noise; the residual only needs the
    # per-radius noise sums because u is the same at equal |x|
    starts = np.r_[0, np.cumsum(mult)[:-1]]
    lo, hi = math.log(D / 10.0), math.log(10.0 * D)
    estimates, failures, sq = [], [], []
    for trial in range(n_trials):
        rng = trial_rng(seed, trial)
        noise = sigma * rng.standard_normal((int(mult.sum()), tau.size))
        noise_sum = np.add.reduceat(noise, starts, axis=0)

        def residual(logd):
            # sum_i (m - clean - eps_i)^2 minus the constant sum_i eps_i^2
            diff = _model(shape, geometry, math.exp(logd), q, tau) - clean
            return float(np.sum(weights * diff * diff - 2.0 * diff * noise_sum))

        x, _, _ = golden_section(residual, lo, hi, tol)
        if x - lo < 10 * tol or hi - x < 10 * tol:
            failures.append(trial)
            estimates.append(float("nan"))
            continue
        d_hat = math.exp(x)
        estimates.append(d_hat)
        sq.append(((d_hat - D) / D) ** 2)
    sq = np.asarray(sq)
    empirical = float(sq.mean()) if sq.size else float("nan")
    se = float(sq.std(ddof=1) / math.sqrt(sq.size)) if sq.size > 1 else float("nan")
    return EstimationReport(
        shape=shape.radii,
        beta=geometry.beta,
        sigma=sigma,
        u_ref=u_ref,
        seed=seed,
        n_trials=n_trials,
        n_data=n_data,
        s_grs=s_grs,
        predicted=predicted,
        empirical=empirical,
        standard_error=se,
        estimates=estimates,
        failures=failures,
    )
