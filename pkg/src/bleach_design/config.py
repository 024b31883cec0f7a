"""Run configuration: flat ``key = value`` files with command-line overrides."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .kernel import config_hash
from .table import atomic_write_bytes

RESOLVED_NAME = "resolved_config.txt"

# quadrature settings of the tabulation; part of the cache key
BETA0_ORDERS = (128, 96)
RHS_ORDER = 24
TERMINAL_ORDERS = (8, 64)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    beta_min: float = 0.0
    beta_max: float = 20.0
    beta_step: float = 0.1
    r_max: float = 5.0
    r_step: float = 0.05
    n_max: int = 4
    tol: float = 1e-7
    seed: int = 0
    energy_bins: int = 100
    energy_min: float = math.pi / 4
    energy_max: float = 0.0  # 0 means 0.9 pi r_max^2
    cache: str = ""  # empty means <out_dir>/kernel_table.bdkt
    out_dir: str = "results"
    radii: str = "1.0"
    beta: float = 1.0
    sigma: float = 0.05
    trials: int = 200

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("beta_max", "beta_step", "r_max", "r_step", "tol", "trials", "energy_bins", "beta"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 <= self.beta_min <= self.beta_max:
            raise ConfigError(f"need 0 <= beta_min <= beta_max, got {self.beta_min}, {self.beta_max}")
        if self.sigma < 0:
            raise ConfigError("sigma must be non-negative")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if not 1 <= self.n_max <= 4:
            raise ConfigError("n_max must be in 1..4")
        for value, step, label in ((self.beta_max, self.beta_step, "beta"), (self.r_max, self.r_step, "r")):
            n = value / step
            if abs(n - round(n)) > 1e-9 * max(n, 1.0):
                raise ConfigError(f"{label}_max must be a whole number of {label}_step")
        if self.energy_max and not self.energy_min < self.energy_max:
            raise ConfigError("energy_min must be below energy_max")
        if self.energy_min <= 0:
            raise ConfigError("energy_min must be positive")
        self.shape_radii()

    def shape_radii(self) -> tuple[float, ...]:
        try:
            radii = tuple(float(x) for x in self.radii.replace(",", " ").split())
        except ValueError as exc:
            raise ConfigError(f"radii: {exc}") from exc
        if not radii or radii[0] <= 0 or any(b <= a for a, b in zip(radii, radii[1:])):
            raise ConfigError("radii must be positive and strictly increasing")
        return radii

    # grids
    def r_grid(self) -> np.ndarray:
        n = round(self.r_max / self.r_step)
        return np.round(np.arange(n + 1) * self.r_step, 12)

    def beta_grid(self) -> np.ndarray:
        n = round(self.beta_max / self.beta_step)
        return np.round(np.arange(n + 1) * self.beta_step, 12)

    def sweep_betas(self) -> np.ndarray:
        g = self.beta_grid()
        return g[g >= self.beta_min - 1e-9 * self.beta_step]

    def energy_grid(self) -> np.ndarray:
        hi = self.energy_max or 0.9 * math.pi * self.r_max**2
        edges = np.linspace(self.energy_min, hi, self.energy_bins + 1)
        return 0.5 * (edges[:-1] + edges[1:])

    def table_params(self) -> dict:
        return {
            "beta0_orders": list(BETA0_ORDERS),
            "rhs_order": RHS_ORDER,
            "terminal_orders": list(TERMINAL_ORDERS),
            "rtol": self.tol,
        }

    def table_hash(self) -> str:
        return config_hash(self.r_grid(), self.beta_grid(), self.table_params())

    def cache_path(self) -> Path:
        return Path(self.cache) if self.cache else Path(self.out_dir) / "kernel_table.bdkt"

    # serialisation
    def to_text(self) -> str:
        lines = ["# resolved run configuration"]
        lines += [f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}" for k, v in asdict(self).items()]
        return "\n".join(lines) + "\n"

    def write_resolved(self, directory=None) -> Path:
        path = Path(directory or self.out_dir) / RESOLVED_NAME
        atomic_write_bytes(path, self.to_text().encode())
        return path

    def with_overrides(self, overrides: dict) -> "RunConfig":
        return replace(self, **_coerce(overrides))


_TYPES = {f.name: f.type for f in fields(RunConfig)}
_CASTS = {"float": float, "int": int, "str": str}


def _coerce(raw: dict) -> dict:
    out = {}
    for key, value in raw.items():
        name = key.strip().replace("-", "_")
        if name not in _TYPES:
            raise ConfigError(f"unknown configuration key {key!r}")
        cast = _CASTS[_TYPES[name]]
        try:
            value = cast(value) if cast is not int else float(value)
        except ValueError as exc:
            raise ConfigError(f"{name}: cannot parse {value!r}") from exc
        if cast is int:
            if not value.is_integer():
                raise ConfigError(f"{name} must be an integer, got {value!r}")
            value = int(value)
        out[name] = value
    return out


def parse_config_text(text: str) -> dict:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        raw[key] = value.strip("'\"")
    return raw


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the file at ``path``, then ``overrides`` (None values ignored)."""
    raw = parse_config_text(Path(path).read_text()) if path else {}
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return RunConfig(**_coerce(raw))
