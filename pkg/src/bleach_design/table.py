"""KernelTable container, interpolation and the on-disk cache format.

Binary layout (all little-endian)::

    b"BDKT"                       magic
    uint32  version (= 1)
    uint32  n_beta, n_r
    uint32  meta_len
    bytes   meta (UTF-8 JSON, meta_len bytes)
    float64 beta_grid[n_beta]
    float64 r_grid[n_r]
    float64 values[n_beta][n_r][n_r]   (row major)
    bytes   sha256 of everything above (32 bytes)

The s-grid equals the r-grid and is not stored separately.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["KernelTable", "TableError", "save_table", "load_table", "table_checksum", "export_csv"]

MAGIC = b"BDKT"
VERSION = 1
SYMMETRY_TOL = 1e-12


class TableError(ValueError):
    """A kernel table failed to load or violates an invariant."""


@dataclass
class KernelTable:
    r_grid: np.ndarray
    beta_grid: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.r_grid = np.asarray(self.r_grid, dtype=float)
        self.beta_grid = np.asarray(self.beta_grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        nb, nr = self.beta_grid.size, self.r_grid.size
        if self.values.shape != (nb, nr, nr):
            raise TableError(f"values shape {self.values.shape} does not match grids ({nb}, {nr}, {nr})")

    @property
    def s_grid(self) -> np.ndarray:
        return self.r_grid

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape

    def validate(self) -> None:
        """Raise :class:`TableError` naming the first violated invariant."""
        v = self.values
        if not np.all(np.isfinite(v)):
            raise TableError("kernel finiteness: table has non-finite entries")
        scale = np.max(np.abs(v), axis=(1, 2), keepdims=True)
        asym = np.abs(v - np.swapaxes(v, 1, 2))
        if np.any(asym > SYMMETRY_TOL * np.maximum(scale, 1e-300)):
            raise TableError(f"kernel symmetry: max asymmetry {asym.max():.3g}")
        if self.r_grid[0] == 0 and np.any(v[:, 0, :] != 0):
            raise TableError("kernel zero-argument: k(0, s) != 0")
        if np.any(np.diff(self.r_grid) <= 0) or np.any(np.diff(self.beta_grid) <= 0):
            raise TableError("grid ordering: grids must be strictly increasing")

    def beta_index(self, beta: float) -> int:
        """Index of ``beta`` on the beta grid (within 1e-9); KeyError otherwise."""
        i = int(np.argmin(np.abs(self.beta_grid - beta)))
        if abs(self.beta_grid[i] - beta) > 1e-9 * max(1.0, abs(beta)):
            raise KeyError(f"beta = {beta} is not a table node")
        return i

    def radius_index(self, r: float) -> int:
        i = int(np.argmin(np.abs(self.r_grid - r)))
        if abs(self.r_grid[i] - r) > 1e-9 * max(1.0, abs(r)):
            raise KeyError(f"r = {r} is not a table node")
        return i

    def slice_at(self, beta: float) -> np.ndarray:
        """k(., .; beta), exact on beta nodes, linear in beta between them."""
        b = self.beta_grid
        if not b[0] <= beta <= b[-1]:
            raise ValueError(f"beta = {beta} outside table range [{b[0]}, {b[-1]}]")
        j = int(np.clip(np.searchsorted(b, beta, side="right") - 1, 0, b.size - 2)) if b.size > 1 else 0
        if b.size == 1 or beta == b[j]:
            return self.values[j]
        t = (beta - b[j]) / (b[j + 1] - b[j])
        if t == 1.0:
            return self.values[j + 1]
        return (1.0 - t) * self.values[j] + t * self.values[j + 1]

    def interpolate(self, r, s, beta: float):
        """Bilinear in (r, s), linear in beta.  No extrapolation."""
        g = self.r_grid
        r = np.asarray(r, dtype=float)
        s = np.asarray(s, dtype=float)
        if np.any((r < g[0]) | (r > g[-1]) | (s < g[0]) | (s > g[-1])):
            raise ValueError(f"radius outside table range [{g[0]}, {g[-1]}]")
        K = self.slice_at(beta)

        def locate(x):
            i = np.clip(np.searchsorted(g, x, side="right") - 1, 0, g.size - 2)
            return i, (x - g[i]) / (g[i + 1] - g[i])

        i, tr = locate(r)
        j, ts = locate(s)
        out = (
            (1 - tr) * (1 - ts) * K[i, j]
            + tr * (1 - ts) * K[i + 1, j]
            + (1 - tr) * ts * K[i, j + 1]
            + tr * ts * K[i + 1, j + 1]
        )
        return out if np.ndim(out) else float(out)


def _encode(table: KernelTable) -> bytes:
    meta = json.dumps(table.meta, sort_keys=True).encode()
    head = MAGIC + struct.pack("<IIII", VERSION, table.beta_grid.size, table.r_grid.size, len(meta))
    body = (
        head
        + meta
        + table.beta_grid.astype("<f8").tobytes()
        + table.r_grid.astype("<f8").tobytes()
        + np.ascontiguousarray(table.values, dtype="<f8").tobytes()
    )
    return body + hashlib.sha256(body).digest()


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_table(table: KernelTable, path) -> str:
    """Write the table atomically; returns the sha256 checksum (hex)."""
    data = _encode(table)
    atomic_write_bytes(path, data)
    return data[-32:].hex()


def load_table(path, expected_hash: str | None = None, validate: bool = True) -> KernelTable:
    """Read and validate a table; raises :class:`TableError` naming the failed check.

    ``validate=False`` skips the kernel invariants (file integrity is always
    checked), so a damaged table can still be inspected.
    """
    data = Path(path).read_bytes()
    if len(data) < 4 + 16 + 32 or data[:4] != MAGIC:
        raise TableError("header: not a kernel table file")
    version, nb, nr, mlen = struct.unpack_from("<IIII", data, 4)
    if version != VERSION:
        raise TableError(f"header: unsupported version {version}")
    expected = 20 + mlen + 8 * (nb + nr + nb * nr * nr) + 32
    if len(data) != expected:
        raise TableError(f"length: file has {len(data)} bytes, expected {expected} (truncated?)")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise TableError("checksum: sha256 mismatch")
    off = 20
    try:
        meta = json.loads(data[off : off + mlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TableError(f"meta: {exc}") from exc
    off += mlen
    beta = np.frombuffer(data, "<f8", nb, off).astype(float)
    off += 8 * nb
    r = np.frombuffer(data, "<f8", nr, off).astype(float)
    off += 8 * nr
    values = np.frombuffer(data, "<f8", nb * nr * nr, off).astype(float).reshape(nb, nr, nr)
    table = KernelTable(r, beta, values, meta)
    if expected_hash is not None and meta.get("config_hash") != expected_hash:
        raise TableError("config hash: table was built with a different configuration")
    if "config_hash" in meta and "rtol" in meta:
        from .kernel import config_hash

        params = {k: meta[k] for k in ("beta0_orders", "rhs_order", "terminal_orders", "rtol")}
        if config_hash(r, beta, params) != meta["config_hash"]:
            raise TableError("config hash: stored hash does not match grids and parameters")
    if validate:
        table.validate()
    return table


def table_checksum(path) -> str:
    """The sha256 trailer of a table file (hex), without decoding the file."""
    with open(path, "rb") as fh:
        fh.seek(-32, os.SEEK_END)
        return fh.read(32).hex()


def export_csv(table: KernelTable, path) -> None:
    """One row per (beta, r, s) with header ``beta,r,s,k``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["beta", "r", "s", "k"])
    for b, beta in enumerate(table.beta_grid):
        for i, r in enumerate(table.r_grid):
            for j, s in enumerate(table.r_grid):
                w.writerow([repr(float(beta)), repr(float(r)), repr(float(s)), repr(float(table.values[b, i, j]))])
    atomic_write_bytes(path, buf.getvalue().encode())
