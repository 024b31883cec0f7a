"""Command-line interface: ``bleach-design <command> [options]``.

Commands
--------
tabulate   build (or reuse) the kernel table cache
optimize   Problem 1 sweep over beta; sweep CSV/JSON, figure data and SVGs
problem2   energy-constrained map over (beta, energy); CSV and SVG heat map
validate   run the acceptance checks; JSON report, nonzero exit on failure
estimate   Monte-Carlo estimation experiment for one shape; JSON report

Every command reads defaults, then ``--config FILE`` (flat ``key = value``),
then the command-line flags, and writes the resolved configuration to
``<out-dir>/resolved_config.txt``.  All files are written atomically.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import figures
from .config import ConfigError, RunConfig, load_config
from .core import BleachShape, ExperimentGeometry
from .estimation import run_estimation_experiment
from .kernel import kernel_ode_march
from .optimizer import problem2_map, sweep_beta
from .table import TableError, atomic_write_bytes, export_csv, load_table, save_table, table_checksum
from .validation import CheckResult, ValidationContext, _jsonable, is_reference_grid, run_all, table_checks

log = logging.getLogger("bleach_design")

RADIUS_COLUMNS = ["r1", "r2", "r3", "r4"]
FIGURE1_NOTE = (
    "# log = natural log of the dimensionless kernel sum; the shape-independent "
    "prefactor 32 pi beta^3 T^3 / R^2 is omitted"
)


class CliError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# file helpers
# --------------------------------------------------------------------------

def write_text(path: Path, text: str) -> Path:
    atomic_write_bytes(path, text.encode())
    return path


def write_csv(path: Path, header, rows, comment: str | None = None) -> Path:
    buf = io.StringIO()
    if comment:
        buf.write(comment + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else _fmt(v) for v in row])
    return write_text(path, buf.getvalue())


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else repr(float(v))
    return str(v)


def read_csv(path) -> list[dict]:
    """Rows of a CSV written by this module, skipping ``#`` comment lines."""
    with open(path, newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


def _radii_cells(radii, n=4):
    return [radii[k] if k < len(radii) else None for k in range(n)]


def read_sweep_csv(path) -> list[dict]:
    """Parse ``sweep.csv`` back into beta, nstar, radii, kernel_sum, s_int."""
    out = []
    for row in read_csv(path):
        radii = tuple(float(row[c]) for c in RADIUS_COLUMNS if row[c] != "")
        out.append({
            "beta": float(row["beta"]),
            "nstar": int(row["nstar"]),
            "radii": radii,
            "kernel_sum": float(row["kernel_sum"]),
            "s_int": float(row["s_int"]),
        })
    return out


def read_problem2_csv(path) -> list[dict]:
    out = []
    for row in read_csv(path):
        radii = tuple(float(row[c]) for c in RADIUS_COLUMNS if row[c] != "")
        out.append({
            "beta": float(row["beta"]),
            "energy": float(row["energy"]),
            "nstar": int(row["nstar"]),
            "radii": radii,
            "kernel_sum": float(row["kernel_sum"]) if row["kernel_sum"] else None,
        })
    return out


# --------------------------------------------------------------------------
# table access
# --------------------------------------------------------------------------

def _require_table(cfg: RunConfig):
    path = cfg.cache_path()
    if not path.exists():
        raise CliError(
            f"no kernel table at {path}; build it first with "
            f"`bleach-design tabulate` using the same grid options (and --cache {path})"
        )
    try:
        table = load_table(path)
    except TableError as exc:
        raise CliError(f"kernel table {path} is unusable ({exc}); rebuild it with `bleach-design tabulate --force`") from exc
    if table.meta.get("config_hash") != cfg.table_hash():
        raise CliError(
            f"kernel table {path} was built for a different grid or tolerance; "
            "rerun `bleach-design tabulate` with the current options"
        )
    return table


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_tabulate(cfg: RunConfig, force: bool = False, csv_path: str | None = None) -> int:
    path = cfg.cache_path()
    want = cfg.table_hash()
    table = None
    if path.exists() and not force:
        try:
            table = load_table(path, expected_hash=want)
            log.info("cache hit: %s matches config hash %s; nothing to compute", path, want[:12])
        except TableError as exc:
            log.info("cache at %s not reusable (%s); recomputing", path, exc)
    if table is None:
        r, b = cfg.r_grid(), cfg.beta_grid()
        log.info("tabulating k on %d beta x %d r x %d s nodes", b.size, r.size, r.size)
        try:
            table = kernel_ode_march(r, beta_grid=b, tol=cfg.tol, progress=log.info)
        except TableError as exc:
            raise CliError(f"tabulated kernel failed an invariant: {exc}") from exc
        try:
            save_table(table, path)
        except OSError as exc:
            raise CliError(f"cannot write kernel table to {path}: {exc}") from exc
        log.info("built in %.1f s", table.meta.get("seconds", float("nan")))
    if csv_path:
        export_csv(table, csv_path)
        log.info("CSV export: %s", csv_path)
    cfg.write_resolved()
    nb, nr, ns = table.shape
    print(f"table {path}: {nb} x {nr} x {ns} (beta x r x s)")
    print(f"sha256 {table_checksum(path)}")
    return 0


def cmd_optimize(cfg: RunConfig) -> int:
    table = _require_table(cfg)
    out = Path(cfg.out_dir)
    report = sweep_beta(table, cfg.n_max, betas=cfg.sweep_betas(), progress=log.info)
    betas, nstar = report.betas, report.nstar

    sweep_rows = [
        [r.beta, r.nstar, *_radii_cells(r.overall_best.radii), r.overall_best.kernel_sum, r.s_int]
        for r in report.results
    ]
    write_csv(out / "sweep.csv", ["beta", "nstar", *RADIUS_COLUMNS, "kernel_sum", "s_int"], sweep_rows)
    sweep_json = {
        "results": [r.to_dict() for r in report.results],
        "transitions": [t.to_dict() for t in report.transitions],
        "anomalies": report.anomalies,
    }
    write_text(out / "sweep.json", json.dumps(_jsonable(sweep_json), indent=1) + "\n")
    write_csv(
        out / "transitions.csv",
        ["beta", "uncertainty", "from_n", "to_n"],
        [[t.beta, t.uncertainty, t.from_n, t.to_n] for t in report.transitions],
    )

    overall = np.log(report.overall_curve())
    per_n = {n: np.log(report.per_n_curve(n)) for n in range(1, cfg.n_max + 1)}
    log_cols = [per_n.get(n, np.full(betas.size, np.nan)) for n in range(1, 5)]
    write_csv(
        out / "figure1.csv",
        ["beta", "log_kernel_sum_overall", "nstar", "log_best_n1", "log_best_n2", "log_best_n3", "log_best_n4"],
        [[betas[i], overall[i], nstar[i], *(c[i] for c in log_cols)] for i in range(betas.size)],
        comment=FIGURE1_NOTE,
    )
    radii = np.full((betas.size, 4), np.nan)
    for i, r in enumerate(report.results):
        radii[i, : r.nstar] = r.overall_best.radii
    write_csv(out / "figure2.csv", ["beta", "nstar", *RADIUS_COLUMNS], [[betas[i], nstar[i], *radii[i]] for i in range(betas.size)])
    energy = report.energy_curve()
    write_csv(out / "figure3.csv", ["beta", "nstar", "energy"], [[betas[i], nstar[i], energy[i]] for i in range(betas.size)])

    transitions = [t.beta for t in report.transitions]
    write_text(out / "figure1.svg", figures.figure1_svg(betas, overall, nstar, per_n, transitions))
    write_text(out / "figure2.svg", figures.figure2_svg(betas, radii, nstar))
    write_text(out / "figure3.svg", figures.figure3_svg(betas, energy, nstar))
    cfg.write_resolved()

    for t in report.transitions:
        print(f"transition N {t.from_n} -> {t.to_n} at beta = {t.beta:.2f} +/- {t.uncertainty / 2:.2f}")
    for msg in report.anomalies:
        print(f"anomaly: {msg}")
    print(f"wrote sweep and figure data for {betas.size} beta values to {out}")
    return 0


def cmd_problem2(cfg: RunConfig) -> int:
    table = _require_table(cfg)
    out = Path(cfg.out_dir)
    result = problem2_map(table, cfg.energy_grid(), cfg.n_max, betas=cfg.sweep_betas(), progress=log.info)
    rows = []
    for i, beta in enumerate(result.beta_grid):
        for j, energy in enumerate(result.energy_grid):
            conf = result.configs[i][j]
            radii = conf.radii if conf else ()
            rows.append([beta, energy, int(result.nstar[i, j]), *_radii_cells(radii), conf.kernel_sum if conf else None])
    write_csv(out / "problem2.csv", ["beta", "energy", "nstar", *RADIUS_COLUMNS, "kernel_sum"], rows,
              comment="# nstar = 0 marks an energy bin no configuration reaches")
    write_text(out / "problem2.svg", figures.problem2_svg(result.beta_grid, result.energy_grid, result.nstar))
    cfg.write_resolved()
    filled = int(np.sum(result.nstar > 0))
    print(f"{filled} of {result.nstar.size} cells reachable")
    for n in range(1, cfg.n_max + 1):
        print(f"N* = {n}: {result.fraction(n):.1%}")
    return 0


def cmd_validate(cfg: RunConfig, checks: str | None = None) -> int:
    out = Path(cfg.out_dir)
    path = cfg.cache_path()
    table, results = None, []
    if path.exists():
        try:
            table = load_table(path, validate=False)
        except TableError as exc:
            results.append(CheckResult("T", "table file", False, str(exc)))
    if table is not None:
        for res in table_checks(table):
            print(res.line())
            results.append(res)
    include = None
    if checks is not None:
        include = {c.strip().upper() for c in checks.split(",") if c.strip() and c.strip().lower() != "table"}
    # the cached table is only reused (or written) when it is on the reference grid
    ref_cache = path if table is None or is_reference_grid(table) else None
    if table is not None and not all(r.passed for r in results):
        ref_cache, table = None, None
    ctx = ValidationContext(table, cache=ref_cache, seed=cfg.seed, progress=log.info)
    if include is None or include:
        results += run_all(ctx, include)
    report = {"passed": all(r.passed for r in results), "checks": [r.to_dict() for r in results]}
    write_text(out / "validation_report.json", json.dumps(_jsonable(report), indent=1) + "\n")
    cfg.write_resolved()
    failed = [r.name for r in results if not r.passed]
    print("all checks passed" if not failed else "FAILED: " + ", ".join(failed))
    return 0 if not failed else 1


def cmd_estimate(cfg: RunConfig) -> int:
    shape = BleachShape(cfg.shape_radii())
    geom = ExperimentGeometry.from_beta(cfg.beta, sigma=cfg.sigma)
    rep = run_estimation_experiment(shape, geom, n_trials=cfg.trials, seed=cfg.seed)
    out = Path(cfg.out_dir)
    write_text(out / "estimation.json", rep.to_json(indent=1) + "\n")
    cfg.write_resolved()
    print(
        f"predicted {rep.predicted:.4g}, empirical {rep.empirical:.4g} +/- {rep.standard_error:.2g}, "
        f"ratio {rep.ratio:.3f}, failures {len(rep.failures)}"
    )
    return 0


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

_COMMON = [
    ("--cache", str, "kernel table file (default <out-dir>/kernel_table.bdkt)"),
    ("--out-dir", str, "output directory"),
    ("--beta-min", float, "smallest beta of the sweep"),
    ("--beta-max", float, "largest beta of the table and sweep"),
    ("--beta-step", float, "beta grid spacing"),
    ("--r-max", float, "largest scaled radius"),
    ("--r-step", float, "radius grid spacing"),
    ("--n-max", int, "maximal number of jumps (1..4)"),
    ("--seed", int, "random seed"),
    ("--tol", float, "relative tolerance of the kernel march"),
    ("--energy-bins", int, "number of energy bins (problem2)"),
    ("--energy-min", float, "lower edge of the energy range"),
    ("--energy-max", float, "upper edge of the energy range (0: 0.9 pi r_max^2)"),
    ("--radii", str, "jump radii of the shape, comma separated (estimate)"),
    ("--beta", float, "beta of the estimation experiment"),
    ("--sigma", float, "noise level relative to u_ref (estimate)"),
    ("--trials", int, "Monte-Carlo trials (estimate)"),
]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file")
    common.add_argument("-q", "--quiet", action="store_true", help="only print results")
    for flag, typ, helptext in _COMMON:
        common.add_argument(flag, type=typ, help=helptext)

    parser = argparse.ArgumentParser(prog="bleach-design", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    tab = sub.add_parser("tabulate", parents=[common], help="build the kernel table cache")
    tab.add_argument("--force", action="store_true", help="recompute even if the cache matches")
    tab.add_argument("--csv", help="also export the table as CSV to this path")
    sub.add_parser("optimize", parents=[common], help="Problem 1 sweep and figure data")
    sub.add_parser("problem2", parents=[common], help="energy-constrained map")
    val = sub.add_parser("validate", parents=[common], help="run the acceptance checks")
    val.add_argument("--checks", help="comma separated subset, e.g. AC2,AC7 ('table' for table checks only)")
    sub.add_parser("estimate", parents=[common], help="Monte-Carlo estimation experiment")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s", stream=sys.stderr)
    overrides = {flag[2:].replace("-", "_"): getattr(args, flag[2:].replace("-", "_")) for flag, _, _ in _COMMON}
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "tabulate":
            return cmd_tabulate(cfg, force=args.force, csv_path=args.csv)
        if args.command == "optimize":
            return cmd_optimize(cfg)
        if args.command == "problem2":
            return cmd_problem2(cfg)
        if args.command == "validate":
            return cmd_validate(cfg, args.checks)
        return cmd_estimate(cfg)
    except (ConfigError, CliError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
