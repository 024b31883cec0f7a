import json
import logging
import math

import numpy as np
import pytest

from bleach_design import cli
from bleach_design.config import RESOLVED_NAME, ConfigError, RunConfig, load_config, parse_config_text
from bleach_design.optimizer import problem2_map, sweep_beta
from bleach_design.table import KernelTable, load_table, save_table

GRID = ["--r-max", "2", "--r-step", "0.1", "--beta-max", "12", "--beta-step", "0.5"]


def run(capsys, *args):
    code = cli.main(list(args))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli")
    assert cli.main(["tabulate", "-q", "--out-dir", str(out), *GRID]) == 0
    return out


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nbeta_max = 4\nn-max = 3  # trailing\nradii = 0.5, 1.5\n")
    cfg = load_config(path, {"beta_step": "0.5", "seed": None})
    assert cfg.beta_max == 4.0 and cfg.n_max == 3 and cfg.beta_step == 0.5 and cfg.seed == 0
    assert cfg.shape_radii() == (0.5, 1.5)
    assert cfg.beta_grid()[-1] == 4.0 and cfg.beta_grid().size == 9
    assert load_config(None, parse_config_text(cfg.to_text())) == cfg


@pytest.mark.parametrize(
    "overrides",
    [
        {"beta_step": "-0.1"},
        {"beta_min": "5", "beta_max": "2"},
        {"r_step": "0.07"},
        {"n_max": "5"},
        {"n_max": "2.5"},
        {"radii": "1, 0.5"},
        {"tol": "0"},
        {"unknown_key": "1"},
        {"sigma": "abc"},
        {"energy_min": "10", "energy_max": "5"},
    ],
)
def test_config_rejects_invalid(overrides):
    with pytest.raises(ConfigError):
        load_config(None, overrides)


def test_config_syntax_error(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("beta_max 4\n")
    with pytest.raises(ConfigError, match="line 1"):
        load_config(path)


def test_default_table_shape():
    cfg = RunConfig()
    assert (cfg.beta_grid().size, cfg.r_grid().size) == (201, 101)
    assert cfg.beta_grid()[1] == 0.1 and cfg.r_grid()[-1] == 5.0


def test_tabulate_cache_hit(workdir, capsys, caplog):
    with caplog.at_level(logging.INFO, logger="bleach_design"):
        code, out, _ = run(capsys, "tabulate", "--out-dir", str(workdir), *GRID)
    assert code == 0 and "cache hit" in caplog.text and "tabulating" not in caplog.text
    assert "sha256" in out and "25 x 21 x 21" in out
    assert (workdir / RESOLVED_NAME).exists()


def test_tabulate_csv_export(workdir, tmp_path, capsys):
    code, _, _ = run(capsys, "tabulate", "-q", "--out-dir", str(workdir), *GRID, "--csv", str(tmp_path / "k.csv"))
    assert code == 0
    assert (tmp_path / "k.csv").read_text().splitlines()[0] == "beta,r,s,k"


def test_tabulate_unwritable(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code, _, err = run(capsys, "tabulate", "-q", "--cache", str(blocker / "t.bdkt"), "--r-max", "1", "--r-step", "0.5",
                       "--beta-max", "1", "--beta-step", "0.5", "--out-dir", str(tmp_path / "o"))
    assert code == 2 and "error" in err


def test_optimize_outputs_and_round_trip(workdir, capsys):
    code, out, _ = run(capsys, "optimize", "-q", "--out-dir", str(workdir), *GRID)
    assert code == 0
    table = load_table(workdir / "kernel_table.bdkt")
    report = sweep_beta(table)
    parsed = cli.read_sweep_csv(workdir / "sweep.csv")
    assert len(parsed) == len(report.results)
    for row, res in zip(parsed, report.results):
        assert row == {
            "beta": res.beta,
            "nstar": res.nstar,
            "radii": res.overall_best.radii,
            "kernel_sum": res.overall_best.kernel_sum,
            "s_int": res.s_int,
        }
    fig1 = cli.read_csv(workdir / "figure1.csv")
    assert list(fig1[0]) == ["beta", "log_kernel_sum_overall", "nstar", "log_best_n1", "log_best_n2", "log_best_n3", "log_best_n4"]
    assert (workdir / "figure1.csv").read_text().startswith("# log = natural log")
    assert float(fig1[3]["log_kernel_sum_overall"]) == math.log(report.results[3].overall_best.kernel_sum)
    row10 = next(r for r in fig1 if float(r["beta"]) == 10.0)
    assert row10["nstar"] == "3"
    found = [(t["from_n"], t["to_n"], t["beta"]) for t in cli.read_csv(workdir / "transitions.csv")]
    assert found == [(str(t.from_n), str(t.to_n), repr(t.beta)) for t in report.transitions]
    assert json.loads((workdir / "sweep.json").read_text())["transitions"] == [t.to_dict() for t in report.transitions]
    for name in ("figure1", "figure2", "figure3"):
        svg = (workdir / f"{name}.svg").read_text()
        assert svg.startswith("<svg") and "<polyline" in svg and svg.rstrip().endswith("</svg>")
    for t in report.transitions:
        assert f"{t.from_n} -> {t.to_n}" in out


def test_outputs_are_deterministic(workdir, capsys):
    run(capsys, "optimize", "-q", "--out-dir", str(workdir), *GRID)
    first = {p.name: p.read_bytes() for p in workdir.iterdir() if p.suffix in (".csv", ".json", ".svg")}
    run(capsys, "optimize", "-q", "--out-dir", str(workdir), *GRID)
    second = {p.name: p.read_bytes() for p in workdir.iterdir() if p.suffix in (".csv", ".json", ".svg")}
    assert first == second
    assert not [p for p in workdir.iterdir() if p.name.endswith(".tmp")]


def test_problem2_outputs(workdir, capsys):
    code, out, _ = run(capsys, "problem2", "-q", "--out-dir", str(workdir), *GRID, "--energy-bins", "15")
    assert code == 0 and "N* = 4" in out
    rows = cli.read_problem2_csv(workdir / "problem2.csv")
    assert len(rows) == 25 * 15
    assert {r["nstar"] for r in rows} <= {0, 1, 2, 3, 4}
    table = load_table(workdir / "kernel_table.bdkt")
    m = problem2_map(table, RunConfig(r_max=2, r_step=0.1, energy_bins=15).energy_grid())
    for row in rows[:40]:
        i = int(np.argmin(abs(m.beta_grid - row["beta"])))
        j = int(np.argmin(abs(m.energy_grid - row["energy"])))
        assert row["nstar"] == m.nstar[i, j]
        conf = m.configs[i][j]
        assert row["radii"] == (conf.radii if conf else ())
    assert "<rect" in (workdir / "problem2.svg").read_text()


def test_missing_table_names_tabulate(tmp_path, capsys):
    code, _, err = run(capsys, "optimize", "--out-dir", str(tmp_path))
    assert code == 2 and "tabulate" in err


def test_mismatched_table_rejected(workdir, capsys):
    code, _, err = run(capsys, "optimize", "--out-dir", str(workdir), *GRID[:-1], "0.25")
    assert code == 2 and "tabulate" in err


def test_validate_reports_asymmetry(workdir, tmp_path, capsys):
    table = load_table(workdir / "kernel_table.bdkt")
    bad = KernelTable(table.r_grid, table.beta_grid, table.values.copy(), dict(table.meta))
    bad.values[4, 3, 7] *= 1.01
    save_table(bad, tmp_path / "kernel_table.bdkt")
    code, out, _ = run(capsys, "validate", "-q", "--out-dir", str(tmp_path), "--checks", "table")
    assert code == 1 and "FAIL" in out and "kernel symmetry" in out
    report = json.loads((tmp_path / "validation_report.json").read_text())
    failed = [c["name"] for c in report["checks"] if not c["passed"]]
    assert failed == ["kernel symmetry"] and report["passed"] is False


def test_validate_clean_table_subset(workdir, capsys):
    code, out, _ = run(capsys, "validate", "-q", "--out-dir", str(workdir), "--checks", "table,AC8")
    assert code == 0 and "AC8" in out and "all checks passed" in out


def test_estimate_writes_report(tmp_path, capsys):
    code, out, _ = run(capsys, "estimate", "-q", "--out-dir", str(tmp_path), "--radii", "1.0,2.0", "--sigma", "0.05",
                       "--trials", "4", "--seed", "3")
    assert code == 0 and "ratio" in out
    rep = json.loads((tmp_path / "estimation.json").read_text())
    assert rep["seed"] == 3 and rep["shape"] == [1.0, 2.0] and len(rep["estimates"]) == 4
    assert "trials = 4" in (tmp_path / RESOLVED_NAME).read_text()


def test_bad_flag_value_is_reported(tmp_path, capsys):
    code, _, err = run(capsys, "estimate", "--out-dir", str(tmp_path), "--radii", "2,1")
    assert code == 2 and "radii" in err


def test_coarse_config_is_fast(tmp_path, capsys):
    import time

    t0 = time.perf_counter()
    code, out, _ = run(capsys, "tabulate", "-q", "--out-dir", str(tmp_path), "--r-step", "0.25", "--beta-step", "1")
    assert code == 0 and "21 x 21 x 21" in out
    assert time.perf_counter() - t0 < 60
