import csv

import numpy as np
import pytest

from bleach_design.kernel import kernel_ode_march
from bleach_design.table import KernelTable, TableError, export_csv, load_table, save_table, table_checksum


@pytest.fixture(scope="module")
def tiny():
    return kernel_ode_march([0.0, 0.5, 1.0, 1.5], beta_grid=[0.0, 1.0, 2.0, 3.0])


def test_round_trip_is_exact(tiny, tmp_path):
    path = tmp_path / "t.bdkt"
    digest = save_table(tiny, path)
    assert digest == table_checksum(path)
    back = load_table(path, expected_hash=tiny.meta["config_hash"])
    assert np.array_equal(back.values, tiny.values)
    assert np.array_equal(back.r_grid, tiny.r_grid) and np.array_equal(back.beta_grid, tiny.beta_grid)
    assert back.meta == tiny.meta
    assert save_table(back, tmp_path / "u.bdkt") == digest


def test_truncated_file_rejected(tiny, tmp_path):
    path = tmp_path / "t.bdkt"
    save_table(tiny, path)
    path.write_bytes(path.read_bytes()[:-10])
    with pytest.raises(TableError, match="length"):
        load_table(path)


def test_corrupted_file_rejected(tiny, tmp_path):
    path = tmp_path / "t.bdkt"
    save_table(tiny, path)
    data = bytearray(path.read_bytes())
    data[-100] ^= 1
    path.write_bytes(bytes(data))
    with pytest.raises(TableError, match="checksum"):
        load_table(path)
    path.write_bytes(b"nope" + bytes(60))
    with pytest.raises(TableError, match="header"):
        load_table(path)


def test_asymmetric_table_rejected(tiny, tmp_path):
    bad = KernelTable(tiny.r_grid, tiny.beta_grid, tiny.values.copy(), dict(tiny.meta))
    bad.values[2, 1, 2] *= 1.001
    path = tmp_path / "bad.bdkt"
    save_table(bad, path)
    with pytest.raises(TableError, match="kernel symmetry"):
        load_table(path)
    assert load_table(path, validate=False).values[2, 1, 2] == bad.values[2, 1, 2]


def test_hash_mismatch_rejected(tiny, tmp_path):
    path = tmp_path / "t.bdkt"
    save_table(tiny, path)
    with pytest.raises(TableError, match="config hash"):
        load_table(path, expected_hash="0" * 64)
    forged = KernelTable(tiny.r_grid, tiny.beta_grid, tiny.values, dict(tiny.meta, rtol=1.0))
    save_table(forged, path)
    with pytest.raises(TableError, match="config hash"):
        load_table(path)


def test_validate_names_each_invariant(tiny):
    v = tiny.values.copy()
    v[1, 0, 2] = 1e-3
    v[1, 2, 0] = 1e-3
    with pytest.raises(TableError, match="zero-argument"):
        KernelTable(tiny.r_grid, tiny.beta_grid, v).validate()
    v = tiny.values.copy()
    v[0, 1, 1] = np.nan
    with pytest.raises(TableError, match="finiteness"):
        KernelTable(tiny.r_grid, tiny.beta_grid, v).validate()
    with pytest.raises(TableError):
        KernelTable(tiny.r_grid, tiny.beta_grid, v[:2])


def test_lookup_and_interpolation(tiny):
    assert tiny.beta_index(2.0) == 2
    assert tiny.radius_index(1.5) == 3
    with pytest.raises(KeyError):
        tiny.beta_index(2.5)
    with pytest.raises(KeyError):
        tiny.radius_index(0.7)
    assert tiny.interpolate(0.5, 1.0, 1.0) == tiny.values[1, 1, 2]
    mid = tiny.interpolate(0.75, 1.0, 1.5)
    expect = 0.25 * (tiny.values[1, 1, 2] + tiny.values[1, 2, 2] + tiny.values[2, 1, 2] + tiny.values[2, 2, 2])
    assert mid == pytest.approx(expect, rel=1e-14)
    np.testing.assert_allclose(tiny.slice_at(2.5), 0.5 * (tiny.values[2] + tiny.values[3]), rtol=1e-14)
    with pytest.raises(ValueError):
        tiny.interpolate(2.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        tiny.slice_at(4.0)


def test_csv_export(tiny, tmp_path):
    path = tmp_path / "k.csv"
    export_csv(tiny, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["beta", "r", "s", "k"]
    assert len(rows) == 1 + tiny.values.size
    b, i, j = 3, 2, 1
    row = rows[1 + (b * 4 + i) * 4 + j]
    assert [float(x) for x in row] == [3.0, 1.0, 0.5, tiny.values[b, i, j]]
