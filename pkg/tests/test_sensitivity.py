import math

import numpy as np
import pytest

from bleach_design.core import BleachShape, ExperimentGeometry, SensitivityValue, sensitivity_prefactor
from bleach_design.forward_model import oracle_sensitivity
from bleach_design.sensitivity import alternating_sum, shape_energy, shape_sensitivity
from bleach_design.table import KernelTable


def test_alternating_sum_explicit():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(4, 4))
    K = A + A.T
    explicit = sum((-1) ** (j + k) * K[j, k] for j in range(4) for k in range(4))
    assert alternating_sum(K) == pytest.approx(explicit, rel=1e-14)


def test_shape_jump_conventions():
    s = BleachShape((0.2, 0.5, 0.9))
    assert list(s.jump_signs) == [-1.0, 1.0, -1.0]
    assert s.occupied_intervals() == [(0.0, 0.2), (0.5, 0.9)]
    assert s.energy == pytest.approx(math.pi * (0.04 + 0.81 - 0.25))
    assert shape_energy(BleachShape.annulus(1.0, 2.0)) == pytest.approx(3 * math.pi)
    assert list(s.indicator(np.array([0.1, 0.3, 0.7, 1.0]))) == [1, 0, 1, 0]
    for bad in [(), (0.0, 1.0), (1.0, 1.0), (2.0, 1.0)]:
        with pytest.raises(ValueError):
            BleachShape(bad)


@pytest.mark.parametrize("radii", [(0.35,), (0.25, 1.4), (0.3, 0.7, 1.05), (0.4, 0.85, 1.2, 1.75)])
@pytest.mark.parametrize("beta", [0.7, 5.0, 14.0])
def test_table_route_matches_oracle(reference_table, radii, beta):
    shape = BleachShape(radii)
    geom = ExperimentGeometry.from_beta(beta, R=2.0, T=0.7)
    tab = shape_sensitivity(shape, reference_table, beta, geom)
    ref = oracle_sensitivity(shape, geom)
    assert tab.s_int == pytest.approx(ref.s_int, rel=1e-4)
    assert tab.prefactor == pytest.approx(sensitivity_prefactor(beta, 2.0, 0.7))


def test_range_errors(reference_table):
    with pytest.raises(ValueError):
        shape_sensitivity(BleachShape.disk(6.0), reference_table, 1.0)
    with pytest.raises(ValueError):
        shape_sensitivity(BleachShape.disk(1.0), reference_table, 25.0)


def test_beta_zero_sensitivity_is_zero(reference_table):
    res = shape_sensitivity(BleachShape.disk(1.0), reference_table, 0.0)
    assert res.s_int == 0.0 and res.kernel_sum > 0


def test_negative_sum_clamped_or_rejected():
    r = np.array([0.0, 1.0, 2.0])
    vals = np.array([[[0, 0, 0], [0, 1.0, 1.0], [0, 1.0, 1.0 - 1e-12]]] * 2)
    tab = KernelTable(r, np.array([0.0, 1.0]), vals)
    res = shape_sensitivity(BleachShape((1.0, 2.0)), tab, 1.0)
    assert res.kernel_sum == 0.0 and res.warnings
    vals[:, 2, 2] = 0.5
    with pytest.raises(ValueError, match="negative"):
        shape_sensitivity(BleachShape((1.0, 2.0)), KernelTable(r, np.array([0.0, 1.0]), vals), 1.0)


def test_value_serialisation():
    v = SensitivityValue(kernel_sum=2.0, prefactor=3.0, beta=1.0)
    assert v.s_int == 6.0
    assert v.to_dict()["s_int"] == 6.0
