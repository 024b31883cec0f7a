"""Acceptance criteria, each at its pinned tolerance (see bleach_design.validation).

Every test prints one PASS/FAIL line; the lines are repeated in the
terminal summary under "acceptance criteria".
"""

from conftest import ACCEPTANCE_LINES

from bleach_design import validation as V
from bleach_design.optimizer import problem2_map


def _report(result):
    line = result.line()
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert result.passed, line


def test_ac1_kernel_route_equivalence(ctx):
    _report(V.check_route_equivalence(ctx))


def test_ac2_oracle_equivalence(ctx):
    _report(V.check_oracle_equivalence(ctx))


def test_ac3_transitions(ctx, sweep):
    _report(V.check_transitions(ctx, sweep))


def test_ac4_annulus_gain(ctx, sweep):
    _report(V.check_gain(ctx, sweep))


def test_ac5_problem2_majority(ctx, reference_table):
    _report(V.check_problem2(ctx, problem2_map(reference_table)))


def test_ac6_error_scaling(ctx):
    _report(V.check_error_scaling(ctx))


def test_ac7_invariant_suite(ctx):
    result = V.check_invariants(ctx)
    for name, part in result.details.items():
        print(f"    {'ok ' if part['passed'] else 'BAD'} {name}: {part['summary']}")
    _report(result)


def test_ac8_power_iteration(ctx):
    _report(V.check_power_iteration(ctx))

