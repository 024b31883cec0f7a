import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from bleach_design.validation import ValidationContext  # noqa: E402

# fixed example sequence so every run checks the same cases
settings.register_profile("repro", derandomize=True, deadline=None)
settings.load_profile("repro")

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def ctx(tmp_path_factory):
    """Shared tables: the reference grid is tabulated once per session."""
    cache = tmp_path_factory.mktemp("tables") / "reference.bdkt"
    return ValidationContext(cache=cache, seed=0)


@pytest.fixture(scope="session")
def reference_table(ctx):
    return ctx.reference_table()


@pytest.fixture(scope="session")
def small_table(ctx):
    """r in 0..2 step 0.1, beta in 0..16 step 1."""
    return ctx.small_table()


@pytest.fixture(scope="session")
def sweep(reference_table):
    from bleach_design.optimizer import sweep_beta

    return sweep_beta(reference_table)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
