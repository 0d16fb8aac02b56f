"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from cfrkit import EpidemicTable


@pytest.fixture
def acceptance_report(capsys):
    """Print a line that bypasses pytest capture, for acceptance summaries."""

    def _report(line: str) -> None:
        with capsys.disabled():
            print(line)

    return _report


def random_table(
    rng: np.random.Generator,
    n_days: int | None = None,
    max_cases: int = 20,
    max_lag: int = 4,
) -> EpidemicTable:
    """A random small epidemic table with at least one case on day 0."""
    if n_days is None:
        n_days = int(rng.integers(1, 8))
    cases = rng.integers(0, max_cases + 1, size=n_days)
    cases[0] = max(int(cases[0]), 1)
    deaths = np.zeros((n_days, max_lag + 1), dtype=np.int64)
    for d in range(n_days):
        total = int(rng.integers(0, cases[d] + 1))
        if total:
            lags = rng.integers(0, max_lag + 1, size=total)
            np.add.at(deaths[d], lags, 1)
    return EpidemicTable(cases, deaths)
