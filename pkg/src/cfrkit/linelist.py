"""Line-list ingestion and aggregation into daily case and death-lag counts."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import date
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import ParseError

__all__ = ["CaseRecord", "LineList", "EpidemicTable", "parse_csv", "aggregate"]


@dataclass(frozen=True)
class CaseRecord:
    """One confirmed case: its confirmation day and, if it died, its death day.

    Day indices count from day 0 of the epidemic; ``death_day`` is None while
    the outcome is unresolved (alive or still at risk).
    """

    confirm_day: int
    death_day: int | None = None

    def __post_init__(self) -> None:
        if self.confirm_day < 0:
            raise ValueError(f"confirm_day must be non-negative, got {self.confirm_day}")
        if self.death_day is not None and self.death_day < self.confirm_day:
            raise ValueError(
                f"death_day {self.death_day} precedes confirm_day {self.confirm_day}"
            )

    @property
    def lag(self) -> int | None:
        """Days from confirmation to death; None while unresolved."""
        if self.death_day is None:
            return None
        return self.death_day - self.confirm_day


@dataclass(frozen=True)
class LineList:
    """All case records of one epidemic; day 0 maps to ``epoch`` when known."""

    records: tuple[CaseRecord, ...]
    epoch: date | None = None

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[CaseRecord]:
        return iter(self.records)


def _parse_day(raw: str, epoch: date | None, line: int, column: str) -> int:
    raw = raw.strip()
    try:
        day = int(raw)
    except ValueError:
        try:
            parsed = date.fromisoformat(raw)
        except ValueError:
            raise ParseError(
                f"line {line}: invalid {column} {raw!r} (expected ISO date or day index)"
            ) from None
        if epoch is None:
            raise ParseError(
                f"line {line}: {column} is a calendar date but no epoch was given"
            )
        day = (parsed - epoch).days
    if day < 0:
        raise ParseError(f"line {line}: {column} {raw!r} falls before day 0")
    return day


def parse_csv(text: str | Iterable[str], epoch: date | None = None) -> LineList:
    """Parse a line-list CSV into case records with day indices.

    The header must name ``confirm_date`` and ``death_date`` columns. Values
    are ISO-8601 dates (converted against ``epoch`` as day 0) or bare
    non-negative day indices. An empty ``death_date`` means the case has no
    recorded death. Blank lines and lines starting with ``#`` are skipped.

    Args:
        text: CSV content as a string or an iterable of lines.
        epoch: calendar date of day 0; required when any field is a date.

    Returns:
        LineList with one record per data row, in file order.

    Raises:
        ParseError: missing header columns, an unparseable or negative day,
            or a death date before the confirmation date; messages name the
            offending line.
    """
    stream = io.StringIO(text) if isinstance(text, str) else iter(text)
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("line 1: missing header row") from None
    names = [name.strip() for name in header]
    try:
        confirm_col = names.index("confirm_date")
        death_col = names.index("death_date")
    except ValueError:
        raise ParseError(
            "line 1: header must contain confirm_date and death_date columns"
        ) from None

    records: list[CaseRecord] = []
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if row[0].lstrip().startswith("#"):
            continue
        confirm_raw = row[confirm_col] if confirm_col < len(row) else ""
        if not confirm_raw.strip():
            raise ParseError(f"line {line}: empty confirm_date")
        confirm = _parse_day(confirm_raw, epoch, line, "confirm_date")
        death_raw = row[death_col] if death_col < len(row) else ""
        death = None
        if death_raw.strip():
            death = _parse_day(death_raw, epoch, line, "death_date")
            if death < confirm:
                raise ParseError(f"death precedes confirmation at line {line}")
        records.append(CaseRecord(confirm, death))
    return LineList(tuple(records), epoch)


@dataclass(frozen=True, eq=False)
class EpidemicTable:
    """Daily confirmed-case counts plus a (day, lag) death table.

    ``cases[d]`` counts cases confirmed on day d. ``deaths[d, k]`` counts
    cases confirmed on day d that died exactly k days later. Rows may sum to
    less than ``cases[d]``; the remainder survived or is unresolved. Arrays
    are copied on construction and frozen.
    """

    cases: np.ndarray
    deaths: np.ndarray

    def __post_init__(self) -> None:
        cases = np.array(self.cases, dtype=np.int64, copy=True)
        deaths = np.array(self.deaths, dtype=np.int64, copy=True)
        if cases.ndim != 1:
            raise ValueError("cases must be one-dimensional")
        if deaths.ndim != 2:
            raise ValueError("deaths must be two-dimensional")
        if deaths.shape[0] != cases.shape[0]:
            raise ValueError("deaths must have one row per day in cases")
        if deaths.shape[1] == 0:
            deaths = np.zeros((deaths.shape[0], 1), dtype=np.int64)
        if np.any(cases < 0) or np.any(deaths < 0):
            raise ValueError("counts must be non-negative")
        if np.any(deaths.sum(axis=1) > cases):
            raise ValueError("more deaths than confirmed cases on some day")
        cases.setflags(write=False)
        deaths.setflags(write=False)
        object.__setattr__(self, "cases", cases)
        object.__setattr__(self, "deaths", deaths)

    @classmethod
    def from_sparse(
        cls, cases: Sequence[int], lag_counts: Mapping[int, Mapping[int, int]]
    ) -> "EpidemicTable":
        """Build a table from per-day ``{lag: count}`` mappings."""
        n = len(cases)
        width = 1 + max((k for row in lag_counts.values() for k in row), default=0)
        deaths = np.zeros((n, width), dtype=np.int64)
        for d, row in lag_counts.items():
            for k, count in row.items():
                deaths[d, k] = count
        return cls(np.asarray(cases, dtype=np.int64), deaths)

    @property
    def n_days(self) -> int:
        return int(self.cases.shape[0])

    @property
    def max_lag(self) -> int:
        return int(self.deaths.shape[1]) - 1

    @property
    def total_cases(self) -> int:
        return int(self.cases.sum())

    @property
    def total_deaths(self) -> int:
        return int(self.deaths.sum())

    # Cumulative tables; every query below is O(1) or O(t) thanks to these.
    @cached_property
    def _cum_cases(self) -> np.ndarray:
        return np.cumsum(self.cases)

    @cached_property
    def _cum_lag(self) -> np.ndarray:
        return np.cumsum(self.deaths, axis=1)

    @cached_property
    def _cum_day(self) -> np.ndarray:
        return np.cumsum(self.deaths, axis=0)

    def cumulative_cases(self, t: int) -> int:
        """Total cases confirmed on days 0..t."""
        if not 0 <= t < self.n_days:
            raise ValueError(f"day {t} outside table (0..{self.n_days - 1})")
        return int(self._cum_cases[t])

    def deaths_by(self, d: int, t: int) -> int:
        """Cases confirmed on day d that died on or before day t."""
        if not 0 <= d < self.n_days:
            raise ValueError(f"day {d} outside table (0..{self.n_days - 1})")
        if d > t:
            raise ValueError(f"confirmation day {d} is after query day {t}")
        return int(self._cum_lag[d, min(t - d, self.max_lag)])

    def observed_deaths(self, t: int) -> np.ndarray:
        """Vector of ``deaths_by(d, t)`` for d = 0..min(t, n_days - 1)."""
        if t < 0:
            raise ValueError("t must be non-negative")
        upto = min(t, self.n_days - 1)
        d = np.arange(upto + 1)
        return self._cum_lag[d, np.minimum(t - d, self.max_lag)]

    def final_deaths(self) -> np.ndarray:
        """Per-day counts of cases with a recorded death at any lag."""
        return self.deaths.sum(axis=1)


def aggregate(linelist: LineList) -> EpidemicTable:
    """Count confirmations per day and deaths per (confirmation day, lag) cell.

    The table spans days 0..max confirmation day, so the total over ``cases``
    equals the number of records.
    """
    if not linelist.records:
        return EpidemicTable(np.zeros(0, dtype=np.int64), np.zeros((0, 1), dtype=np.int64))
    n = max(rec.confirm_day for rec in linelist.records) + 1
    lags = [rec.lag for rec in linelist.records if rec.lag is not None]
    width = max(lags, default=0) + 1
    cases = np.zeros(n, dtype=np.int64)
    deaths = np.zeros((n, width), dtype=np.int64)
    for rec in linelist.records:
        cases[rec.confirm_day] += 1
        if rec.death_day is not None:
            deaths[rec.confirm_day, rec.death_day - rec.confirm_day] += 1
    return EpidemicTable(cases, deaths)
