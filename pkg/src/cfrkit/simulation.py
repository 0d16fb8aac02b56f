"""Synthetic epidemics and replicate studies of estimator bias and coverage.

A Scenario fixes the case curve, the daily fatality probabilities, and the
delay model; replicates then draw per-day binomial death counts and i.i.d.
delays. Studies aggregate estimator means, interval coverage, and interval
length over replicates on a fixed evaluation grid.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from typing import Sequence

import numpy as np

from .estimators import DailyRates, DelaySchedule, EstimateSeries, estimate_series
from .linelist import EpidemicTable
from .survival import SurvivalModel

__all__ = [
    "StepRates",
    "Scenario",
    "ReplicateResult",
    "CoverageSummary",
    "StudyResult",
    "build_curve",
    "simulate_replicate",
    "run_study",
    "load_example_arm",
    "illustrative_daily_rates",
]


@dataclass(frozen=True)
class StepRates:
    """Daily fatality probability c1 through day d_star - 1, c2 from d_star on."""

    c1: float
    c2: float
    d_star: int

    def __post_init__(self) -> None:
        for name, value in (("c1", self.c1), ("c2", self.c2)):
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must lie strictly in (0, 1), got {value}")
        if self.d_star < 0:
            raise ValueError("d_star must be non-negative")


@dataclass(frozen=True, eq=False)
class Scenario:
    """Monte Carlo configuration: case curve, daily rates, delay model.

    ``rising_arm`` is the first half of the case curve; with ``symmetric``
    it is mirrored to a peak, then padded with zero-case days up to
    ``horizon``. ``p_spec`` is either explicit per-day rates or a step.
    ``delay`` is a single model or a per-day schedule. ``seed`` and
    ``replicates`` pin down the whole study.
    """

    rising_arm: np.ndarray
    symmetric: bool
    p_spec: DailyRates | StepRates
    delay: SurvivalModel | DelaySchedule
    horizon: int
    seed: int = 0
    replicates: int = 1

    def __post_init__(self) -> None:
        arm = np.array(self.rising_arm, dtype=np.int64, copy=True)
        if arm.ndim != 1 or arm.size == 0:
            raise ValueError("rising_arm must be a non-empty vector")
        if np.any(arm < 0):
            raise ValueError("rising_arm counts must be non-negative")
        if arm.sum() == 0:
            raise ValueError("rising_arm must contain at least one case")
        arm.setflags(write=False)
        object.__setattr__(self, "rising_arm", arm)
        span = arm.size * (2 if self.symmetric else 1)
        if self.horizon + 1 < span:
            raise ValueError(
                f"horizon {self.horizon} shorter than the constructed curve "
                f"({span} days)"
            )
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if isinstance(self.p_spec, StepRates):
            support = np.nonzero(self.curve)[0]
            if support.size and self.p_spec.d_star > int(support[-1]):
                raise ValueError("d_star falls outside the case-curve support")
        elif isinstance(self.p_spec, DailyRates):
            if len(self.p_spec) < self.horizon + 1:
                raise ValueError("daily rates must cover days 0..horizon")
        else:
            raise TypeError("p_spec must be DailyRates or StepRates")

    @cached_property
    def curve(self) -> np.ndarray:
        return build_curve(self)

    @cached_property
    def daily_rates(self) -> DailyRates:
        """Rates over days 0..horizon, whichever way p_spec was given."""
        if isinstance(self.p_spec, DailyRates):
            return DailyRates(self.p_spec.p[: self.horizon + 1])
        step = self.p_spec
        d = np.arange(self.horizon + 1)
        return DailyRates(np.where(d < step.d_star, step.c1, step.c2))

    @cached_property
    def schedule(self) -> DelaySchedule:
        if isinstance(self.delay, DelaySchedule):
            return self.delay
        return DelaySchedule(self.delay)


def build_curve(scenario: Scenario) -> np.ndarray:
    """Daily case counts over days 0..horizon.

    The rising arm, mirrored around the peak when symmetric, then zero-case
    days out to the horizon so late cohorts can resolve.
    """
    arm = scenario.rising_arm
    curve = np.concatenate([arm, arm[::-1]]) if scenario.symmetric else arm
    out = np.zeros(scenario.horizon + 1, dtype=np.int64)
    out[: curve.size] = curve
    return out


def simulate_replicate(scenario: Scenario, replicate_index: int) -> EpidemicTable:
    """Draw one synthetic epidemic.

    Each day's death count is Binomial(c_d, p_d); each death gets an i.i.d.
    delay from the day's model. The stream is seeded with
    SeedSequence(entropy=seed, spawn_key=(replicate_index,)), so replicates
    are independent and reproducible in any order or in parallel.
    """
    if replicate_index < 0:
        raise ValueError("replicate_index must be non-negative")
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=scenario.seed, spawn_key=(int(replicate_index),))
    )
    curve = scenario.curve
    p = scenario.daily_rates.p
    n_die = rng.binomial(curve, p)
    schedule = scenario.schedule
    if schedule.is_constant:
        lags = schedule.model_for(0).sample(int(n_die.sum()), rng)
        day_of = np.repeat(np.arange(curve.size), n_die)
    else:
        parts = [schedule.model_for(d).sample(int(n_die[d]), rng) for d in range(curve.size)]
        lags = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
        day_of = np.repeat(np.arange(curve.size), n_die)
    width = int(lags.max()) + 1 if lags.size else 1
    deaths = np.zeros((curve.size, width), dtype=np.int64)
    np.add.at(deaths, (day_of, lags), 1)
    return EpidemicTable(curve, deaths)


@dataclass(frozen=True, eq=False)
class ReplicateResult(object):
    """One replicate's estimate series plus per-day interval hit and length."""

    series: EstimateSeries
    ci_hit: np.ndarray
    ci_length: np.ndarray


@dataclass(frozen=True, eq=False)
class CoverageSummary(object):
    """Per-day fraction of replicates whose interval covered the true rate."""

    days: np.ndarray
    r_t: np.ndarray
    coverage: np.ndarray
    coverage_se: np.ndarray
    mean_ci_length: np.ndarray


@dataclass(frozen=True, eq=False)
class StudyResult(object):
    """Replicate-averaged estimator values on the evaluation grid.

    ``mean_*``/``se_*`` pairs give Monte Carlo means and standard errors of
    the mean; ``cfr_true`` is the target the intervals should cover.
    """

    days: np.ndarray
    r_t: np.ndarray
    cfr_true: np.ndarray
    mean_cfr: np.ndarray
    se_cfr: np.ndarray
    mean_cfr_naive: np.ndarray
    se_cfr_naive: np.ndarray
    mean_cfr_garske: np.ndarray
    se_cfr_garske: np.ndarray
    mean_cfr_garske_mod: np.ndarray
    se_cfr_garske_mod: np.ndarray
    mean_cfr_final: np.ndarray
    se_cfr_final: np.ndarray
    coverage: CoverageSummary
    replicates: tuple[ReplicateResult, ...] = ()


_KNOWN_MODES = {"known", "known_f_known_p"}
_ESTIMATED_MODES = {"estimated", "estimated_f_estimated_p"}


def run_study(
    scenario: Scenario,
    mode: str,
    *,
    eval_days: Sequence[int] | None = None,
    alpha: float = 0.05,
    lookback: int = 45,
    keep_series: bool = False,
) -> StudyResult:
    """Run all replicates of a scenario and aggregate estimator behaviour.

    ``mode`` selects how much the estimators are told: "known" evaluates
    with the generating delay model and daily rates, isolating estimator
    properties; "estimated" refits the empirical delay CDF and window rates
    at every day, mimicking real-time use. The default evaluation grid is
    every day with confirmed cases (known) or every day from 2 * lookback
    (estimated, so the empirical fit has matured). Replicates accumulate in
    ascending index order, making results independent of scheduling.
    """
    key = mode.lower()
    if key in _KNOWN_MODES:
        known = True
    elif key in _ESTIMATED_MODES:
        known = False
    else:
        raise ValueError(f"mode must be known or estimated, got {mode!r}")

    curve = scenario.curve
    cum_cases = np.cumsum(curve)
    if eval_days is None:
        start = int(np.nonzero(cum_cases > 0)[0][0]) if known else 2 * lookback
        days = np.arange(start, scenario.horizon + 1, dtype=np.int64)
    else:
        days = np.unique(np.asarray(eval_days, dtype=np.int64))
        if days.size == 0:
            raise ValueError("eval_days must be non-empty")
        if days[0] < 0 or days[-1] > scenario.horizon:
            raise ValueError("eval_days must lie within 0..horizon")
    if np.any(cum_cases[days] == 0):
        raise ValueError("every evaluation day needs at least one confirmed case")

    rates_true = scenario.daily_rates
    truth = np.cumsum(curve * rates_true.p)[days] / cum_cases[days]
    schedule_arg = scenario.schedule if known else None
    rates_arg = rates_true if known else None

    estimator_keys = ("cfr", "cfr_naive", "cfr_garske", "cfr_garske_mod", "cfr_final")
    n_days = days.size
    sums = {k: np.zeros(n_days) for k in estimator_keys}
    sumsq = {k: np.zeros(n_days) for k in estimator_keys}
    hit_sum = np.zeros(n_days)
    length_sum = np.zeros(n_days)
    kept: list[ReplicateResult] = []

    n_reps = scenario.replicates
    for index in range(n_reps):
        table = simulate_replicate(scenario, index)
        series = estimate_series(
            table,
            days,
            alpha=alpha,
            schedule=schedule_arg,
            rates=rates_arg,
            lookback=lookback,
            include_final=True,
            true_rates=rates_true,
        )
        if len(series) != n_days:
            raise RuntimeError("a replicate skipped evaluation days unexpectedly")
        for k in estimator_keys:
            values = getattr(series, k)
            sums[k] += values
            sumsq[k] += values * values
        hit = (series.ci_low <= truth) & (truth <= series.ci_high)
        length = series.ci_high - series.ci_low
        hit_sum += hit
        length_sum += length
        if keep_series:
            kept.append(ReplicateResult(series, ci_hit=hit, ci_length=length))

    def mean_se(k: str) -> tuple[np.ndarray, np.ndarray]:
        mean = sums[k] / n_reps
        if n_reps > 1:
            var = np.maximum(sumsq[k] - n_reps * mean * mean, 0.0) / (n_reps - 1)
            se = np.sqrt(var / n_reps)
        else:
            se = np.full(n_days, np.nan)
        return mean, se

    mean_cfr, se_cfr = mean_se("cfr")
    mean_naive, se_naive = mean_se("cfr_naive")
    mean_garske, se_garske = mean_se("cfr_garske")
    mean_garske_mod, se_garske_mod = mean_se("cfr_garske_mod")
    mean_final, se_final = mean_se("cfr_final")

    coverage = hit_sum / n_reps
    coverage_se = np.sqrt(coverage * (1.0 - coverage) / n_reps)
    summary = CoverageSummary(
        days=days,
        r_t=cum_cases[days],
        coverage=coverage,
        coverage_se=coverage_se,
        mean_ci_length=length_sum / n_reps,
    )
    return StudyResult(
        days=days,
        r_t=cum_cases[days],
        cfr_true=truth,
        mean_cfr=mean_cfr,
        se_cfr=se_cfr,
        mean_cfr_naive=mean_naive,
        se_cfr_naive=se_naive,
        mean_cfr_garske=mean_garske,
        se_cfr_garske=se_garske,
        mean_cfr_garske_mod=mean_garske_mod,
        se_cfr_garske_mod=se_garske_mod,
        mean_cfr_final=mean_final,
        se_cfr_final=se_final,
        coverage=summary,
        replicates=tuple(kept),
    )


def load_example_arm() -> np.ndarray:
    """Bundled 301-day rising arm of an illustrative large epidemic curve."""
    path = resources.files("cfrkit.data").joinpath("example_daily_cases.csv")
    with path.open("r", encoding="utf-8") as handle:
        reader = csv.reader(line for line in handle if not line.startswith("#"))
        header = next(reader)
        col = header.index("cases")
        return np.array([int(row[col]) for row in reader if row], dtype=np.int64)


def illustrative_daily_rates(n_days: int) -> DailyRates:
    """Smoothly declining daily fatality probabilities, 5% early to 2.2%.

    Companion to the bundled example curve for coverage studies where the
    true rate must vary over time.
    """
    if n_days < 1:
        raise ValueError("n_days must be positive")
    d = np.arange(n_days, dtype=float)
    return DailyRates(0.022 + 0.028 * np.exp(-d / 110.0))
