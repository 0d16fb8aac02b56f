"""Confirmation-to-death delay distributions and their estimation.

Three interchangeable models of F(k) = P(death within k days | death):
an empirical table built from resolved cohorts, a negative binomial in
mean-dispersion form, and its zero-inflated variant for same-day spikes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import optimize, stats
from scipy.special import gammaln

from .errors import DegenerateSampleError, EstimationError
from .linelist import EpidemicTable, LineList

__all__ = [
    "SurvivalModel",
    "Empirical",
    "NegBinomial",
    "Zinb",
    "DelaySample",
    "point_mass",
    "fit_empirical",
    "fit_nb_mle",
    "fit_zinb_mle",
    "nb_loglik",
    "zinb_loglik",
]

# Parameter box for the simplex searches. Wide enough for any plausible
# delay scale; fits that press against it signal an unidentified parameter.
_MU_BOUNDS = (1e-3, 1e3)
_R_BOUNDS = (1e-3, 1e3)
_PI_BOUNDS = (0.0, 1.0 - 1e-6)
_NM_OPTIONS = {"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20_000, "maxfev": 20_000}


def _lag_array(k) -> np.ndarray:
    arr = np.asarray(k)
    if np.any(arr < 0):
        raise ValueError("lags must be non-negative")
    return arr


class SurvivalModel:
    """CDF of the confirmation-to-death delay, conditional on eventual death."""

    #: Lower bound substituted when estimators divide by a zero CDF value;
    #: stays 0 except for fitted empirical tables (see Empirical.floor).
    floor: float = 0.0

    def cdf(self, k):
        """P(delay <= k); scalar in, float out; array in, array out."""
        raise NotImplementedError

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n i.i.d. delays as an int array."""
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Empirical(SurvivalModel):
    """Tabulated delay CDF: ``cdf_table[k]`` is P(delay <= k), ending at 1."""

    cdf_table: np.ndarray
    #: Resolved deaths behind a fitted table; drives the clamp floor.
    n_obs: int | None = None

    def __post_init__(self) -> None:
        table = np.array(self.cdf_table, dtype=float, copy=True)
        if table.ndim != 1 or table.size == 0:
            raise ValueError("cdf_table must be a non-empty vector")
        if not np.all(np.isfinite(table)):
            raise ValueError("cdf_table must be finite")
        if np.any(table < 0.0) or np.any(table > 1.0):
            raise ValueError("cdf_table values must lie in [0, 1]")
        if np.any(np.diff(table) < 0.0):
            raise ValueError("cdf_table must be non-decreasing")
        if table[-1] != 1.0:
            raise ValueError("cdf_table must end at exactly 1")
        if self.n_obs is not None and self.n_obs < 0:
            raise ValueError("n_obs must be non-negative")
        table.setflags(write=False)
        object.__setattr__(self, "cdf_table", table)

    @property
    def floor(self) -> float:  # type: ignore[override]
        """Clamp value 1/(n_obs + 1) for zero CDF entries of fitted tables."""
        if self.n_obs is None:
            return 0.0
        return 1.0 / (self.n_obs + 1)

    def cdf(self, k):
        arr = _lag_array(k)
        idx = np.minimum(arr, self.cdf_table.size - 1).astype(np.intp)
        out = self.cdf_table[idx]
        return float(out) if arr.ndim == 0 else out

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        u = rng.random(n)
        return np.searchsorted(self.cdf_table, u, side="left").astype(np.int64)


@dataclass(frozen=True)
class NegBinomial(SurvivalModel):
    """Negative binomial delay in mean-dispersion form.

    pmf(j) = Gamma(j + r) / (Gamma(r) j!) * (r / (r + mu))**r * (mu / (r + mu))**j,
    so the mean is mu and the variance mu + mu**2 / r.
    """

    mu: float
    r: float

    def __post_init__(self) -> None:
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not self.r > 0:
            raise ValueError(f"r must be positive, got {self.r}")

    @property
    def _success_prob(self) -> float:
        return self.r / (self.r + self.mu)

    def cdf(self, k):
        arr = _lag_array(k)
        out = stats.nbinom.cdf(arr, self.r, self._success_prob)
        return float(out) if arr.ndim == 0 else out

    def pmf(self, k):
        arr = _lag_array(k)
        out = stats.nbinom.pmf(arr, self.r, self._success_prob)
        return float(out) if arr.ndim == 0 else out

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.negative_binomial(self.r, self._success_prob, size=n).astype(np.int64)


@dataclass(frozen=True)
class Zinb(SurvivalModel):
    """Zero-inflated negative binomial: extra point mass pi at lag 0."""

    pi: float
    mu: float
    r: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.pi < 1.0:
            raise ValueError(f"pi must lie in [0, 1), got {self.pi}")
        NegBinomial(self.mu, self.r)  # reuse positivity checks

    @cached_property
    def _nb(self) -> NegBinomial:
        return NegBinomial(self.mu, self.r)

    def cdf(self, k):
        arr = _lag_array(k)
        out = self.pi + (1.0 - self.pi) * stats.nbinom.cdf(
            arr, self.r, self._nb._success_prob
        )
        return float(out) if arr.ndim == 0 else out

    def pmf(self, k):
        arr = _lag_array(k)
        out = np.where(arr == 0, self.pi, 0.0) + (1.0 - self.pi) * stats.nbinom.pmf(
            arr, self.r, self._nb._success_prob
        )
        return float(out) if arr.ndim == 0 else out

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        # Fixed draw order (delays, then inflation mask) keeps streams stable.
        lags = self._nb.sample(n, rng)
        inflated = rng.random(n) < self.pi
        lags[inflated] = 0
        return lags


def point_mass(lag: int) -> Empirical:
    """Delay that always equals ``lag`` days."""
    if lag < 0:
        raise ValueError("lag must be non-negative")
    table = np.zeros(lag + 1)
    table[-1] = 1.0
    return Empirical(table)


@dataclass(frozen=True, eq=False)
class DelaySample(object):
    """Observed confirmation-to-death lags of resolved deaths."""

    lags: np.ndarray

    def __post_init__(self) -> None:
        lags = np.array(self.lags, dtype=np.int64, copy=True)
        if lags.ndim != 1:
            raise ValueError("lags must be one-dimensional")
        if np.any(lags < 0):
            raise ValueError("lags must be non-negative")
        lags.setflags(write=False)
        object.__setattr__(self, "lags", lags)

    def __len__(self) -> int:
        return int(self.lags.size)

    @classmethod
    def from_linelist(cls, linelist: LineList) -> "DelaySample":
        """Collect the lag of every record with a recorded death."""
        return cls(
            np.array(
                [rec.lag for rec in linelist if rec.lag is not None], dtype=np.int64
            )
        )


def _as_lags(sample) -> np.ndarray:
    if isinstance(sample, DelaySample):
        return sample.lags
    return DelaySample(np.asarray(sample)).lags


def _nb_logpmf(vals: np.ndarray, mu: float, r: float) -> np.ndarray:
    vals = vals.astype(float)
    return (
        gammaln(vals + r)
        - gammaln(r)
        - gammaln(vals + 1.0)
        + r * np.log(r / (r + mu))
        + vals * np.log(mu / (r + mu))
    )


def nb_loglik(sample, mu: float, r: float) -> float:
    """Log-likelihood of the lags under NegBinomial(mu, r)."""
    vals, counts = np.unique(_as_lags(sample), return_counts=True)
    return float(counts @ _nb_logpmf(vals, mu, r))


def zinb_loglik(sample, pi: float, mu: float, r: float) -> float:
    """Log-likelihood under Zinb(pi, mu, r).

    Zero lags mix the inflation mass with the negative binomial zero class:
    log(pi + (1 - pi) pmf(0)), evaluated as a stable logaddexp.
    """
    vals, counts = np.unique(_as_lags(sample), return_counts=True)
    log_nb = _nb_logpmf(vals, mu, r)
    log_pi = np.log(pi) if pi > 0.0 else -np.inf
    terms = np.log1p(-pi) + log_nb
    terms = np.where(vals == 0, np.logaddexp(log_pi, terms), terms)
    return float(counts @ terms)


def fit_nb_mle(sample) -> NegBinomial:
    """Maximum-likelihood negative binomial fit.

    Runs a bounded Nelder-Mead search from method-of-moments starting values.
    The likelihood's stationarity in mu forces the fitted mean onto the
    sample mean; r degenerates to the box edge for underdispersed samples.

    Raises:
        DegenerateSampleError: empty sample, or all lags equal (message
            "dispersion unidentifiable").
    """
    lags = _as_lags(sample)
    if lags.size == 0:
        raise DegenerateSampleError("empty delay sample")
    m = float(lags.mean())
    v = float(lags.var())
    if v == 0.0:
        raise DegenerateSampleError("dispersion unidentifiable: all lags equal")
    r0 = m * m / (v - m) if v > m else 100.0
    x0 = np.array([np.clip(m, *_MU_BOUNDS), np.clip(r0, *_R_BOUNDS)])
    vals, counts = np.unique(lags, return_counts=True)

    def nll(x: np.ndarray) -> float:
        return -float(counts @ _nb_logpmf(vals, x[0], x[1]))

    res = optimize.minimize(
        nll,
        x0,
        method="Nelder-Mead",
        bounds=[_MU_BOUNDS, _R_BOUNDS],
        options=_NM_OPTIONS,
    )
    return NegBinomial(float(res.x[0]), float(res.x[1]))


def fit_zinb_mle(sample) -> Zinb:
    """Maximum-likelihood zero-inflated negative binomial fit.

    Same bounded simplex search over (pi, mu, r) from method-of-moments
    starts. A sample without zero lags cannot see the inflation mass: pi is
    pinned to 0 (plain negative binomial fit) and a RuntimeWarning is issued.

    Raises:
        DegenerateSampleError: empty sample, or no lag reaches 2 so the three
            parameters are unidentifiable.
    """
    lags = _as_lags(sample)
    if lags.size == 0:
        raise DegenerateSampleError("empty delay sample")
    if int(lags.max()) < 2:
        raise DegenerateSampleError(
            "zero-inflated fit needs lags of 2 or more to identify all parameters"
        )
    zero_frac = float(np.mean(lags == 0))
    if zero_frac == 0.0:
        warnings.warn(
            "no zero lags in sample; inflation mass pinned to 0",
            RuntimeWarning,
            stacklevel=2,
        )
        nb = fit_nb_mle(lags)
        return Zinb(0.0, nb.mu, nb.r)

    m = float(lags.mean())
    v = float(lags.var())
    pmf0 = float(np.exp(_nb_logpmf(np.array([0]), max(m, 1e-3), 1.0)[0]))
    pi0 = float(np.clip((zero_frac - pmf0) / max(1.0 - pmf0, 1e-12), 0.01, 0.9))
    mu0 = m / (1.0 - pi0)
    denom = v / ((1.0 - pi0) * mu0) - 1.0 - pi0 * mu0
    r0 = mu0 / denom if denom > 0 else 100.0
    x0 = np.array(
        [
            np.clip(pi0, 0.01, 0.9),
            np.clip(mu0, *_MU_BOUNDS),
            np.clip(r0, *_R_BOUNDS),
        ]
    )
    vals, counts = np.unique(lags, return_counts=True)

    def nll(x: np.ndarray) -> float:
        pi, mu, r = x
        log_nb = _nb_logpmf(vals, mu, r)
        log_pi = np.log(pi) if pi > 0.0 else -np.inf
        terms = np.log1p(-pi) + log_nb
        terms = np.where(vals == 0, np.logaddexp(log_pi, terms), terms)
        return -float(counts @ terms)

    res = optimize.minimize(
        nll,
        x0,
        method="Nelder-Mead",
        bounds=[_PI_BOUNDS, _MU_BOUNDS, _R_BOUNDS],
        options=_NM_OPTIONS,
    )
    return Zinb(float(res.x[0]), float(res.x[1]), float(res.x[2]))


def fit_empirical(table: EpidemicTable, t: int, lookback: int = 45) -> Empirical:
    """Empirical delay CDF at day t from cohorts old enough to have resolved.

    Only deaths among cases confirmed on or before day t - lookback and dead
    by day t enter the table, so recent unresolved cohorts cannot drag the
    CDF down. The table spans lag 0..the largest eligible lag and is
    normalized to end at 1; ``n_obs`` records the eligible death count
    behind the clamp floor.

    Raises:
        EstimationError: no eligible deaths ("insufficient resolved deaths
            for empirical fit").
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    if lookback < 0:
        raise ValueError("lookback must be non-negative")
    day_cap = min(t - lookback, table.n_days - 1)
    if day_cap < 0:
        raise EstimationError("insufficient resolved deaths for empirical fit")
    k = np.arange(table.max_lag + 1)
    # Deaths at lag k among eligible cohorts: confirmed by day_cap and, to be
    # dead by t, confirmed by t - k.
    day_lim = np.minimum(day_cap, t - k)
    counts = np.where(day_lim >= 0, table._cum_day[np.maximum(day_lim, 0), k], 0)
    total = int(counts.sum())
    if total == 0:
        raise EstimationError("insufficient resolved deaths for empirical fit")
    k_max = int(np.nonzero(counts)[0][-1])
    cdf = np.cumsum(counts[: k_max + 1]) / total
    cdf[-1] = 1.0
    return Empirical(cdf, n_obs=total)
