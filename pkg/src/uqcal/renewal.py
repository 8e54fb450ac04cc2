"""Reproduction number estimation with the Poisson renewal model.

Under perfect case reporting the windowed Gamma prior is conjugate, the
posterior is exact, and no collectable data can sharpen it further: all
remaining uncertainty is irreducible. With underreporting, the unreported
infections are genuinely missing data. A sequential importance-resampling
filter integrates over them, and learning them (e.g. through better
surveillance) would reduce uncertainty about the reproduction number.

The filter is fully adapted for the daily-Gamma generative model: given a
particle's infection history, the day's reported count has a closed-form
negative-binomial marginal (used as the weight), the day's reproduction
number is drawn from its conditional Gamma, and the unreported remainder
from its conditional Poisson. Split Poisson thinning makes the reported
and unreported parts conditionally independent, so this proposal is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special, stats

from .distributions import Discrete, Gamma
from .engine import PosteriorModel, PredictiveModel, EurResult, eur_monte_carlo
from .errors import DegeneracyError
from .losses import LossFunction, QuadraticLoss
from .rng import RandomSeed, as_generator

__all__ = [
    "EpidemicSeries",
    "RenewalPrior",
    "UnderreportingSpec",
    "total_infectiousness",
    "rt_posterior_perfect",
    "rt_posterior_underreported",
    "rt_posterior_underreported_path",
    "rt_eur_from_full_reporting",
    "simulate_epidemic",
]

MIN_PARTICLES = 100
MIN_EFFECTIVE_SAMPLE_SIZE = 5.0
WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class EpidemicSeries:
    """Daily case counts plus the serial-interval weights that drive the
    renewal process. Days are 1-indexed in the public API."""

    cases: np.ndarray
    serial_interval: np.ndarray

    def __post_init__(self):
        cases = np.asarray(self.cases, dtype=np.int64)
        if cases.ndim != 1 or cases.size == 0:
            raise ValueError("cases must be a non-empty 1-d sequence")
        if np.any(cases < 0):
            raise ValueError("case counts must be non-negative")
        w = np.asarray(self.serial_interval, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("serial interval must be a non-empty 1-d sequence")
        if np.any(w < 0):
            raise ValueError("serial-interval weights must be non-negative")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"serial-interval weights sum to {w.sum()!r}, expected 1")
        object.__setattr__(self, "cases", cases)
        object.__setattr__(self, "serial_interval", w)

    @property
    def T(self) -> int:
        return int(self.cases.size)


@dataclass(frozen=True)
class RenewalPrior:
    """Gamma(shape, rate) prior on the reproduction number, estimated on a
    trailing window of `window` days. Defaults give prior mean 5."""

    shape: float = 1.0
    rate: float = 0.2
    window: int = 1

    def __post_init__(self):
        if self.shape <= 0 or self.rate <= 0:
            raise ValueError("prior shape and rate must be positive")
        if self.window < 1 or int(self.window) != self.window:
            raise ValueError("window must be a positive integer number of days")


@dataclass(frozen=True)
class UnderreportingSpec:
    """Each infection is reported independently with probability rho.

    `infection_prior_mean` (scalar or per-day array) supplies a mean for
    latent infections on days the renewal process cannot reach (day one,
    or any day with zero past infectiousness). Without it, such days are
    treated as fully observed: a known-seeding simplification.
    """

    rho: float
    infection_prior_mean: Optional[object] = None

    def __post_init__(self):
        if not 0.0 < self.rho <= 1.0:
            raise ValueError("reporting probability must lie in (0, 1]")

    def seed_mean(self, t: int) -> Optional[float]:
        """Prior mean of infections for 1-indexed day t, if supplied."""
        if self.infection_prior_mean is None:
            return None
        arr = np.atleast_1d(np.asarray(self.infection_prior_mean, dtype=float))
        value = float(arr[0]) if arr.size == 1 else float(arr[t - 1])
        if value <= 0:
            raise ValueError("infection prior means must be positive")
        return value


def total_infectiousness(series: EpidemicSeries, t: int) -> float:
    """Serial-interval-weighted sum of past incidence for 1-indexed day t."""
    if not 2 <= t <= series.T:
        raise ValueError(f"day must lie in [2, {series.T}], got {t}")
    return _infectiousness_at(series.cases.astype(float), series.serial_interval, t)


def _infectiousness_at(incidence: np.ndarray, w: np.ndarray, t: int) -> float:
    reach = min(w.size, t - 1)
    past = incidence[t - 1 - reach : t - 1]
    return float(past @ w[:reach][::-1])


def rt_posterior_perfect(series: EpidemicSeries, prior: RenewalPrior, t: int) -> Gamma:
    """Exact conjugate posterior for the reproduction number at day t.

    Uses the window ending at t; every day in the window must have a
    defined renewal likelihood (so the window cannot include day one).
    """
    start = t - prior.window + 1
    if start < 2 or t > series.T:
        raise ValueError(
            f"window [{start}, {t}] must lie inside [2, {series.T}]"
        )
    cases = series.cases[start - 1 : t].sum()
    lam = sum(total_infectiousness(series, s) for s in range(start, t + 1))
    if lam == 0.0 and cases > 0:
        raise ValueError(
            "window has positive cases but zero total infectiousness; "
            "renewal likelihood undefined"
        )
    return Gamma(prior.shape + float(cases), prior.rate + lam)


# --- latent-infection particle filter ---------------------------------------


def _nb_marginal_logpmf(c: int, shape: float, rate: float, lam: np.ndarray) -> np.ndarray:
    """log p(reported count | infectiousness) with the day's reproduction
    number integrated out against its Gamma prior."""
    out = np.full(lam.shape, -np.inf)
    zero = lam <= 0.0
    if c == 0:
        out[zero] = 0.0
    pos = ~zero
    if np.any(pos):
        lp = lam[pos]
        out[pos] = (
            special.gammaln(c + shape)
            - special.gammaln(shape)
            - special.gammaln(c + 1.0)
            + shape * (math.log(rate) - np.log(rate + lp))
            + c * (np.log(lp) - np.log(rate + lp))
        )
    return out


def _systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = weights.size
    positions = (rng.random() + np.arange(n)) / n
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    return np.searchsorted(cum, positions)


@dataclass
class _FilterSnapshot:
    """Per-day window statistics: one Gamma component per particle."""

    shapes: np.ndarray
    rates: np.ndarray
    weights: np.ndarray


@dataclass
class _FilterResult:
    weights: np.ndarray
    infections: np.ndarray  # (particles, days)
    infectiousness: np.ndarray  # (particles, days), day one entry unused
    snapshots: dict  # 1-indexed day -> _FilterSnapshot


def _run_latent_filter(
    series: EpidemicSeries,
    prior: RenewalPrior,
    spec: UnderreportingSpec,
    t_end: int,
    particles: int,
    rng: np.random.Generator,
    record_days=(),
) -> _FilterResult:
    if particles < MIN_PARTICLES:
        raise ValueError(f"particle filter requires >= {MIN_PARTICLES} particles")
    C = series.cases
    w = series.serial_interval
    rho = spec.rho
    a0, b0 = prior.shape, prior.rate
    P = particles

    infections = np.zeros((P, t_end))
    infectiousness = np.zeros((P, t_end))
    log_weights = np.zeros(P)
    record_days = set(record_days)
    snapshots = {}

    def seed_day(t):
        """Latent infections on a day the renewal process cannot generate."""
        mean = spec.seed_mean(t)
        if mean is None or rho == 1.0:
            infections[:, t - 1] = C[t - 1]
        else:
            log_weights[:] += stats.poisson.logpmf(C[t - 1], rho * mean)
            infections[:, t - 1] = C[t - 1] + rng.poisson((1.0 - rho) * mean, P)

    seed_day(1)
    weights = np.full(P, 1.0 / P)

    for t in range(2, t_end + 1):
        reach = min(w.size, t - 1)
        lam = infections[:, t - 1 - reach : t - 1] @ w[:reach][::-1]
        infectiousness[:, t - 1] = lam

        c = int(C[t - 1])
        if np.all(lam <= 0.0) and spec.seed_mean(t) is not None:
            seed_day(t)  # renewal cannot reach this day; treat as re-seeding
        else:
            log_weights += _nb_marginal_logpmf(c, a0, b0, lam)
            if rho < 1.0:
                r_draw = rng.gamma(a0 + c, 1.0 / (b0 + rho * lam))
                infections[:, t - 1] = c + rng.poisson((1.0 - rho) * r_draw * lam)
            else:
                infections[:, t - 1] = c

        shift = log_weights.max()
        if shift == -np.inf:
            raise DegeneracyError(
                f"day {t}: no particle can explain the reported count "
                f"{c}; renewal likelihood undefined on this series"
            )
        weights = np.exp(log_weights - shift)
        weights /= weights.sum()
        ess = 1.0 / float(weights @ weights)
        if ess < MIN_EFFECTIVE_SAMPLE_SIZE:
            raise DegeneracyError(
                f"day {t}: effective sample size {ess:.2f} < "
                f"{MIN_EFFECTIVE_SAMPLE_SIZE}; increase particles"
            )

        if t in record_days:
            snapshots[t] = _window_snapshot(
                prior, infections, infectiousness, weights, t
            )

        if ess < P / 2.0 and t < t_end:
            idx = _systematic_resample(weights, rng)
            infections = infections[idx]
            infectiousness = infectiousness[idx]
            log_weights = np.zeros(P)
            weights = np.full(P, 1.0 / P)

    return _FilterResult(weights, infections, infectiousness, snapshots)


def _window_snapshot(prior, infections, infectiousness, weights, t) -> _FilterSnapshot:
    start = t - prior.window + 1
    i_sum = infections[:, start - 1 : t].sum(axis=1)
    lam_sum = infectiousness[:, start - 1 : t].sum(axis=1)
    return _FilterSnapshot(
        shapes=prior.shape + i_sum,
        rates=prior.rate + lam_sum,
        weights=weights.copy(),
    )


def _mixture_to_discrete(snap: _FilterSnapshot, atoms_per_component: int) -> Discrete:
    """Deterministic weighted-sample view of a Gamma mixture, one
    equi-quantile strat per component."""
    G = atoms_per_component
    if np.any(snap.rates <= 0.0):
        raise DegeneracyError("window with zero infectiousness and zero prior rate")
    q = (np.arange(G) + 0.5) / G
    pts = stats.gamma.ppf(q[None, :], snap.shapes[:, None], scale=1.0 / snap.rates[:, None])
    wts = np.repeat(snap.weights / G, G)
    return Discrete(pts.ravel(), wts)


def _check_window(series, prior, t):
    start = t - prior.window + 1
    if start < 2 or t > series.T:
        raise ValueError(f"window [{start}, {t}] must lie inside [2, {series.T}]")


def rt_posterior_underreported(
    series: EpidemicSeries,
    prior: RenewalPrior,
    spec: UnderreportingSpec,
    t: int,
    particles: int,
    seed: RandomSeed,
    atoms_per_component: int = 32,
) -> "Discrete | Gamma":
    """Posterior for the reproduction number at day t when only a fraction
    rho of infections is reported.

    Marginalises the latent infection series with the particle filter and
    returns a weighted-sample distribution (a Gamma mixture across
    particles, discretised on equi-quantile atoms). With rho = 1 nothing
    is latent and the exact conjugate posterior is returned directly.
    """
    _check_window(series, prior, t)
    if spec.rho == 1.0:
        return rt_posterior_perfect(series, prior, t)
    rng = as_generator(seed)
    result = _run_latent_filter(
        series, prior, spec, t, particles, rng, record_days=[t]
    )
    return _mixture_to_discrete(result.snapshots[t], atoms_per_component)


def rt_posterior_underreported_path(
    series: EpidemicSeries,
    prior: RenewalPrior,
    spec: UnderreportingSpec,
    particles: int,
    seed: RandomSeed,
    atoms_per_component: int = 32,
):
    """Posterior at every day the window fits, from one filter pass.

    Returns a list indexed by 1-indexed day (entry None where the window
    does not fit). Each day's posterior is identical to calling
    rt_posterior_underreported with the same seed for that day.
    """
    first = prior.window + 1
    days = list(range(first, series.T + 1))
    out = [None] * (series.T + 1)
    if not days:
        return out
    if spec.rho == 1.0:
        for t in days:
            out[t] = rt_posterior_perfect(series, prior, t)
        return out
    rng = as_generator(seed)
    result = _run_latent_filter(
        series, prior, spec, series.T, particles, rng, record_days=days
    )
    for t in days:
        out[t] = _mixture_to_discrete(result.snapshots[t], atoms_per_component)
    return out


def rt_eur_from_full_reporting(
    series: EpidemicSeries,
    prior: RenewalPrior,
    spec: UnderreportingSpec,
    t: int,
    replicates: int,
    particles: int,
    seed: RandomSeed,
    ell: Optional[LossFunction] = None,
    threads: int = 1,
    atoms_per_component: int = 32,
) -> EurResult:
    """Expected uncertainty reduction about the day-t reproduction number
    from learning the unreported infections up to day t.

    The predictive over the unreported counts is an ancestral draw from
    the fitted latent posterior, so it is coherent with the refit by
    construction; with everything reported the refit is the exact
    conjugate posterior. With rho = 1 the reduction is identically zero.
    """
    _check_window(series, prior, t)
    if ell is None:
        ell = QuadraticLoss()
    if isinstance(seed, (int, np.integer)):
        seed = RandomSeed(int(seed))

    cases_to_t = series.cases[:t].astype(np.int64)

    def refit(u_miss) -> Gamma:
        u = np.asarray(u_miss, dtype=np.int64)
        if u.shape != (t,) or np.any(u < 0):
            raise ValueError("unreported counts must be non-negative, one per day")
        infections = cases_to_t + u
        start = t - prior.window + 1
        i_sum = float(infections[start - 1 : t].sum())
        lam_sum = sum(
            _infectiousness_at(infections.astype(float), series.serial_interval, s)
            for s in range(start, t + 1)
        )
        return Gamma(prior.shape + i_sum, prior.rate + lam_sum)

    if spec.rho == 1.0:
        # nothing is unreported, so the reduction is identically zero
        posterior = rt_posterior_perfect(series, prior, t)
        total = ell.uncertainty(posterior)
        return EurResult(
            total_uncertainty=total,
            expected_remaining=total,
            eur=0.0,
            mc_standard_error=0.0,
            replicates=replicates,
            per_replicate_remaining=np.full(replicates, total),
        )
    else:
        fit_rng = seed.derive("latent-fit").generator()
        state = _run_latent_filter(
            series, prior, spec, t, particles, fit_rng, record_days=[t]
        )
        posterior = _mixture_to_discrete(state.snapshots[t], atoms_per_component)
        latent = state.infections.astype(np.int64)
        weights = state.weights

        def simulate(rng):
            j = rng.choice(weights.size, p=weights)
            return latent[j] - cases_to_t

        pred = PredictiveModel(simulate=simulate, declared_coherent=True)

    model = PosteriorModel(
        target_label=f"reproduction number, day {t}",
        posterior=posterior,
        refit=refit,
    )
    return eur_monte_carlo(ell, model, pred, replicates, seed, threads=threads)


def simulate_epidemic(
    r_values,
    serial_interval,
    T: int,
    rho: float,
    initial_infections: int,
    seed: RandomSeed,
):
    """Generate a renewal epidemic with binomial reporting.

    Day one is seeded with `initial_infections` and reported in full (the
    known-seeding convention used by the inference side). Returns
    (series, infections, r_values) with the full latent truth.
    """
    if T < 1:
        raise ValueError("need at least one day")
    if initial_infections < 1:
        raise ValueError("need at least one initial infection")
    if not 0.0 < rho <= 1.0:
        raise ValueError("reporting probability must lie in (0, 1]")
    r = np.broadcast_to(np.asarray(r_values, dtype=float), (T,)).copy()
    w = np.asarray(serial_interval, dtype=float)
    rng = as_generator(seed)

    infections = np.zeros(T, dtype=np.int64)
    cases = np.zeros(T, dtype=np.int64)
    infections[0] = initial_infections
    cases[0] = initial_infections
    for t in range(2, T + 1):
        lam = _infectiousness_at(infections.astype(float), w, t)
        infections[t - 1] = rng.poisson(r[t - 1] * lam)
        cases[t - 1] = rng.binomial(infections[t - 1], rho)
    return EpidemicSeries(cases, w), infections, r
