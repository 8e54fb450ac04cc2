"""Synthetic joint surveillance of reported cases and wastewater.

A deliberately small stand-in for a full wastewater transmission model:
the reproduction number follows a log random walk, infections follow the
Poisson renewal process, reported cases are a negative-binomial thinning
of infections, and wastewater concentration is a log-normal measurement
of kernel-smoothed shedding whose noise shrinks as catchment coverage
grows (variance proportional to total population / catchment population).
Nuisance parameters are fixed at known config values; the point is the
pipeline, not the realism:

    fit the joint model -> simulate the missing wastewater from the
    fitted posterior -> merge by population-weighted average -> refit ->
    average over replicates.

Because the simulator for the missing wastewater uses the same
observation law as the fit, the predictive is coherent with the refit up
to the population-average approximation, and the expected uncertainty
reduction from full-population daily sampling is non-negative in
aggregate. Refits reuse the baseline fit's seed (common random numbers),
so filter noise largely cancels from the reduction estimates.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special

from .engine import EurResult
from .errors import DegeneracyError
from .renewal import EpidemicSeries, RenewalPrior, _systematic_resample
from .rng import RandomSeed, as_generator

__all__ = [
    "SurveillanceDesign",
    "WastewaterSeries",
    "JointModelConfig",
    "SurveillanceFit",
    "simulate_joint",
    "fit_joint",
    "daily_ur_wastewater",
    "eur_full_population",
    "DailyUrStudy",
    "FullPopulationStudy",
]

MIN_JOINT_PARTICLES = 500
MIN_EFFECTIVE_SAMPLE_SIZE = 5.0
DEFAULT_SMOOTHING_LAG = 10


@dataclass(frozen=True)
class SurveillanceDesign:
    """Which days have a wastewater sample and who it covers."""

    total_population: int
    coverage: np.ndarray  # catchment population per day
    sampled_days: np.ndarray  # bool mask per day

    def __post_init__(self):
        if self.total_population < 1:
            raise ValueError("total population must be >= 1")
        cov = np.asarray(self.coverage, dtype=float)
        mask = np.asarray(self.sampled_days, dtype=bool)
        if cov.shape != mask.shape or cov.ndim != 1:
            raise ValueError("coverage and sampled_days must be 1-d and aligned")
        if np.any(cov < 0) or np.any(cov > self.total_population):
            raise ValueError("coverage must lie in [0, total population]")
        if np.any(mask & (cov <= 0)):
            raise ValueError("a sampled day must have positive catchment coverage")
        object.__setattr__(self, "coverage", cov)
        object.__setattr__(self, "sampled_days", mask)

    @property
    def T(self) -> int:
        return int(self.sampled_days.size)

    def noise_sd(self, noise_base: float, day: int) -> float:
        """Observation noise for 1-indexed day: variance scales with the
        fraction of the population not in the catchment's denominator."""
        n = self.coverage[day - 1]
        return noise_base * math.sqrt(self.total_population / n)

    @staticmethod
    def full(total_population: int, T: int, skip_first_day: bool = True):
        """Every day sampled at full coverage (day one skipped by default
        because lag-one shedding gives it no signal)."""
        mask = np.ones(T, dtype=bool)
        if skip_first_day:
            mask[0] = False
        cov = np.where(mask, float(total_population), 0.0)
        return SurveillanceDesign(total_population, cov, mask)


@dataclass(frozen=True)
class WastewaterSeries:
    """Concentrations on sampled days (NaN elsewhere), tied to a design."""

    concentrations: np.ndarray
    design: SurveillanceDesign

    def __post_init__(self):
        w = np.asarray(self.concentrations, dtype=float)
        mask = self.design.sampled_days
        if w.shape != mask.shape:
            raise ValueError("concentrations must align with the design")
        if np.any(np.isnan(w[mask])) or np.any(w[mask] <= 0):
            raise ValueError("sampled days must carry positive concentrations")
        if np.any(~np.isnan(w[~mask])):
            raise ValueError("unsampled days must carry NaN")
        object.__setattr__(self, "concentrations", w)


@dataclass(frozen=True)
class JointModelConfig:
    """Fixed parameters of the joint case/wastewater model."""

    prior: RenewalPrior
    rw_sd: float  # sd of the log reproduction-number random walk
    rho: float  # reporting probability
    dispersion: float  # negative-binomial overdispersion of reporting
    serial_interval: np.ndarray
    shedding_kernel: np.ndarray  # weight of infections at lags 1..L
    shedding_scale: float  # concentration per infection per capita
    noise_base: float  # observation sd at full coverage (0 = exact signal)

    def __post_init__(self):
        if self.rw_sd <= 0:
            raise ValueError("random-walk sd must be positive")
        if not 0.0 < self.rho <= 1.0:
            raise ValueError("reporting probability must lie in (0, 1]")
        if self.dispersion <= 0:
            raise ValueError("dispersion must be positive")
        if self.shedding_scale <= 0:
            raise ValueError("shedding scale must be positive")
        if self.noise_base < 0:
            raise ValueError("noise base must be >= 0")
        w = np.asarray(self.serial_interval, dtype=float)
        z = np.asarray(self.shedding_kernel, dtype=float)
        if w.ndim != 1 or w.size == 0 or np.any(w < 0):
            raise ValueError("serial interval must be non-negative weights")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("serial-interval weights must sum to 1")
        if z.ndim != 1 or z.size == 0 or np.any(z < 0) or not np.all(np.isfinite(z)):
            raise ValueError("shedding kernel must be finite non-negative weights")
        object.__setattr__(self, "serial_interval", w)
        object.__setattr__(self, "shedding_kernel", z)


def _lagged_dot(history: np.ndarray, kernel: np.ndarray, t: int):
    """kernel-weighted sum of history at lags 1..L before 1-indexed day t.

    history is (..., days); returns a scalar or a vector per particle.
    """
    reach = min(kernel.size, t - 1)
    if reach == 0:
        return np.zeros(history.shape[:-1])
    window = history[..., t - 1 - reach : t - 1]
    return window @ kernel[:reach][::-1]


def _nb_logpmf(counts, mean, dispersion):
    """Negative-binomial log pmf by (mean, dispersion), safe at mean 0."""
    counts = np.asarray(counts, dtype=float)
    mean = np.asarray(mean, dtype=float)
    out = np.full(np.broadcast(counts, mean).shape, -np.inf)
    zero = mean <= 0.0
    out[zero & (counts == 0)] = 0.0
    pos = ~zero
    if np.any(pos):
        m = mean[pos] if mean.shape else mean
        c = counts[pos] if counts.shape else counts
        k = dispersion
        out[pos] = (
            special.gammaln(c + k)
            - special.gammaln(k)
            - special.gammaln(c + 1.0)
            + k * (math.log(k) - np.log(k + m))
            + c * (np.log(m) - np.log(k + m))
        )
    return out


def _lognormal_logpdf(x: float, mu_signal, sd: float):
    """Log density of a mean-corrected log-normal measurement of mu_signal."""
    mu_signal = np.asarray(mu_signal, dtype=float)
    out = np.full(mu_signal.shape, -np.inf)
    pos = mu_signal > 0.0
    if np.any(pos):
        center = np.log(mu_signal[pos]) - 0.5 * sd * sd
        z = (math.log(x) - center) / sd
        out[pos] = -0.5 * z * z - math.log(x * sd) - 0.5 * math.log(2.0 * math.pi)
    return out


def simulate_joint(
    config: JointModelConfig,
    design: SurveillanceDesign,
    T: int,
    seed: RandomSeed,
    initial_infections: int = 200,
    r_start: Optional[float] = None,
):
    """Generate a synthetic epidemic with partial wastewater surveillance.

    Returns (cases, wastewater, truth) where truth holds the latent
    reproduction numbers, infections, and noise-free shedding signal.
    Byte-identical output for identical seeds.
    """
    if T < 10:
        raise ValueError("simulation needs at least 10 days")
    if design.T != T:
        raise ValueError("design length must equal T")
    if initial_infections < 1:
        raise ValueError("need at least one initial infection")
    rng = as_generator(seed)
    N = design.total_population
    if r_start is None:
        r_start = config.prior.shape / config.prior.rate

    log_r = np.zeros(T)
    log_r[0] = math.log(r_start)
    log_r[1:] = log_r[0] + np.cumsum(rng.normal(0.0, config.rw_sd, T - 1))
    r = np.exp(log_r)

    infections = np.zeros(T, dtype=np.int64)
    infections[0] = initial_infections
    for t in range(2, T + 1):
        lam = float(_lagged_dot(infections.astype(float), config.serial_interval, t))
        infections[t - 1] = rng.poisson(r[t - 1] * lam)

    cases = np.zeros(T, dtype=np.int64)
    for t in range(1, T + 1):
        mean = config.rho * infections[t - 1]
        if mean > 0:
            p = config.dispersion / (config.dispersion + mean)
            cases[t - 1] = rng.negative_binomial(config.dispersion, p)

    mu = np.zeros(T)
    for t in range(1, T + 1):
        shed = float(_lagged_dot(infections.astype(float), config.shedding_kernel, t))
        mu[t - 1] = config.shedding_scale * shed / N

    conc = np.full(T, np.nan)
    for t in range(1, T + 1):
        if not design.sampled_days[t - 1]:
            continue
        if mu[t - 1] <= 0.0:
            raise DegeneracyError(
                f"day {t} is sampled but has no shedding signal; "
                "sample later days or seed more infections"
            )
        if config.noise_base == 0.0:
            conc[t - 1] = mu[t - 1]
        else:
            sd = design.noise_sd(config.noise_base, t)
            conc[t - 1] = math.exp(rng.normal(math.log(mu[t - 1]) - 0.5 * sd * sd, sd))
            if conc[t - 1] <= 0.0:
                raise DegeneracyError(
                    f"day {t}: observation noise so large the simulated "
                    "concentration underflowed to zero"
                )

    series = EpidemicSeries(cases, config.serial_interval)
    ww = WastewaterSeries(conc, design)
    truth = {"r": r, "log_r": log_r, "infections": infections, "shedding_mean": mu}
    return series, ww, truth


@dataclass
class SurveillanceFit:
    """Per-day smoothed posterior for the reproduction number plus the
    particle representation of the latent infections."""

    rt_mean: np.ndarray
    rt_var: np.ndarray
    weights: np.ndarray = field(repr=False)
    infections: np.ndarray = field(repr=False)  # (particles, days)
    log_r: np.ndarray = field(repr=False)  # (particles, days)
    min_ess: float = math.nan


def fit_joint(
    cases: EpidemicSeries,
    ww: Optional[WastewaterSeries],
    config: JointModelConfig,
    particles: int,
    seed,
    lag: int = DEFAULT_SMOOTHING_LAG,
) -> SurveillanceFit:
    """Particle filter over (reproduction number, infections).

    Omitting `ww` fits reported cases alone. Per-day summaries are
    fixed-lag smoothed: the value for day t uses data up to day t + lag,
    so uncertainty is genuinely higher near both ends of the series.
    """
    if particles < MIN_JOINT_PARTICLES:
        raise ValueError(f"joint filter requires >= {MIN_JOINT_PARTICLES} particles")
    if ww is not None and config.noise_base == 0.0:
        raise ValueError(
            "noise_base = 0 makes the wastewater likelihood a point mass; "
            "fit with a positive noise level"
        )
    if ww is not None and ww.design.T != cases.T:
        raise ValueError("wastewater series must align with the case series")
    if lag < 1:
        raise ValueError("smoothing lag must be >= 1")
    rng = as_generator(seed)
    T = cases.T
    P = particles
    C = cases.cases

    seed_infections = max(1, int(round(C[0] / config.rho)))
    infections = np.zeros((P, T))
    infections[:, 0] = seed_infections
    log_r = np.zeros((P, T))
    log_r[:, 0] = np.log(rng.gamma(config.prior.shape, 1.0 / config.prior.rate, P))

    log_weights = np.zeros(P)
    weights = np.full(P, 1.0 / P)
    rt_mean = np.zeros(T)
    rt_var = np.zeros(T)
    recorded = np.zeros(T, dtype=bool)
    min_ess = math.inf

    if ww is not None and ww.design.sampled_days[0]:
        raise DegeneracyError(
            "day 1 carries a wastewater sample but lag-one shedding gives "
            "it no signal; start sampling from day 2"
        )

    def record(day, w):
        col = np.exp(log_r[:, day - 1])
        m = float(w @ col)
        rt_mean[day - 1] = m
        rt_var[day - 1] = float(w @ (col - m) ** 2)
        recorded[day - 1] = True

    for t in range(2, T + 1):
        log_r[:, t - 1] = log_r[:, t - 2] + rng.normal(0.0, config.rw_sd, P)
        r_now = np.exp(log_r[:, t - 1])
        lam = _lagged_dot(infections, config.serial_interval, t)
        infections[:, t - 1] = rng.poisson(r_now * lam)

        log_weights += _nb_logpmf(C[t - 1], config.rho * infections[:, t - 1], config.dispersion)
        if ww is not None and ww.design.sampled_days[t - 1]:
            shed = _lagged_dot(infections, config.shedding_kernel, t)
            mu = config.shedding_scale * shed / ww.design.total_population
            sd = ww.design.noise_sd(config.noise_base, t)
            log_weights += _lognormal_logpdf(ww.concentrations[t - 1], mu, sd)

        shift = log_weights.max()
        if shift == -np.inf:
            raise DegeneracyError(
                f"day {t}: all particle weights vanished; the joint model "
                "cannot explain the observations"
            )
        weights = np.exp(log_weights - shift)
        weights /= weights.sum()
        ess = 1.0 / float(weights @ weights)
        min_ess = min(min_ess, ess)
        if ess < MIN_EFFECTIVE_SAMPLE_SIZE:
            raise DegeneracyError(
                f"day {t}: effective sample size {ess:.2f} < "
                f"{MIN_EFFECTIVE_SAMPLE_SIZE}; increase particles"
            )

        if t - lag >= 1:
            record(t - lag, weights)

        if ess < P / 2.0 and t < T:
            idx = _systematic_resample(weights, rng)
            infections = infections[idx]
            log_r = log_r[idx]
            log_weights = np.zeros(P)
            weights = np.full(P, 1.0 / P)

    for day in range(1, T + 1):
        if not recorded[day - 1]:
            record(day, weights)

    return SurveillanceFit(
        rt_mean=rt_mean,
        rt_var=rt_var,
        weights=weights,
        infections=infections,
        log_r=log_r,
        min_ess=min_ess,
    )


@dataclass
class DailyUrStudy:
    """Daily uncertainty reduction from the wastewater already collected."""

    var_cases_only: np.ndarray
    var_joint: np.ndarray
    ur: np.ndarray
    ur_pct: np.ndarray  # percent of the cases-only variance
    fit_cases_only: SurveillanceFit = field(repr=False)
    fit_joint: SurveillanceFit = field(repr=False)


def daily_ur_wastewater(
    cases: EpidemicSeries,
    ww: WastewaterSeries,
    config: JointModelConfig,
    particles: int,
    seed: RandomSeed,
    lag: int = DEFAULT_SMOOTHING_LAG,
) -> DailyUrStudy:
    """Per-day variance reduction of the joint fit over the cases-only fit.

    Values can be negative on individual days: the realised wastewater can
    contradict the case data. With no sampled days the reduction is
    identically zero because the fits coincide.

    Both fits run on the same random stream (common random numbers), so
    filter noise largely cancels from the difference.
    """
    if isinstance(seed, (int, np.integer)):
        seed = RandomSeed(int(seed))
    fit_seed = seed.derive("filter")
    fit_cases = fit_joint(cases, None, config, particles, fit_seed, lag=lag)
    if not ww.design.sampled_days.any():
        fit_both = fit_cases
    else:
        fit_both = fit_joint(cases, ww, config, particles, fit_seed, lag=lag)
    ur = fit_cases.rt_var - fit_both.rt_var
    with np.errstate(divide="ignore", invalid="ignore"):
        pct = np.where(fit_cases.rt_var > 0, 100.0 * ur / fit_cases.rt_var, 0.0)
    return DailyUrStudy(
        var_cases_only=fit_cases.rt_var,
        var_joint=fit_both.rt_var,
        ur=ur,
        ur_pct=pct,
        fit_cases_only=fit_cases,
        fit_joint=fit_both,
    )


@dataclass
class FullPopulationStudy:
    """Expected uncertainty reduction from sampling everyone, every day."""

    var_joint: np.ndarray
    mean_var_full: np.ndarray
    eur: np.ndarray
    se: np.ndarray
    eur_pct: np.ndarray  # percent of the current joint variance
    replicate_vars: np.ndarray = field(repr=False)  # (replicates, days)
    per_day: list = field(repr=False, default_factory=list)
    aggregate_eur: float = 0.0
    aggregate_se: float = 0.0
    fraction_replicate_days_increased: float = 0.0
    n_replicates: int = 0


def eur_full_population(
    cases: EpidemicSeries,
    ww: WastewaterSeries,
    config: JointModelConfig,
    design: SurveillanceDesign,
    replicates: int,
    particles: int,
    seed: RandomSeed,
    threads: int = 1,
    lag: int = DEFAULT_SMOOTHING_LAG,
    predictive_noise_inflation: float = 1.0,
    joint_fit: Optional[SurveillanceFit] = None,
) -> FullPopulationStudy:
    """Monte Carlo estimate of the uncertainty reduction from expanding
    wastewater sampling to the whole population every day.

    Per replicate: draw a latent infection path from the fitted joint
    posterior, simulate concentrations for the population not covered on
    each day (the whole population on unsampled days), merge with the
    observed values by population-weighted average, refit, and record the
    per-day variance. Refits share the baseline fit's random stream so
    that filter noise cancels from the differences.

    `predictive_noise_inflation` scales the noise of the simulated (not
    the observed) concentrations; values above 1 break coherence with the
    refit on purpose.
    """
    if replicates < 2:
        raise ValueError("eur_full_population requires replicates >= 2")
    if isinstance(seed, (int, np.integer)):
        seed = RandomSeed(int(seed))
    if design.T != cases.T or ww.design.T != cases.T:
        raise ValueError("design, wastewater, and cases must align")
    T = cases.T
    N = design.total_population

    fit_seed = seed.derive("filter")
    if joint_fit is None:
        joint_fit = fit_joint(cases, ww, config, particles, fit_seed, lag=lag)

    full_design = SurveillanceDesign.full(N, T)
    pred_seed = seed.derive("predictive")

    def one_replicate(r: int) -> np.ndarray:
        rng = pred_seed.replicate(r).generator()
        j = rng.choice(joint_fit.weights.size, p=joint_fit.weights)
        path = joint_fit.infections[j]
        merged = np.full(T, np.nan)
        for t in range(2, T + 1):
            observed = design.sampled_days[t - 1]
            covered = design.coverage[t - 1] if observed else 0.0
            missing = N - covered
            if missing <= 0:
                merged[t - 1] = ww.concentrations[t - 1]
                continue
            shed = float(_lagged_dot(path, config.shedding_kernel, t))
            mu = config.shedding_scale * shed / N
            if mu <= 0.0:
                raise DegeneracyError(
                    f"replicate {r}: drawn infection path sheds nothing on "
                    f"day {t}; cannot simulate a concentration"
                )
            sd = config.noise_base * math.sqrt(N / missing) * predictive_noise_inflation
            w_sim = math.exp(rng.normal(math.log(mu) - 0.5 * sd * sd, sd))
            if observed:
                merged[t - 1] = (covered * ww.concentrations[t - 1] + missing * w_sim) / N
            else:
                merged[t - 1] = w_sim
        merged_ww = WastewaterSeries(merged, full_design)
        try:
            refit = fit_joint(cases, merged_ww, config, particles, fit_seed, lag=lag)
        except Exception as exc:
            raise RuntimeError(
                f"replicate with seed {pred_seed.replicate(r)} failed to refit"
            ) from exc
        return refit.rt_var

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one_replicate, range(replicates)))
    else:
        rows = [one_replicate(r) for r in range(replicates)]
    replicate_vars = np.vstack(rows)

    var_joint = joint_fit.rt_var
    mean_var_full = replicate_vars.mean(axis=0)
    se = replicate_vars.std(axis=0, ddof=1) / math.sqrt(replicates)
    eur = var_joint - mean_var_full
    with np.errstate(divide="ignore", invalid="ignore"):
        eur_pct = np.where(var_joint > 0, 100.0 * eur / var_joint, 0.0)

    per_day = [
        EurResult(
            total_uncertainty=float(var_joint[t]),
            expected_remaining=float(mean_var_full[t]),
            eur=float(var_joint[t] - mean_var_full[t]),
            mc_standard_error=float(se[t]),
            replicates=replicates,
            per_replicate_remaining=replicate_vars[:, t].copy(),
        )
        for t in range(T)
    ]

    per_replicate_mean_reduction = (var_joint[None, :] - replicate_vars).mean(axis=1)
    aggregate_eur = float(per_replicate_mean_reduction.mean())
    aggregate_se = float(
        per_replicate_mean_reduction.std(ddof=1) / math.sqrt(replicates)
    )
    fraction_increased = float(np.mean(replicate_vars > var_joint[None, :]))

    return FullPopulationStudy(
        var_joint=var_joint,
        mean_var_full=mean_var_full,
        eur=eur,
        se=se,
        eur_pct=eur_pct,
        replicate_vars=replicate_vars,
        per_day=per_day,
        aggregate_eur=aggregate_eur,
        aggregate_se=aggregate_se,
        fraction_replicate_days_increased=fraction_increased,
        n_replicates=replicates,
    )
