"""Command-line interface.

Four subcommands: `prevalence` (conjugate testing model, reduction from
further tests), `renewal` (reproduction-number estimation with and
without underreporting), `surveillance` (the synthetic wastewater study),
and `voi` (value-of-information summaries). Every command takes --seed
and produces byte-identical CSVs for identical inputs and seeds;
--threads changes wall time only. Flags override values from the TOML
config's per-command section.

Exit codes: 0 success, 2 usage or config error, 3 data error,
4 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import datetime as dt
import sys
from pathlib import Path

import numpy as np

from .dataio import (
    format_value,
    load_config,
    read_case_series,
    read_serial_interval,
    read_wastewater,
    write_csv,
)
from .distributions import Beta
from .engine import eur_exact
from .errors import ConfigError, DataFormatError, DegeneracyError
from .losses import LogLoss, QuadraticLoss
from .prevalence import BinomialPrevalenceModel, HypergeometricPrevalenceModel, PrevalenceData
from .renewal import (
    EpidemicSeries,
    RenewalPrior,
    UnderreportingSpec,
    rt_eur_from_full_reporting,
    rt_posterior_perfect,
    rt_posterior_underreported_path,
    total_infectiousness,
)
from .rng import RandomSeed
from .surveillance import (
    JointModelConfig,
    SurveillanceDesign,
    WastewaterSeries,
    daily_ur_wastewater,
    eur_full_population,
    simulate_joint,
)
from .svgplot import Band, Line, Panel, render_panels
from .voi import eig, evpi, evsi, fisher_information_renewal

DEFAULT_SERIAL_INTERVAL = [0.15, 0.25, 0.25, 0.15, 0.1, 0.06, 0.04]
DEFAULT_SHEDDING_KERNEL = [0.05, 0.15, 0.2, 0.2, 0.15, 0.1, 0.1, 0.05]


class _Settings:
    """Layered option lookup: CLI flag, then config section, then default."""

    def __init__(self, args, command):
        self.args = args
        self.section = {}
        if getattr(args, "config", None):
            config = load_config(args.config)
            section = config.get(command, {})
            if not isinstance(section, dict):
                raise ConfigError(f"config section [{command}] must be a table")
            self.section = section

    def get(self, key, default=None, cast=None):
        value = getattr(self.args, key.replace("-", "_"), None)
        if value is None:
            value = self.section.get(key, default)
        if value is not None and cast is not None:
            try:
                value = cast(value)
            except (TypeError, ValueError):
                raise ConfigError(f"bad value for {key!r}: {value!r}") from None
        return value

    def require(self, key, cast=None):
        value = self.get(key, None, cast)
        if value is None:
            raise ConfigError(f"missing required option {key!r}")
        return value


def _common_arguments(sub):
    sub.add_argument("--config", type=Path, help="TOML config file")
    sub.add_argument("--seed", type=int, help="random seed (default 0)")
    sub.add_argument("--threads", type=int, help="worker threads for replicates")
    sub.add_argument("--out", type=Path, help="output directory (default .)")


def _setup(settings):
    seed = RandomSeed(int(settings.get("seed", 0, int)))
    threads = int(settings.get("threads", 1, int))
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    out = Path(settings.get("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return seed, threads, out


def _dates_from(start: dt.date, T: int):
    return [start + dt.timedelta(days=i) for i in range(T)]


# --- prevalence --------------------------------------------------------------


def cmd_prevalence(args) -> int:
    s = _Settings(args, "prevalence")
    seed, _, out = _setup(s)
    alpha0 = s.get("alpha0", 1.0, float)
    beta0 = s.get("beta0", 1.0, float)
    tested = s.get("tested", 10, int)
    positives = s.get("positives", 3, int)
    m_max = s.get("max-additional", 24, int)
    population = s.get("population", None, int)
    if alpha0 <= 0 or beta0 <= 0:
        raise ConfigError("alpha0 and beta0 must be positive")
    if tested < 0:
        raise ConfigError("tested must be >= 0")
    if not 0 <= positives <= tested:
        raise ConfigError("positives must lie in [0, tested]")
    if m_max < 0:
        raise ConfigError("max-additional must be >= 0")

    data = PrevalenceData(n=tested, n_pos=positives, population=population)
    model = BinomialPrevalenceModel(alpha0, beta0, data)
    posterior = model.posterior()

    hyper_posterior = None
    if population is not None:
        hyper_posterior = HypergeometricPrevalenceModel(data).posterior()

    if hyper_posterior is not None:
        grid = hyper_posterior.points
        rows = [
            (float(theta), posterior.density(float(theta)), float(mass))
            for theta, mass in zip(grid, hyper_posterior.weights)
        ]
        header = ["theta", "beta_posterior_density", "hypergeometric_posterior_mass"]
    else:
        grid = np.linspace(0.0, 1.0, 513)
        rows = [(float(t), posterior.density(float(t))) for t in grid]
        header = ["theta", "beta_posterior_density"]
    write_csv(out / "prevalence_posterior.csv", header, rows)

    ms = np.arange(m_max + 1)
    eur_rows = [(int(m), model.eur_quadratic(int(m))) for m in ms]
    write_csv(out / "prevalence_eur.csv", ["m", "eur"], eur_rows)

    dense = np.linspace(0.0, 1.0, 513)
    panel_post = Panel(
        title="Prevalence posterior",
        x_label="prevalence",
        y_label="density",
        lines=[Line(dense, np.array([posterior.density(float(t)) for t in dense]),
                    color="#1f6fb2", label="beta posterior")],
    )
    if hyper_posterior is not None:
        scale = float(np.max([posterior.density(float(t)) for t in dense]))
        mass = hyper_posterior.weights
        panel_post.lines.append(
            Line(hyper_posterior.points, mass / mass.max() * scale,
                 color="#b24d1f", label="finite-population (scaled)")
        )
    panel_eur = Panel(
        title="Expected variance reduction from m further tests",
        x_label="additional tests m",
        y_label="expected reduction",
        lines=[Line(ms.astype(float), np.array([r[1] for r in eur_rows]), color="#1f6fb2")],
    )
    render_panels(out / "prevalence.svg", [panel_post, panel_eur], ncols=1)

    print(f"posterior Beta({posterior.alpha:g}, {posterior.beta:g}), "
          f"variance {posterior.variance():.6g}")
    if m_max >= 12:
        print(f"expected reduction at m=12: {model.eur_quadratic(12):.6g}")
    print(f"wrote {out / 'prevalence_posterior.csv'}, {out / 'prevalence_eur.csv'}, "
          f"{out / 'prevalence.svg'} (seed {seed.stream_id})")
    return 0


# --- renewal -----------------------------------------------------------------


def cmd_renewal(args) -> int:
    s = _Settings(args, "renewal")
    seed, threads, out = _setup(s)
    cases_path = s.require("cases")
    serial_path = s.require("serial")
    rho = s.get("rho", 1.0, float)
    window = s.get("window", 1, int)
    shape = s.get("prior-shape", 1.0, float)
    rate = s.get("prior-rate", 0.2, float)
    particles = s.get("particles", 1000, int)
    replicates = s.get("replicates", 100, int)

    dates, counts = read_case_series(cases_path)
    weights = read_serial_interval(serial_path)
    try:
        series = EpidemicSeries(counts, weights)
        prior = RenewalPrior(shape=shape, rate=rate, window=window)
        spec = UnderreportingSpec(rho=rho)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    first = prior.window + 1
    if first > series.T:
        raise ConfigError(
            f"series too short: need at least {first} days for window {window}"
        )

    fit_seed = seed.derive("latent-fit")
    if rho < 1.0:
        posteriors = rt_posterior_underreported_path(
            series, prior, spec, particles, fit_seed
        )
    else:
        posteriors = [None] * (series.T + 1)
        for t in range(first, series.T + 1):
            posteriors[t] = rt_posterior_perfect(series, prior, t)

    rows = []
    eur_values, eur_ses = [], []
    for t in range(first, series.T + 1):
        perfect = rt_posterior_perfect(series, prior, t)
        under = posteriors[t]
        result = rt_eur_from_full_reporting(
            series, prior, spec, t, replicates, particles, seed, threads=threads
        )
        eur_values.append(result.eur)
        eur_ses.append(result.mc_standard_error)
        rows.append(
            (
                dates[t - 1].isoformat(),
                int(series.cases[t - 1]),
                total_infectiousness(series, t),
                perfect.mean(),
                perfect.variance(),
                perfect.quantile(0.05),
                perfect.quantile(0.95),
                under.mean(),
                under.variance(),
                result.eur,
                result.mc_standard_error,
                result.replicates,
            )
        )
    write_csv(
        out / "renewal_rt.csv",
        [
            "date",
            "cases",
            "total_infectiousness",
            "rt_mean_perfect",
            "rt_var_perfect",
            "rt_q05_perfect",
            "rt_q95_perfect",
            "rt_mean_underreported",
            "rt_var_underreported",
            "eur_full_reporting",
            "eur_se",
            "n_replicates",
        ],
        rows,
    )

    days = np.arange(first, series.T + 1, dtype=float)
    ribbon = Band(days, np.array([r[5] for r in rows]), np.array([r[6] for r in rows]))
    panel_rt = Panel(
        title="Reproduction number",
        x_label="day",
        y_label="R",
        bands=[ribbon],
        lines=[
            Line(days, np.array([r[3] for r in rows]), color="#1f6fb2", label="perfect reporting"),
            Line(days, np.array([r[7] for r in rows]), color="#b24d1f", label="underreported"),
        ],
    )
    panel_eur = Panel(
        title="Expected variance reduction from full reporting",
        x_label="day",
        y_label="expected reduction",
        lines=[Line(days, np.array(eur_values), color="#1f6fb2")],
        bands=[
            Band(
                days,
                np.array(eur_values) - 3.0 * np.array(eur_ses),
                np.array(eur_values) + 3.0 * np.array(eur_ses),
            )
        ],
    )
    render_panels(out / "renewal_rt.svg", [panel_rt, panel_eur], ncols=1)
    print(
        f"{len(rows)} days, reporting probability {rho:g}; mean expected "
        f"reduction {np.mean(eur_values):.6g}"
    )
    print(f"wrote {out / 'renewal_rt.csv'}, {out / 'renewal_rt.svg'}")
    return 0


# --- surveillance ------------------------------------------------------------


def _surveillance_config(s) -> JointModelConfig:
    serial = np.asarray(s.get("serial-interval", DEFAULT_SERIAL_INTERVAL), dtype=float)
    kernel = np.asarray(s.get("shedding-kernel", DEFAULT_SHEDDING_KERNEL), dtype=float)
    try:
        prior = RenewalPrior(
            shape=s.get("prior-shape", 2.0, float),
            rate=s.get("prior-rate", 2.0, float),
            window=s.get("window", 7, int),
        )
        return JointModelConfig(
            prior=prior,
            rw_sd=s.get("rw-sd", 0.08, float),
            rho=s.get("rho", 0.5, float),
            dispersion=s.get("dispersion", 20.0, float),
            serial_interval=serial,
            shedding_kernel=kernel,
            shedding_scale=s.get("shedding-scale", 10.0, float),
            noise_base=s.get("noise-base", 0.4, float),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _demo_design(s, seed, T, population) -> SurveillanceDesign:
    """Deterministic partial-coverage design: a seeded choice of sampled
    days (day 1 never sampled) with coverage fractions drawn uniformly."""
    n_sampled = s.get("sampled-days", 41, int)
    cov_min = s.get("coverage-min", 0.006, float)
    cov_max = s.get("coverage-max", 0.7, float)
    if not 0 < n_sampled <= T - 1:
        raise ConfigError(f"sampled-days must lie in [1, {T - 1}]")
    if not 0.0 < cov_min <= cov_max <= 1.0:
        raise ConfigError("need 0 < coverage-min <= coverage-max <= 1")
    rng = seed.derive("design").generator()
    chosen = rng.choice(np.arange(2, T + 1), size=n_sampled, replace=False)
    mask = np.zeros(T, dtype=bool)
    mask[chosen - 1] = True
    coverage = np.zeros(T)
    coverage[mask] = np.round(rng.uniform(cov_min, cov_max, n_sampled) * population)
    return SurveillanceDesign(population, coverage, mask)


def cmd_surveillance(args) -> int:
    s = _Settings(args, "surveillance")
    seed, threads, out = _setup(s)
    config = _surveillance_config(s)
    population = s.get("population", 5_150_000, int)
    replicates = s.get("replicates", 100, int)
    particles = s.get("particles", 2000, int)
    lag = s.get("lag", 10, int)
    inflation = s.get("noise-inflation", 1.0, float)
    coverage_full = bool(s.get("coverage-full", False))
    cases_path = s.get("cases")
    ww_path = s.get("wastewater")
    simulate = bool(s.get("simulate", cases_path is None))

    if simulate:
        T = s.get("days", 60, int)
        start = dt.date.fromisoformat(str(s.get("start-date", "2023-01-01")))
        if coverage_full:
            design = SurveillanceDesign.full(population, T)
        else:
            design = _demo_design(s, seed, T, population)
        try:
            cases, ww, truth = simulate_joint(
                config,
                design,
                T,
                seed.derive("simulate"),
                initial_infections=s.get("initial-infections", 300, int),
                r_start=s.get("r-start", 1.3, float),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        dates = _dates_from(start, T)
    else:
        if cases_path is None or ww_path is None:
            raise ConfigError("need both cases and wastewater files (or simulate)")
        dates, counts = read_case_series(cases_path)
        try:
            cases = EpidemicSeries(counts, config.serial_interval)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        observed = read_wastewater(ww_path)
        T = cases.T
        mask = np.zeros(T, dtype=bool)
        coverage = np.zeros(T)
        conc = np.full(T, np.nan)
        for day, (c, pop) in observed.items():
            if day not in dates:
                raise DataFormatError(
                    f"wastewater date {day} outside the case series", path=str(ww_path)
                )
            i = dates.index(day)
            mask[i] = True
            coverage[i] = pop
            conc[i] = c
        design = SurveillanceDesign(population, coverage, mask)
        ww = WastewaterSeries(conc, design)

    if replicates < 2:
        raise ConfigError("replicates must be >= 2")

    ur = daily_ur_wastewater(cases, ww, config, particles, seed, lag=lag)
    study = eur_full_population(
        cases,
        ww,
        config,
        design,
        replicates,
        particles,
        seed,
        threads=threads,
        lag=lag,
        predictive_noise_inflation=inflation,
        joint_fit=ur.fit_joint,
    )

    date_strs = [d.isoformat() for d in dates]
    write_csv(
        out / "study_ur.csv",
        ["date", "var_cases_only", "var_joint", "ur", "ur_pct"],
        [
            (date_strs[t], ur.var_cases_only[t], ur.var_joint[t], ur.ur[t], ur.ur_pct[t])
            for t in range(T)
        ],
    )
    write_csv(
        out / "study_eur.csv",
        ["date", "var_joint", "mean_var_full", "eur", "eur_pct", "se", "n_replicates"],
        [
            (
                date_strs[t],
                study.var_joint[t],
                study.mean_var_full[t],
                study.eur[t],
                study.eur_pct[t],
                study.se[t],
                study.n_replicates,
            )
            for t in range(T)
        ],
    )
    write_csv(
        out / "study_eur_replicates.csv",
        ["date", "replicate", "var_full"],
        [
            (date_strs[t], r, study.replicate_vars[r, t])
            for r in range(replicates)
            for t in range(T)
        ],
    )

    days_axis = np.arange(1, T + 1, dtype=float)
    panel_cases = Panel(
        title="Reported cases", x_label="day", y_label="cases",
        lines=[Line(days_axis, cases.cases.astype(float), color="#444444")],
    )
    panel_ww = Panel(
        title="Wastewater concentration (sampled days)", x_label="day", y_label="concentration",
        lines=[Line(days_axis, ww.concentrations, color="#1f6fb2")],
    )
    panel_cov = Panel(
        title="Catchment coverage", x_label="day", y_label="population",
        lines=[Line(days_axis, design.coverage, color="#1f6fb2", label="covered")],
        bands=[Band(days_axis, design.coverage,
                    np.full(T, float(population)), color="#9ecbe8", opacity=0.5)],
    )
    replicate_lines = [
        Line(days_axis, study.replicate_vars[r], color="#9ecbe8", width=0.6, opacity=0.35)
        for r in range(replicates)
    ]
    panel_var = Panel(
        title="Daily variance of the reproduction number",
        x_label="day", y_label="variance",
        lines=replicate_lines
        + [
            Line(days_axis, ur.var_cases_only, color="#e08214", width=1.8, label="cases only"),
            Line(days_axis, ur.var_joint, color="#08519c", width=1.8, label="cases + wastewater"),
            Line(days_axis, study.mean_var_full, color="#41a6d9", width=1.8, label="full sampling (mean)"),
        ],
    )
    render_panels(
        out / "surveillance.svg",
        [panel_cases, panel_ww, panel_cov, panel_var],
        ncols=1,
    )

    mean_ur_pct = float(np.mean(ur.ur_pct[1:]))
    print(
        f"daily reduction from observed wastewater: mean {mean_ur_pct:.1f}% of the "
        f"cases-only variance"
    )
    print(
        f"full-population sampling: aggregate expected reduction "
        f"{study.aggregate_eur:.6g} +- {study.aggregate_se:.6g} "
        f"({study.n_replicates} replicates)"
    )
    print(
        f"fraction of replicate-days with a variance increase: "
        f"{study.fraction_replicate_days_increased:.3f}"
    )
    print(f"wrote study_ur.csv, study_eur.csv, study_eur_replicates.csv, surveillance.svg in {out}")
    return 0


# --- value of information ----------------------------------------------------


def cmd_voi(args) -> int:
    s = _Settings(args, "voi")
    seed, _, out = _setup(s)
    alpha0 = s.get("alpha0", 1.0, float)
    beta0 = s.get("beta0", 1.0, float)
    tested = s.get("tested", 10, int)
    positives = s.get("positives", 3, int)
    m = s.get("additional", 12, int)
    fisher_r = s.get("fisher-r", 2.0, float)
    fisher_lambda = s.get("fisher-lambda", 8.0, float)

    try:
        model = BinomialPrevalenceModel(
            alpha0, beta0, PrevalenceData(n=tested, n_pos=positives)
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    pm = model.posterior_model()
    pred = model.predictive_model(m)

    quad = QuadraticLoss()
    evsi_result = evsi(quad, pm, pred)
    eur_quad = eur_exact(quad, pm, pred)
    evpi_value = evpi(quad, pm)
    eig_value = eig(pm, pred)
    eur_log = eur_exact(LogLoss(), pm, pred)
    fisher = fisher_information_renewal(fisher_r, fisher_lambda)

    rows = [
        ("evsi_quadratic", evsi_result.eur),
        ("eur_exact_quadratic", eur_quad.eur),
        ("evpi_quadratic", evpi_value),
        ("eig", eig_value),
        ("eur_exact_log", eur_log.eur),
        ("fisher_information", fisher),
        ("inverse_fisher_information", 1.0 / fisher if fisher > 0 else float("inf")),
    ]
    write_csv(out / "voi_report.csv", ["quantity", "value"], rows)
    for name, value in rows:
        print(f"{name}: {format_value(value)}")
    print(f"wrote {out / 'voi_report.csv'} (seed {seed.stream_id})")
    return 0


# --- entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uqcal",
        description="Decision-theoretic uncertainty quantification for epidemiological models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prevalence", help="prevalence posterior and reduction from further tests")
    _common_arguments(p)
    p.add_argument("--alpha0", type=float, help="prior alpha (default 1)")
    p.add_argument("--beta0", type=float, help="prior beta (default 1)")
    p.add_argument("--tested", type=int, help="subjects tested (default 10)")
    p.add_argument("--positives", type=int, help="positive results (default 3)")
    p.add_argument("--max-additional", type=int, help="largest m in the reduction curve")
    p.add_argument("--population", type=int, help="finite population for the hypergeometric model")
    p.set_defaults(func=cmd_prevalence)

    p = sub.add_parser("renewal", help="reproduction number estimation and reduction from full reporting")
    _common_arguments(p)
    p.add_argument("--cases", type=Path, help="CSV with date,cases")
    p.add_argument("--serial", type=Path, help="CSV with lag,weight")
    p.add_argument("--rho", type=float, help="reporting probability (default 1)")
    p.add_argument("--window", type=int, help="estimation window in days (default 1)")
    p.add_argument("--prior-shape", type=float, help="Gamma prior shape (default 1)")
    p.add_argument("--prior-rate", type=float, help="Gamma prior rate (default 0.2)")
    p.add_argument("--particles", type=int, help="filter particles (default 1000)")
    p.add_argument("--replicates", type=int, help="Monte Carlo replicates (default 100)")
    p.set_defaults(func=cmd_renewal)

    p = sub.add_parser("surveillance", help="synthetic wastewater surveillance study")
    _common_arguments(p)
    p.add_argument("--simulate", action="store_true", default=None,
                   help="simulate the dataset (default when no input files)")
    p.add_argument("--cases", type=Path, help="CSV with date,cases")
    p.add_argument("--wastewater", type=Path,
                   help="CSV with date,concentration,catchment_population")
    p.add_argument("--days", type=int, help="simulated days (default 60)")
    p.add_argument("--population", type=int, help="total population (default 5150000)")
    p.add_argument("--sampled-days", type=int, help="number of sampled days (default 41)")
    p.add_argument("--coverage-min", type=float, help="min coverage fraction")
    p.add_argument("--coverage-max", type=float, help="max coverage fraction")
    p.add_argument("--coverage-full", action="store_true", default=None,
                   help="sample the full population every day")
    p.add_argument("--replicates", type=int, help="predictive replicates (default 100)")
    p.add_argument("--particles", type=int, help="filter particles (default 2000)")
    p.add_argument("--lag", type=int, help="fixed-lag smoothing horizon (default 10)")
    p.add_argument("--rho", type=float, help="reporting probability (default 0.5)")
    p.add_argument("--dispersion", type=float, help="reporting overdispersion (default 20)")
    p.add_argument("--rw-sd", type=float, help="log random-walk sd (default 0.08)")
    p.add_argument("--noise-base", type=float, help="observation noise at full coverage")
    p.add_argument("--noise-inflation", type=float,
                   help="scale simulated (not observed) noise; >1 breaks coherence")
    p.add_argument("--shedding-scale", type=float, help="shedding scale (default 10)")
    p.add_argument("--prior-shape", type=float, help="Gamma prior shape (default 2)")
    p.add_argument("--prior-rate", type=float, help="Gamma prior rate (default 2)")
    p.add_argument("--window", type=int, help="margin used in reports (default 7)")
    p.add_argument("--initial-infections", type=int, help="day-one infections (default 300)")
    p.add_argument("--r-start", type=float, help="initial reproduction number (default 1.3)")
    p.add_argument("--start-date", type=str, help="date of day 1 (default 2023-01-01)")
    p.set_defaults(func=cmd_surveillance)

    p = sub.add_parser("voi", help="value-of-information summaries")
    _common_arguments(p)
    p.add_argument("--alpha0", type=float, help="prior alpha (default 1)")
    p.add_argument("--beta0", type=float, help="prior beta (default 1)")
    p.add_argument("--tested", type=int, help="subjects tested (default 10)")
    p.add_argument("--positives", type=int, help="positive results (default 3)")
    p.add_argument("--additional", type=int, help="further tests valued (default 12)")
    p.add_argument("--fisher-r", type=float, help="reproduction number for the information example")
    p.add_argument("--fisher-lambda", type=float, help="window total infectiousness")
    p.set_defaults(func=cmd_voi)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except DegeneracyError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
