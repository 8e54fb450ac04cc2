import math

import numpy as np
import pytest

from uqcal.distributions import NegativeBinomial, Poisson
from uqcal.errors import DegeneracyError
from uqcal.renewal import EpidemicSeries, RenewalPrior
from uqcal.rng import RandomSeed
from uqcal.surveillance import (
    JointModelConfig,
    SurveillanceDesign,
    WastewaterSeries,
    daily_ur_wastewater,
    eur_full_population,
    fit_joint,
    simulate_joint,
)

SERIAL = np.array([0.15, 0.25, 0.25, 0.15, 0.1, 0.06, 0.04])
KERNEL = np.array([0.05, 0.15, 0.2, 0.2, 0.15, 0.1, 0.1, 0.05])
T, N_POP = 60, 5_150_000
DEMO_SEED = RandomSeed(42)


def demo_config(noise_base=0.15, rho=0.3, dispersion=5.0, rw_sd=0.05):
    return JointModelConfig(
        prior=RenewalPrior(shape=2.0, rate=2.0, window=7),
        rw_sd=rw_sd,
        rho=rho,
        dispersion=dispersion,
        serial_interval=SERIAL,
        shedding_kernel=KERNEL,
        shedding_scale=10.0,
        noise_base=noise_base,
    )


def demo_design(seed=DEMO_SEED, sampled=41):
    rng = seed.derive("design").generator()
    chosen = rng.choice(np.arange(2, T + 1), size=sampled, replace=False)
    mask = np.zeros(T, dtype=bool)
    mask[chosen - 1] = True
    coverage = np.zeros(T)
    coverage[mask] = np.round(rng.uniform(0.006, 0.7, sampled) * N_POP)
    return SurveillanceDesign(N_POP, coverage, mask)


def demo_dataset(config=None, design=None):
    config = config or demo_config()
    design = design if design is not None else demo_design()
    cases, ww, truth = simulate_joint(
        config, design, T, DEMO_SEED.derive("simulate"),
        initial_infections=300, r_start=1.0,
    )
    return config, design, cases, ww, truth


class TestTypes:
    def test_design_bounds(self):
        with pytest.raises(ValueError):
            SurveillanceDesign(0, np.zeros(3), np.zeros(3, dtype=bool))
        with pytest.raises(ValueError):
            SurveillanceDesign(100, np.array([150.0]), np.array([True]))
        with pytest.raises(ValueError):
            SurveillanceDesign(100, np.array([0.0]), np.array([True]))

    def test_wastewater_alignment(self):
        design = SurveillanceDesign(100, np.array([0.0, 50.0]), np.array([False, True]))
        with pytest.raises(ValueError):
            WastewaterSeries(np.array([1.0, 2.0]), design)  # value on unsampled day
        with pytest.raises(ValueError):
            WastewaterSeries(np.array([np.nan, np.nan]), design)
        WastewaterSeries(np.array([np.nan, 2.0]), design)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            demo_config(noise_base=-0.1)
        with pytest.raises(ValueError):
            demo_config(rho=0.0)
        with pytest.raises(ValueError):
            demo_config(dispersion=0.0)
        with pytest.raises(ValueError):
            demo_config(rw_sd=0.0)


class TestSimulateJoint:
    def test_noise_free_limit_reproduces_signal(self):
        config, design, cases, ww, truth = demo_dataset(config=demo_config(noise_base=0.0))
        sampled = design.sampled_days
        np.testing.assert_allclose(
            ww.concentrations[sampled], truth["shedding_mean"][sampled], rtol=1e-12
        )

    def test_deterministic(self):
        _, design, cases_a, ww_a, _ = demo_dataset()
        _, _, cases_b, ww_b, _ = demo_dataset()
        assert np.array_equal(cases_a.cases, cases_b.cases)
        np.testing.assert_array_equal(ww_a.concentrations, ww_b.concentrations)

    def test_minimum_duration(self):
        config = demo_config()
        design = SurveillanceDesign(100, np.zeros(5), np.zeros(5, dtype=bool))
        with pytest.raises(ValueError, match="10 days"):
            simulate_joint(config, design, 5, DEMO_SEED)

    def test_full_reporting_low_dispersion_is_nearly_poisson(self):
        # the reporting law converges to Poisson as dispersion grows
        mu = 37.0
        nb = NegativeBinomial(mu, 1e7)
        po = Poisson(mu)
        ks = np.arange(0, 120)
        nb_mass = np.array([nb.density(int(k)) for k in ks])
        po_mass = np.array([po.density(int(k)) for k in ks])
        assert np.max(np.abs(nb_mass - po_mass)) < 1e-4

    def test_sampled_day_without_signal_is_an_error(self):
        config = demo_config()
        mask = np.zeros(T, dtype=bool)
        mask[0] = True  # lag-one shedding: no signal on day one
        coverage = np.where(mask, float(N_POP), 0.0)
        design = SurveillanceDesign(N_POP, coverage, mask)
        with pytest.raises(DegeneracyError, match="no shedding"):
            simulate_joint(config, design, T, DEMO_SEED)


class TestFitJoint:
    def test_particle_minimum(self):
        config, design, cases, ww, _ = demo_dataset()
        with pytest.raises(ValueError, match="particles"):
            fit_joint(cases, ww, config, 100, DEMO_SEED)

    def test_zero_noise_rejected_with_wastewater(self):
        config, design, cases, ww, _ = demo_dataset(config=demo_config(noise_base=0.0))
        with pytest.raises(ValueError, match="noise_base"):
            fit_joint(cases, ww, config, 600, DEMO_SEED)

    def test_deterministic(self):
        config, design, cases, ww, _ = demo_dataset()
        a = fit_joint(cases, ww, config, 800, RandomSeed(7), lag=7)
        b = fit_joint(cases, ww, config, 800, RandomSeed(7), lag=7)
        np.testing.assert_array_equal(a.rt_var, b.rt_var)
        np.testing.assert_array_equal(a.infections, b.infections)

    def test_cases_only_fit_ignores_wastewater(self):
        config, design, cases, ww, _ = demo_dataset()
        assert fit_joint(cases, None, config, 600, RandomSeed(1)).rt_var.shape == (T,)

    def test_informative_wastewater_tightens_interior_days(self):
        # low-noise full-coverage wastewater beats cases alone; the noise
        # floor is the smallest the bootstrap proposal tolerates at this size
        config = demo_config(noise_base=0.1)
        design = SurveillanceDesign.full(N_POP, T)
        cases, ww, _ = simulate_joint(
            config, design, T, DEMO_SEED.derive("simulate"),
            initial_infections=300, r_start=1.0,
        )
        seed = RandomSeed(55).derive("filter")
        fit_cases = fit_joint(cases, None, config, 3000, seed, lag=7)
        fit_both = fit_joint(cases, ww, config, 3000, seed, lag=7)
        interior = slice(7, T - 7)
        frac = np.mean(fit_both.rt_var[interior] < fit_cases.rt_var[interior])
        assert frac >= 0.95


class TestDailyUr:
    def test_no_sampled_days_means_identically_zero(self):
        config = demo_config()
        design = SurveillanceDesign(N_POP, np.zeros(T), np.zeros(T, dtype=bool))
        _, _, cases, _, _ = demo_dataset()
        ww = WastewaterSeries(np.full(T, np.nan), design)
        study = daily_ur_wastewater(cases, ww, config, 600, RandomSeed(1))
        assert np.all(study.ur == 0.0)

    def test_uninformative_wastewater_reduces_nothing(self):
        # enormous observation noise: the two fits share random numbers,
        # so the reduction collapses to filter-level jitter around zero
        config = demo_config(noise_base=5.0)
        mask = np.ones(T, dtype=bool)
        mask[0] = False
        coverage = np.where(mask, float(N_POP), 0.0)
        design = SurveillanceDesign(N_POP, coverage, mask)
        cases, ww, _ = simulate_joint(
            config, design, T, DEMO_SEED.derive("simulate"),
            initial_infections=300, r_start=1.0,
        )
        study = daily_ur_wastewater(cases, ww, config, 1500, RandomSeed(66), lag=7)
        scale = np.median(study.var_cases_only)
        assert np.median(np.abs(study.ur)) < 0.2 * scale

    def test_demo_reduction_is_substantial(self):
        config, design, cases, ww, _ = demo_dataset()
        study = daily_ur_wastewater(cases, ww, config, 2000, DEMO_SEED, lag=7)
        assert np.nanmean(study.ur_pct[1:]) > 5.0
        assert study.ur.shape == (T,)


class TestEurFullPopulation:
    def test_replicate_minimum(self):
        config, design, cases, ww, _ = demo_dataset()
        with pytest.raises(ValueError, match="replicates"):
            eur_full_population(cases, ww, config, design, 1, 600, DEMO_SEED)

    def test_full_coverage_leaves_nothing_to_collect(self):
        config = demo_config()
        design = SurveillanceDesign.full(N_POP, T)
        cases, ww, _ = simulate_joint(
            config, design, T, DEMO_SEED.derive("simulate"),
            initial_infections=300, r_start=1.0,
        )
        study = eur_full_population(cases, ww, config, design, 10, 800, RandomSeed(9), lag=7)
        # merged data equal observed data and refits share the fit's seed,
        # so the reduction is zero apart from float summation noise
        assert np.all(np.abs(study.eur) <= 3.0 * study.se + 1e-15)
        assert np.max(np.abs(study.eur)) < 1e-14

    def test_demo_study_properties(self):
        config, design, cases, ww, _ = demo_dataset()
        ur = daily_ur_wastewater(cases, ww, config, 2000, DEMO_SEED, lag=7)
        study = eur_full_population(
            cases, ww, config, design, 40, 2000, DEMO_SEED, lag=7, joint_fit=ur.fit_joint
        )
        # coherent by construction: no day significantly negative,
        # aggregate positive well beyond its error
        assert np.all(study.eur >= -3.0 * study.se)
        assert study.aggregate_eur > 3.0 * study.aggregate_se
        # individual replicates can still lose ground on individual days
        assert study.fraction_replicate_days_increased > 0.0

    def test_determinism_and_threads(self):
        config, design, cases, ww, _ = demo_dataset()
        a = eur_full_population(cases, ww, config, design, 8, 600, RandomSeed(4), lag=7)
        b = eur_full_population(cases, ww, config, design, 8, 600, RandomSeed(4), lag=7, threads=4)
        np.testing.assert_array_equal(a.replicate_vars, b.replicate_vars)
        np.testing.assert_array_equal(a.eur, b.eur)

    def test_per_day_results_are_consistent(self):
        config, design, cases, ww, _ = demo_dataset()
        study = eur_full_population(cases, ww, config, design, 8, 600, RandomSeed(4), lag=7)
        for t, res in enumerate(study.per_day):
            assert res.eur == res.total_uncertainty - res.expected_remaining
            assert res.replicates == 8
        assert study.replicate_vars.shape == (8, T)

    @pytest.mark.xfail(
        strict=True,
        reason=(
            "posterior width in this state-space model is set by the assumed "
            "observation noise, so doubling only the simulated noise cannot "
            "push any day's mean reduction significantly negative before the "
            "filter degenerates; see the decisions ledger"
        ),
    )
    def test_variance_inflation_produces_a_significantly_negative_day(self):
        config, design, cases, ww, _ = demo_dataset()
        ur = daily_ur_wastewater(cases, ww, config, 3000, DEMO_SEED, lag=7)
        study = eur_full_population(
            cases, ww, config, design, 60, 3000, DEMO_SEED, lag=7,
            joint_fit=ur.fit_joint, predictive_noise_inflation=2.0,
        )
        assert np.any(study.eur < -3.0 * study.se)


class TestEdgeUncertainty:
    def test_boundary_days_carry_more_uncertainty_than_interior(self):
        config, design, cases, ww, _ = demo_dataset()
        fit = fit_joint(cases, ww, config, 3000, DEMO_SEED.derive("filter"), lag=7)
        margin = config.prior.window
        start = fit.rt_var[:margin].mean()
        end = fit.rt_var[-margin:].mean()
        interior = np.median(fit.rt_var[margin:-margin])
        assert start > interior
        assert end > interior
