import math

import numpy as np
import pytest
from scipy import stats

from uqcal.distributions import Discrete, Gamma
from uqcal.errors import DegeneracyError
from uqcal.losses import QuadraticLoss
from uqcal.renewal import (
    EpidemicSeries,
    RenewalPrior,
    UnderreportingSpec,
    rt_eur_from_full_reporting,
    rt_posterior_perfect,
    rt_posterior_underreported,
    rt_posterior_underreported_path,
    simulate_epidemic,
    total_infectiousness,
)
from uqcal.rng import RandomSeed

W3 = np.array([0.5, 0.3, 0.2])


def grid_posterior_moments(series, prior, t, points=4096):
    """Oracle: brute-force grid posterior from the raw Poisson likelihood."""
    conj = rt_posterior_perfect(series, prior, t)
    hi = conj.quantile(1.0 - 1e-12) * 1.5 + 1.0
    grid = np.linspace(1e-9, hi, points)
    log_post = stats.gamma.logpdf(grid, prior.shape, scale=1.0 / prior.rate)
    start = t - prior.window + 1
    for s in range(start, t + 1):
        lam = total_infectiousness(series, s)
        log_post += stats.poisson.logpmf(series.cases[s - 1], grid * lam)
    log_post -= log_post.max()
    dens = np.exp(log_post)
    dens /= np.trapezoid(dens, grid)
    mean = np.trapezoid(grid * dens, grid)
    var = np.trapezoid((grid - mean) ** 2 * dens, grid)
    return mean, var


class TestSeries:
    def test_validation(self):
        with pytest.raises(ValueError):
            EpidemicSeries([1, -2, 3], W3)
        with pytest.raises(ValueError):
            EpidemicSeries([1, 2, 3], [0.5, 0.4])
        with pytest.raises(ValueError):
            EpidemicSeries([1, 2, 3], [-0.5, 1.5])
        with pytest.raises(ValueError):
            RenewalPrior(shape=0.0)
        with pytest.raises(ValueError):
            RenewalPrior(window=0)
        with pytest.raises(ValueError):
            UnderreportingSpec(rho=0.0)
        with pytest.raises(ValueError):
            UnderreportingSpec(rho=1.2)


class TestTotalInfectiousness:
    def test_hand_sum(self):
        series = EpidemicSeries([10, 20, 30, 0], W3)
        assert total_infectiousness(series, 4) == pytest.approx(
            30 * 0.5 + 20 * 0.3 + 10 * 0.2
        )

    def test_all_zero_history(self):
        series = EpidemicSeries([0, 0, 0], W3)
        assert total_infectiousness(series, 3) == 0.0

    def test_single_term(self):
        series = EpidemicSeries([7, 3], np.array([1.0]))
        assert total_infectiousness(series, 2) == 7.0

    def test_day_out_of_range(self):
        series = EpidemicSeries([1, 2, 3], W3)
        with pytest.raises(ValueError):
            total_infectiousness(series, 1)
        with pytest.raises(ValueError):
            total_infectiousness(series, 4)


class TestPerfectReporting:
    def test_single_day_window_values(self):
        series = EpidemicSeries([8, 10], np.array([1.0]))
        prior = RenewalPrior(shape=1.0, rate=0.2, window=1)
        post = rt_posterior_perfect(series, prior, 2)
        assert isinstance(post, Gamma)
        assert (post.shape, post.rate) == (11.0, 8.2)
        assert post.mean() == pytest.approx(1.34146, abs=1e-5)
        assert post.variance() == pytest.approx(0.16359, abs=1e-5)

    def test_zero_cases_in_window(self):
        series = EpidemicSeries([5, 0, 0], W3)
        prior = RenewalPrior(shape=1.5, rate=0.3, window=1)
        post = rt_posterior_perfect(series, prior, 3)
        lam = total_infectiousness(series, 3)
        assert (post.shape, post.rate) == (1.5, 0.3 + lam)

    def test_window_spanning_series_matches_additivity(self):
        series = EpidemicSeries([4, 6, 9, 11], W3)
        prior = RenewalPrior(shape=1.0, rate=0.2, window=3)
        post = rt_posterior_perfect(series, prior, 4)
        cases = series.cases[1:4].sum()
        lam = sum(total_infectiousness(series, s) for s in (2, 3, 4))
        assert post.shape == pytest.approx(prior.shape + cases)
        assert post.rate == pytest.approx(prior.rate + lam)

    def test_window_must_fit(self):
        series = EpidemicSeries([4, 6, 9, 11], W3)
        prior = RenewalPrior(window=4)
        with pytest.raises(ValueError, match="window"):
            rt_posterior_perfect(series, prior, 4)

    def test_zero_infectiousness_with_cases_is_undefined(self):
        series = EpidemicSeries([0, 3], np.array([1.0]))
        prior = RenewalPrior(window=1)
        with pytest.raises(ValueError, match="infectiousness"):
            rt_posterior_perfect(series, prior, 2)

    @pytest.mark.parametrize("window", [1, 3, 7])
    @pytest.mark.parametrize("seed", [11, 99])
    def test_matches_grid_posterior(self, window, seed):
        series, _, _ = simulate_epidemic(1.3, W3, 30, 1.0, 30, RandomSeed(seed))
        prior = RenewalPrior(shape=1.0, rate=0.2, window=window)
        for t in (window + 1, 15, 30):
            post = rt_posterior_perfect(series, prior, t)
            mean, var = grid_posterior_moments(series, prior, t)
            assert post.mean() == pytest.approx(mean, abs=1e-6)
            assert post.variance() == pytest.approx(var, abs=1e-6)

    def test_variance_identity(self):
        series, _, _ = simulate_epidemic(1.2, W3, 20, 1.0, 40, RandomSeed(3))
        prior = RenewalPrior(shape=1.0, rate=0.2, window=3)
        post = rt_posterior_perfect(series, prior, 10)
        assert post.variance() == pytest.approx(post.shape / post.rate**2, abs=1e-12)


class TestUnderreported:
    def test_particle_minimum_enforced(self):
        series, _, _ = simulate_epidemic(1.2, W3, 10, 0.5, 30, RandomSeed(5))
        with pytest.raises(ValueError, match="particles"):
            rt_posterior_underreported(
                series, RenewalPrior(), UnderreportingSpec(0.5), 5, 50, RandomSeed(1)
            )

    def test_full_reporting_returns_exact_posterior(self):
        series, _, _ = simulate_epidemic(1.2, W3, 12, 1.0, 30, RandomSeed(5))
        prior = RenewalPrior()
        post = rt_posterior_underreported(
            series, prior, UnderreportingSpec(1.0), 8, 500, RandomSeed(1)
        )
        exact = rt_posterior_perfect(series, prior, 8)
        assert isinstance(post, Gamma)
        assert (post.shape, post.rate) == (exact.shape, exact.rate)

    def test_variance_dominates_truth_conditional_oracle(self):
        # at half reporting, the latent-integrated posterior must be wider
        # than the conjugate posterior computed on the true infection series
        series, infections, _ = simulate_epidemic(1.3, W3, 20, 0.5, 50, RandomSeed(11))
        truth = EpidemicSeries(infections, W3)
        prior = RenewalPrior(shape=1.0, rate=0.2, window=1)
        spec = UnderreportingSpec(0.5)
        posts = rt_posterior_underreported_path(series, prior, spec, 800, RandomSeed(21))
        days = range(2, 21)
        wider = sum(
            posts[t].variance() > rt_posterior_perfect(truth, prior, t).variance()
            for t in days
        )
        assert wider >= 0.9 * len(list(days))

    def test_path_matches_single_day_calls(self):
        series, _, _ = simulate_epidemic(1.25, W3, 15, 0.6, 40, RandomSeed(9))
        prior = RenewalPrior(window=2)
        spec = UnderreportingSpec(0.6)
        path = rt_posterior_underreported_path(series, prior, spec, 300, RandomSeed(4))
        for t in (5, 10, 15):
            single = rt_posterior_underreported(series, prior, spec, t, 300, RandomSeed(4))
            assert np.array_equal(path[t].points, single.points)
            assert np.array_equal(path[t].weights, single.weights)

    def test_convergence_to_perfect_as_rho_rises(self):
        series, _, _ = simulate_epidemic(1.3, W3, 20, 1.0, 60, RandomSeed(33))
        prior = RenewalPrior(shape=1.0, rate=0.2, window=1)
        mean_vars = []
        for rho in (0.5, 0.8, 0.95, 1.0):
            posts = rt_posterior_underreported_path(
                series, prior, UnderreportingSpec(rho), 1500, RandomSeed(77)
            )
            mean_vars.append(np.mean([posts[t].variance() for t in range(2, 21)]))
        assert mean_vars[0] > mean_vars[1] > mean_vars[2] > mean_vars[3]

    def test_deterministic(self):
        series, _, _ = simulate_epidemic(1.2, W3, 15, 0.5, 40, RandomSeed(2))
        prior = RenewalPrior()
        spec = UnderreportingSpec(0.5)
        a = rt_posterior_underreported(series, prior, spec, 10, 300, RandomSeed(8))
        b = rt_posterior_underreported(series, prior, spec, 10, 300, RandomSeed(8))
        assert np.array_equal(a.points, b.points)


class TestEurFromFullReporting:
    def test_full_reporting_has_nothing_to_learn(self):
        series, _, _ = simulate_epidemic(1.2, W3, 15, 1.0, 40, RandomSeed(2))
        res = rt_eur_from_full_reporting(
            series, RenewalPrior(), UnderreportingSpec(1.0), 10, 50, 300, RandomSeed(3)
        )
        assert res.eur == 0.0
        assert res.mc_standard_error == 0.0

    def test_positive_on_majority_of_days_when_underreported(self):
        series, _, _ = simulate_epidemic(1.3, W3, 20, 0.5, 50, RandomSeed(11))
        prior = RenewalPrior(shape=1.0, rate=0.2, window=1)
        spec = UnderreportingSpec(0.5)
        days = list(range(2, 21))
        strongly_positive = 0
        for t in days:
            res = rt_eur_from_full_reporting(
                series, prior, spec, t, 60, 500, RandomSeed(100 + t)
            )
            assert res.eur >= -3.0 * res.mc_standard_error
            if res.eur > 3.0 * res.mc_standard_error:
                strongly_positive += 1
        assert strongly_positive > len(days) / 2

    def test_replicate_minimum(self):
        series, _, _ = simulate_epidemic(1.2, W3, 12, 0.5, 40, RandomSeed(2))
        with pytest.raises(ValueError, match="replicates"):
            rt_eur_from_full_reporting(
                series, RenewalPrior(), UnderreportingSpec(0.5), 8, 1, 300, RandomSeed(3)
            )

    def test_threads_do_not_change_values(self):
        series, _, _ = simulate_epidemic(1.2, W3, 15, 0.5, 40, RandomSeed(2))
        prior = RenewalPrior()
        spec = UnderreportingSpec(0.5)
        a = rt_eur_from_full_reporting(series, prior, spec, 10, 40, 300, RandomSeed(5), threads=1)
        b = rt_eur_from_full_reporting(series, prior, spec, 10, 40, 300, RandomSeed(5), threads=3)
        assert a.eur == b.eur
        assert np.array_equal(a.per_replicate_remaining, b.per_replicate_remaining)


class TestSimulateEpidemic:
    def test_deterministic(self):
        a = simulate_epidemic(1.3, W3, 25, 0.7, 20, RandomSeed(42))
        b = simulate_epidemic(1.3, W3, 25, 0.7, 20, RandomSeed(42))
        assert np.array_equal(a[0].cases, b[0].cases)
        assert np.array_equal(a[1], b[1])

    def test_reporting_bounds(self):
        series, infections, _ = simulate_epidemic(1.3, W3, 25, 0.7, 20, RandomSeed(42))
        assert np.all(series.cases <= infections)
        assert series.cases[0] == infections[0]

    def test_time_varying_profile(self):
        r = np.linspace(1.5, 0.7, 30)
        series, infections, r_used = simulate_epidemic(r, W3, 30, 1.0, 50, RandomSeed(1))
        assert np.array_equal(r_used, r)
        assert np.array_equal(series.cases, infections)

    def test_validation(self):
        with pytest.raises(ValueError):
            simulate_epidemic(1.2, W3, 0, 0.5, 10, RandomSeed(1))
        with pytest.raises(ValueError):
            simulate_epidemic(1.2, W3, 10, 0.0, 10, RandomSeed(1))
        with pytest.raises(ValueError):
            simulate_epidemic(1.2, W3, 10, 0.5, 0, RandomSeed(1))
