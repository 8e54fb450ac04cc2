"""Infection prevalence estimation from a tested subsample.

Two models of where the uncertainty lives:

- a binomial model with a conjugate Beta prior, where the untested
  population is treated as infinite and the posterior variance vanishes
  only as the number tested grows without bound;
- a finite-population hypergeometric model with a prior on the total
  number infected, where the posterior variance hits exactly zero once
  everyone has been tested.

Both expose adapters to the uncertainty engine: a refittable posterior and
a posterior-predictive model for the outcomes of further testing, which is
coherent with the refit by construction. A deliberately variance-inflated
predictive is provided as the canonical incoherent counterexample.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from .distributions import Beta, BetaBinomial, Discrete, point_mass
from .engine import PosteriorModel, PredictiveModel

__all__ = [
    "PrevalenceData",
    "BinomialPrevalenceModel",
    "HypergeometricPrevalenceModel",
]


@dataclass(frozen=True)
class PrevalenceData:
    """Testing outcome: n_pos positives among n tested.

    `population` is the finite population size, required only by the
    hypergeometric model.
    """

    n: int
    n_pos: int
    population: Optional[int] = None

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("tested count must be >= 0")
        if not 0 <= self.n_pos <= self.n:
            raise ValueError("positives must lie in [0, tested]")
        if self.population is not None:
            if self.population < 1:
                raise ValueError("population must be >= 1")
            if self.n > self.population:
                raise ValueError("cannot test more subjects than the population")


class BinomialPrevalenceModel:
    """Beta prior + binomial sampling model for prevalence."""

    def __init__(self, prior_alpha, prior_beta, data: PrevalenceData):
        if prior_alpha <= 0 or prior_beta <= 0:
            raise ValueError("prior parameters must be positive")
        self.prior_alpha = float(prior_alpha)
        self.prior_beta = float(prior_beta)
        self.data = data

    @property
    def _posterior_params(self):
        a = self.prior_alpha + self.data.n_pos
        b = self.prior_beta + self.data.n - self.data.n_pos
        return a, b

    def posterior(self) -> Beta:
        """Conjugate update: counts add onto the prior parameters."""
        return Beta(*self._posterior_params)

    def posterior_predictive(self, m: int) -> BetaBinomial:
        """Distribution of positives among m further tests."""
        if m < 0:
            raise ValueError("additional tests must be >= 0")
        a, b = self._posterior_params
        return BetaBinomial(m, a, b)

    def eur_quadratic(self, m: int) -> float:
        """Expected posterior-variance reduction from m further tests.

        Closed form: with posterior Beta(a, b), the expected reduction is
        m*a*b / ((a+b)^2 (a+b+1) (a+b+m)), which approaches the full
        posterior variance as m grows.
        """
        if m < 0:
            raise ValueError("additional tests must be >= 0")
        a, b = self._posterior_params
        s = a + b
        return m * a * b / (s * s * (s + 1.0) * (s + m))

    def refit(self, y_miss) -> Beta:
        """Posterior after m further tests with k positives, y_miss = (m, k)."""
        m, k = y_miss
        if m < 0 or not 0 <= k <= m:
            raise ValueError(f"invalid further-testing outcome {y_miss!r}")
        a, b = self._posterior_params
        return Beta(a + k, b + m - k)

    def posterior_model(self) -> PosteriorModel:
        return PosteriorModel(
            target_label="prevalence",
            posterior=self.posterior(),
            refit=self.refit,
        )

    def predictive_model(self, m: int) -> PredictiveModel:
        """Posterior predictive over (m, positives); coherent with refit."""
        return _further_testing_predictive(self.posterior_predictive(m), declared=True)

    def inflated_predictive_model(self, m: int) -> PredictiveModel:
        """Variance-inflated predictive (halved mixing parameters).

        Same mean number of positives, strictly larger spread; pairing it
        with the unmodified refit is the standard incoherent setup where
        extra data can increase uncertainty on average.
        """
        if m < 0:
            raise ValueError("additional tests must be >= 0")
        a, b = self._posterior_params
        return _further_testing_predictive(BetaBinomial(m, a / 2.0, b / 2.0))


def _further_testing_predictive(pp: BetaBinomial, declared=None) -> PredictiveModel:
    """Wrap a positives-count law as a predictive over (m, positives)."""
    m = pp.trials

    def simulate(rng):
        return (m, int(pp.sample(rng, 1)[0]))

    def enumerate_support():
        ks = np.arange(m + 1)
        if m == 0:
            weights = np.ones(1)
        else:
            weights = stats.betabinom.pmf(ks, m, pp.a, pp.b)
            weights = weights / weights.sum()
        return [(m, int(k)) for k in ks], weights

    return PredictiveModel(
        simulate=simulate, enumerate_support=enumerate_support, declared_coherent=declared
    )


class HypergeometricPrevalenceModel:
    """Finite-population model with a prior on the total number infected.

    The missing data are the positives among the untested; the prevalence
    is (observed positives + missing positives) / population, a discrete
    quantity on a grid of population+1 values.
    """

    def __init__(self, data: PrevalenceData, prior_total_positives: Optional[Discrete] = None):
        if data.population is None:
            raise ValueError("hypergeometric model requires a finite population size")
        self.data = data
        N = data.population
        if prior_total_positives is None:
            prior_total_positives = Discrete(np.arange(N + 1), np.ones(N + 1))
        pts = prior_total_positives.points
        if np.any(pts != np.round(pts)) or pts.min() < 0 or pts.max() > N:
            raise ValueError("prior support must be integers in {0..population}")
        self.prior_total_positives = prior_total_positives

    def _posterior_table(self):
        """Unnormalised posterior over the total number infected K."""
        N, n, n_pos = self.data.population, self.data.n, self.data.n_pos
        support = self.prior_total_positives.points.astype(int)
        prior_w = self.prior_total_positives.weights
        like = stats.hypergeom.pmf(n_pos, N, support, n)
        post = prior_w * like
        total = post.sum()
        if total <= 0.0:
            raise ValueError(
                "prior puts no mass on any total consistent with the observation"
            )
        return support, post / total

    def posterior_missing_positives(self) -> Discrete:
        """Posterior over the number of positives among the untested."""
        support, weights = self._posterior_table()
        keep = weights > 0.0
        return Discrete(support[keep] - self.data.n_pos, weights[keep])

    def posterior(self) -> Discrete:
        """Posterior over prevalence on the grid {K / population}."""
        support, weights = self._posterior_table()
        keep = weights > 0.0
        N = self.data.population
        if keep.sum() == 1:
            return point_mass(float(support[keep][0]) / N)
        return Discrete(support[keep] / N, weights[keep])
