"""Probability distributions used by the model suites.

Each family is a small immutable class exposing the same surface: log
density (or mass), analytic mean and variance, entropy, quantiles, and
seeded sampling. Values are safe to share across threads; sampling never
touches hidden state because the seed is an explicit argument.

Conventions:
- quadrature uses absolute tolerance 1e-10,
- infinite discrete sums truncate once the remaining tail mass < 1e-12,
- quantiles of discrete laws return the smallest support point whose CDF
  reaches the requested level (infimum convention).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special, stats

from .rng import as_generator

__all__ = [
    "Distribution",
    "Beta",
    "Binomial",
    "BetaBinomial",
    "Hypergeometric",
    "Gamma",
    "Poisson",
    "NegativeBinomial",
    "LogNormal",
    "Normal",
    "Discrete",
    "point_mass",
]

QUAD_ABS_TOL = 1e-10
TAIL_MASS_TOL = 1e-12


def _require(condition, message):
    if not condition:
        raise ValueError(message)


def _require_int(x, name):
    if not float(x).is_integer():
        raise ValueError(f"{name} must be an integer, got {x}")
    return int(x)


class Distribution:
    """Common surface for all families. Subclasses are immutable."""

    is_discrete = False

    def support(self):
        """Return (lower, upper) bounds of the support."""
        raise NotImplementedError

    def log_density(self, x):
        """Log mass (discrete) or log density (continuous) at x.

        Raises ValueError when x lies outside the support.
        """
        raise NotImplementedError

    def mean(self):
        raise NotImplementedError

    def variance(self):
        raise NotImplementedError

    def moments(self):
        """Analytic (mean, variance) pair."""
        return self.mean(), self.variance()

    def std(self):
        return math.sqrt(self.variance())

    def entropy(self):
        """Shannon entropy (discrete) or differential entropy (continuous)."""
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def quantile(self, q):
        raise NotImplementedError

    def sample(self, seed, n):
        """Draw n values, deterministically for a given RandomSeed."""
        _require(n >= 0, "sample size must be non-negative")
        rng = as_generator(seed)
        return self._draw(rng, int(n))

    def _draw(self, rng, n):
        raise NotImplementedError

    def density(self, x):
        return math.exp(self.log_density(x))

    def expect(self, fn, points=()):
        """E[fn(Z)] by adaptive quadrature or summation.

        `points` marks locations where fn has kinks so the integrator can
        split there (needed for piecewise-linear losses).
        """
        if self.is_discrete:
            return self._expect_discrete(fn)
        return self._expect_continuous(fn, points)

    def _expect_discrete(self, fn):
        lo, hi = self.support()
        if math.isinf(hi):
            hi = self._truncation_bound()
        ks = np.arange(int(lo), int(hi) + 1)
        masses = np.exp([self.log_density(int(k)) for k in ks])
        return float(sum(m * fn(k) for k, m in zip(ks, masses)))

    def _expect_continuous(self, fn, points):
        lo, hi = self.support()
        cuts = sorted(p for p in points if lo < p < hi)
        edges = [lo] + cuts + [hi]
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            val, _ = integrate.quad(
                lambda x: fn(x) * self.density(x),
                a, b, epsabs=QUAD_ABS_TOL, limit=200,
            )
            total += val
        return total

    def _truncation_bound(self):
        """Smallest k with tail mass beyond k below TAIL_MASS_TOL."""
        raise NotImplementedError

    def _shannon_entropy_by_summation(self):
        lo, hi = self.support()
        if math.isinf(hi):
            hi = self._truncation_bound()
        total = 0.0
        for k in range(int(lo), int(hi) + 1):
            lp = self.log_density(k)
            if lp > -np.inf:
                total -= math.exp(lp) * lp
        return total


class Beta(Distribution):
    """Beta(alpha, beta) on the unit interval."""

    def __init__(self, alpha, beta):
        _require(alpha > 0 and beta > 0, "Beta requires alpha > 0 and beta > 0")
        self.alpha = float(alpha)
        self.beta = float(beta)

    def __repr__(self):
        return f"Beta({self.alpha:g}, {self.beta:g})"

    def support(self):
        return (0.0, 1.0)

    def log_density(self, x):
        _require(0.0 <= x <= 1.0, f"{x} outside [0, 1]")
        return float(stats.beta.logpdf(x, self.alpha, self.beta))

    def mean(self):
        return self.alpha / (self.alpha + self.beta)

    def variance(self):
        a, b = self.alpha, self.beta
        s = a + b
        return a * b / (s * s * (s + 1.0))

    def entropy(self):
        a, b = self.alpha, self.beta
        return float(
            special.betaln(a, b)
            - (a - 1.0) * special.digamma(a)
            - (b - 1.0) * special.digamma(b)
            + (a + b - 2.0) * special.digamma(a + b)
        )

    def cdf(self, x):
        return float(stats.beta.cdf(x, self.alpha, self.beta))

    def quantile(self, q):
        return float(stats.beta.ppf(q, self.alpha, self.beta))

    def _draw(self, rng, n):
        return rng.beta(self.alpha, self.beta, size=n)


class Binomial(Distribution):
    """Binomial(trials, p): successes in a fixed number of trials."""

    is_discrete = True

    def __init__(self, trials, p):
        trials = _require_int(trials, "trials")
        _require(trials >= 0, "trials must be >= 0")
        _require(0.0 <= p <= 1.0, "p must lie in [0, 1]")
        self.trials = trials
        self.p = float(p)

    def __repr__(self):
        return f"Binomial({self.trials}, {self.p:g})"

    def support(self):
        return (0, self.trials)

    def log_density(self, x):
        k = _require_int(x, "outcome")
        _require(0 <= k <= self.trials, f"{k} outside {{0..{self.trials}}}")
        return float(stats.binom.logpmf(k, self.trials, self.p))

    def mean(self):
        return self.trials * self.p

    def variance(self):
        return self.trials * self.p * (1.0 - self.p)

    def entropy(self):
        return self._shannon_entropy_by_summation()

    def cdf(self, x):
        return float(stats.binom.cdf(x, self.trials, self.p))

    def quantile(self, q):
        return int(stats.binom.ppf(q, self.trials, self.p))

    def _draw(self, rng, n):
        return rng.binomial(self.trials, self.p, size=n)


class BetaBinomial(Distribution):
    """Binomial(trials, p) with p integrated over Beta(a, b)."""

    is_discrete = True

    def __init__(self, trials, a, b):
        trials = _require_int(trials, "trials")
        _require(trials >= 0, "trials must be >= 0")
        _require(a > 0 and b > 0, "BetaBinomial requires a > 0 and b > 0")
        self.trials = trials
        self.a = float(a)
        self.b = float(b)

    def __repr__(self):
        return f"BetaBinomial({self.trials}, {self.a:g}, {self.b:g})"

    def support(self):
        return (0, self.trials)

    def log_density(self, x):
        k = _require_int(x, "outcome")
        _require(0 <= k <= self.trials, f"{k} outside {{0..{self.trials}}}")
        if self.trials == 0:
            return 0.0
        return float(stats.betabinom.logpmf(k, self.trials, self.a, self.b))

    def mean(self):
        return self.trials * self.a / (self.a + self.b)

    def variance(self):
        m, a, b = self.trials, self.a, self.b
        s = a + b
        return m * a * b * (s + m) / (s * s * (s + 1.0))

    def entropy(self):
        return self._shannon_entropy_by_summation()

    def cdf(self, x):
        if self.trials == 0:
            return 0.0 if x < 0 else 1.0
        return float(stats.betabinom.cdf(x, self.trials, self.a, self.b))

    def quantile(self, q):
        if self.trials == 0:
            return 0
        return int(stats.betabinom.ppf(q, self.trials, self.a, self.b))

    def _draw(self, rng, n):
        p = rng.beta(self.a, self.b, size=n)
        return rng.binomial(self.trials, p)


class Hypergeometric(Distribution):
    """Positives seen when drawing `draws` from a population of `total`
    containing `positives` marked items, without replacement."""

    is_discrete = True

    def __init__(self, total, positives, draws):
        total = _require_int(total, "total")
        positives = _require_int(positives, "positives")
        draws = _require_int(draws, "draws")
        _require(total >= 0, "total must be >= 0")
        _require(0 <= positives <= total, "positives must lie in [0, total]")
        _require(0 <= draws <= total, "draws must lie in [0, total]")
        self.total = total
        self.positives = positives
        self.draws = draws

    def __repr__(self):
        return f"Hypergeometric({self.total}, {self.positives}, {self.draws})"

    def support(self):
        lo = max(0, self.draws - (self.total - self.positives))
        hi = min(self.draws, self.positives)
        return (lo, hi)

    def log_density(self, x):
        k = _require_int(x, "outcome")
        lo, hi = self.support()
        _require(lo <= k <= hi, f"{k} outside {{{lo}..{hi}}}")
        return float(stats.hypergeom.logpmf(k, self.total, self.positives, self.draws))

    def mean(self):
        if self.total == 0:
            return 0.0
        return self.draws * self.positives / self.total

    def variance(self):
        N, K, n = self.total, self.positives, self.draws
        if N <= 1 or n == 0 or n == N:
            return 0.0
        frac = K / N
        return n * frac * (1.0 - frac) * (N - n) / (N - 1.0)

    def entropy(self):
        return self._shannon_entropy_by_summation()

    def cdf(self, x):
        return float(stats.hypergeom.cdf(x, self.total, self.positives, self.draws))

    def quantile(self, q):
        return int(stats.hypergeom.ppf(q, self.total, self.positives, self.draws))

    def _draw(self, rng, n):
        if self.draws == 0:
            return np.zeros(n, dtype=np.int64)
        return rng.hypergeometric(
            self.positives, self.total - self.positives, self.draws, size=n
        )


class Gamma(Distribution):
    """Gamma with shape/rate parameterisation (mean = shape / rate)."""

    def __init__(self, shape, rate):
        _require(shape > 0 and rate > 0, "Gamma requires shape > 0 and rate > 0")
        self.shape = float(shape)
        self.rate = float(rate)

    def __repr__(self):
        return f"Gamma({self.shape:g}, {self.rate:g})"

    def support(self):
        return (0.0, math.inf)

    def log_density(self, x):
        _require(x >= 0.0, f"{x} outside [0, inf)")
        return float(stats.gamma.logpdf(x, self.shape, scale=1.0 / self.rate))

    def mean(self):
        return self.shape / self.rate

    def variance(self):
        return self.shape / (self.rate * self.rate)

    def entropy(self):
        a = self.shape
        return float(
            a - math.log(self.rate) + special.gammaln(a)
            + (1.0 - a) * special.digamma(a)
        )

    def cdf(self, x):
        return float(stats.gamma.cdf(x, self.shape, scale=1.0 / self.rate))

    def quantile(self, q):
        return float(stats.gamma.ppf(q, self.shape, scale=1.0 / self.rate))

    def _draw(self, rng, n):
        return rng.gamma(self.shape, scale=1.0 / self.rate, size=n)


class Poisson(Distribution):
    """Poisson counts with rate lam >= 0 (lam = 0 is a point mass at 0)."""

    is_discrete = True

    def __init__(self, lam):
        _require(lam >= 0, "Poisson requires lam >= 0")
        self.lam = float(lam)

    def __repr__(self):
        return f"Poisson({self.lam:g})"

    def support(self):
        if self.lam == 0.0:
            return (0, 0)
        return (0, math.inf)

    def log_density(self, x):
        k = _require_int(x, "outcome")
        _require(k >= 0, f"{k} outside {{0, 1, ...}}")
        if self.lam == 0.0:
            _require(k == 0, f"{k} outside {{0}}")
            return 0.0
        return float(stats.poisson.logpmf(k, self.lam))

    def mean(self):
        return self.lam

    def variance(self):
        return self.lam

    def entropy(self):
        return self._shannon_entropy_by_summation()

    def cdf(self, x):
        return float(stats.poisson.cdf(x, self.lam))

    def quantile(self, q):
        return int(stats.poisson.ppf(q, self.lam))

    def _truncation_bound(self):
        return int(stats.poisson.ppf(1.0 - TAIL_MASS_TOL / 10.0, self.lam)) + 10

    def _draw(self, rng, n):
        return rng.poisson(self.lam, size=n)


class NegativeBinomial(Distribution):
    """Overdispersed counts parameterised by (mean, dispersion).

    Variance is mean + mean^2 / dispersion, the convention used for
    epidemiological observation noise; dispersion -> inf recovers Poisson.
    """

    is_discrete = True

    def __init__(self, mean, dispersion):
        _require(mean > 0, "NegativeBinomial requires mean > 0")
        _require(dispersion > 0, "NegativeBinomial requires dispersion > 0")
        self.mu = float(mean)
        self.dispersion = float(dispersion)

    def __repr__(self):
        return f"NegativeBinomial({self.mu:g}, {self.dispersion:g})"

    @property
    def _scipy_args(self):
        k = self.dispersion
        return k, k / (k + self.mu)

    def support(self):
        return (0, math.inf)

    def log_density(self, x):
        j = _require_int(x, "outcome")
        _require(j >= 0, f"{j} outside {{0, 1, ...}}")
        n, p = self._scipy_args
        return float(stats.nbinom.logpmf(j, n, p))

    def mean(self):
        return self.mu

    def variance(self):
        return self.mu + self.mu * self.mu / self.dispersion

    def entropy(self):
        return self._shannon_entropy_by_summation()

    def cdf(self, x):
        n, p = self._scipy_args
        return float(stats.nbinom.cdf(x, n, p))

    def quantile(self, q):
        n, p = self._scipy_args
        return int(stats.nbinom.ppf(q, n, p))

    def _truncation_bound(self):
        n, p = self._scipy_args
        return int(stats.nbinom.ppf(1.0 - TAIL_MASS_TOL / 10.0, n, p)) + 10

    def _draw(self, rng, n):
        shape, p = self._scipy_args
        return rng.negative_binomial(shape, p, size=n)


class LogNormal(Distribution):
    """exp of a Normal(mu, sigma) variate, sigma > 0."""

    def __init__(self, mu, sigma):
        _require(sigma > 0, "LogNormal requires sigma > 0")
        self.mu = float(mu)
        self.sigma = float(sigma)

    def __repr__(self):
        return f"LogNormal({self.mu:g}, {self.sigma:g})"

    def support(self):
        return (0.0, math.inf)

    def log_density(self, x):
        _require(x > 0.0, f"{x} outside (0, inf)")
        return float(stats.lognorm.logpdf(x, self.sigma, scale=math.exp(self.mu)))

    def mean(self):
        return math.exp(self.mu + 0.5 * self.sigma**2)

    def variance(self):
        s2 = self.sigma**2
        return (math.exp(s2) - 1.0) * math.exp(2.0 * self.mu + s2)

    def entropy(self):
        return self.mu + 0.5 * math.log(2.0 * math.pi * math.e * self.sigma**2)

    def cdf(self, x):
        return float(stats.lognorm.cdf(x, self.sigma, scale=math.exp(self.mu)))

    def quantile(self, q):
        return float(stats.lognorm.ppf(q, self.sigma, scale=math.exp(self.mu)))

    def _draw(self, rng, n):
        return rng.lognormal(self.mu, self.sigma, size=n)


class Normal(Distribution):
    """Normal(mu, sigma). sigma = 0 degenerates to a point mass at mu,
    whose differential entropy is reported as -inf."""

    def __init__(self, mu, sigma):
        _require(sigma >= 0, "Normal requires sigma >= 0")
        self.mu = float(mu)
        self.sigma = float(sigma)

    def __repr__(self):
        return f"Normal({self.mu:g}, {self.sigma:g})"

    @property
    def _degenerate(self):
        return self.sigma == 0.0

    def support(self):
        if self._degenerate:
            return (self.mu, self.mu)
        return (-math.inf, math.inf)

    def log_density(self, x):
        if self._degenerate:
            _require(x == self.mu, f"{x} outside {{{self.mu}}}")
            return math.inf
        return float(stats.norm.logpdf(x, self.mu, self.sigma))

    def mean(self):
        return self.mu

    def variance(self):
        return self.sigma**2

    def entropy(self):
        if self._degenerate:
            return -math.inf
        return 0.5 * math.log(2.0 * math.pi * math.e * self.sigma**2)

    def cdf(self, x):
        if self._degenerate:
            return 0.0 if x < self.mu else 1.0
        return float(stats.norm.cdf(x, self.mu, self.sigma))

    def quantile(self, q):
        if self._degenerate:
            return self.mu
        return float(stats.norm.ppf(q, self.mu, self.sigma))

    def _draw(self, rng, n):
        return rng.normal(self.mu, self.sigma, size=n)


class Discrete(Distribution):
    """Arbitrary law on a finite set of points, e.g. a weighted sample or a
    posterior over a grid. Weights are normalised on construction."""

    is_discrete = True

    def __init__(self, support, weights):
        support = np.asarray(support, dtype=float)
        weights = np.asarray(weights, dtype=float)
        _require(support.ndim == 1 and support.size > 0, "support must be non-empty 1-d")
        _require(support.shape == weights.shape, "support and weights must match")
        _require(np.all(weights >= 0.0), "weights must be non-negative")
        total = weights.sum()
        _require(total > 0.0, "weights must not all be zero")
        order = np.argsort(support, kind="stable")
        self.points = support[order]
        self.weights = weights[order] / total
        self._cum = np.cumsum(self.weights)

    def __repr__(self):
        return f"Discrete({self.points.size} points)"

    def support(self):
        return (float(self.points[0]), float(self.points[-1]))

    def log_density(self, x):
        exact = self.points == x
        if not exact.any():
            close = np.isclose(self.points, x, rtol=1e-12, atol=0.0)
            if not close.any():
                raise ValueError(f"{x} is not a support point")
            exact = close
        mass = float(self.weights[exact].sum())
        return math.log(mass) if mass > 0.0 else -math.inf

    def mean(self):
        return float(self.weights @ self.points)

    def variance(self):
        m = self.mean()
        return float(self.weights @ (self.points - m) ** 2)

    def entropy(self):
        w = self.weights[self.weights > 0.0]
        return float(-(w @ np.log(w)))

    def cdf(self, x):
        idx = np.searchsorted(self.points, x, side="right")
        return float(self._cum[idx - 1]) if idx > 0 else 0.0

    def quantile(self, q):
        _require(0.0 <= q <= 1.0, "quantile level must lie in [0, 1]")
        idx = int(np.searchsorted(self._cum, q, side="left"))
        idx = min(idx, self.points.size - 1)
        return float(self.points[idx])

    def _expect_discrete(self, fn):
        return float(sum(w * fn(x) for x, w in zip(self.points, self.weights)))

    def _draw(self, rng, n):
        idx = rng.choice(self.points.size, size=n, p=self.weights)
        return self.points[idx]


def point_mass(x):
    """Degenerate law concentrated at a single value."""
    return Discrete([x], [1.0])
