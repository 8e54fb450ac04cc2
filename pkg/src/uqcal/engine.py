"""Uncertainty reduction from missing data.

Three quantities drive everything downstream:

- realised reduction: uncertainty of the fitted model minus uncertainty of
  the model refit with the missing data filled in (may be negative, since
  new data can contradict old data);
- expected reduction: the same difference averaged over a predictive model
  for the missing data, by exact enumeration when the missing data live on
  a finite set, or by seeded Monte Carlo otherwise;
- coherence: whether the predictive model and the fitted model are
  marginals of one joint law. When they are, the expected reduction is
  guaranteed non-negative; when they are not, collecting more data can
  increase uncertainty on average.

Replicate evaluations are independent and may run on a thread pool; the
result never depends on the degree of parallelism because every replicate
owns its seed and aggregation happens in replicate order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .distributions import Distribution
from .losses import LossFunction
from .rng import RandomSeed

__all__ = [
    "PosteriorModel",
    "PredictiveModel",
    "EurResult",
    "uncertainty_reduction",
    "eur_exact",
    "eur_monte_carlo",
    "check_coherence",
]

WEIGHT_SUM_TOL = 1e-12
COHERENCE_GRID_SIZE = 512
MIN_COHERENCE_MC_DRAWS = 10_000


@dataclass
class PosteriorModel:
    """A fitted model for a target quantity that can absorb new data.

    `refit` maps a missing-data assignment to the updated distribution for
    the target. Refitting with nothing new (None) returns the current
    posterior unchanged; refit procedures must be reentrant.
    """

    target_label: str
    posterior: Distribution
    refit: Callable[[object], Distribution]

    def refit_with(self, y_miss) -> Distribution:
        if y_miss is None:
            return self.posterior
        return self.refit(y_miss)


@dataclass
class PredictiveModel:
    """Beliefs about the missing data given what was observed.

    `simulate` draws one missing-data assignment from a Generator.
    `enumerate_support`, when available, returns (outcomes, weights) for a
    finite missing-data space and enables exact expectations.
    `declared_coherent` starts unknown and is set by check_coherence (or at
    construction, for predictives coherent by design).
    """

    simulate: Callable[[np.random.Generator], object]
    enumerate_support: Optional[Callable[[], tuple]] = None
    declared_coherent: Optional[bool] = None

    def enumerated(self):
        if self.enumerate_support is None:
            raise ValueError(
                "this predictive has no finite enumeration; use eur_monte_carlo"
            )
        outcomes, weights = self.enumerate_support()
        weights = np.asarray(weights, dtype=float)
        if abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(
                f"enumerated weights sum to {weights.sum()!r}, expected 1"
            )
        return list(outcomes), weights


@dataclass
class EurResult:
    """Expected uncertainty reduction and its Monte Carlo error.

    `eur` always equals total_uncertainty - expected_remaining exactly;
    `mc_standard_error` is zero when computed by exact enumeration.
    """

    total_uncertainty: float
    expected_remaining: float
    eur: float
    mc_standard_error: float
    replicates: int
    per_replicate_remaining: np.ndarray = field(repr=False)


def uncertainty_reduction(ell: LossFunction, model: PosteriorModel, y_miss) -> float:
    """Realised reduction in uncertainty from observing y_miss.

    Negative values are returned as-is: new data that contradict the old
    can genuinely increase uncertainty.
    """
    before = ell.uncertainty(model.posterior)
    try:
        refit = model.refit_with(y_miss)
    except Exception as exc:
        raise RuntimeError(f"refit failed for y_miss={y_miss!r}") from exc
    return before - ell.uncertainty(refit)


def eur_exact(ell: LossFunction, model: PosteriorModel, pred: PredictiveModel) -> EurResult:
    """Expected uncertainty reduction by exact enumeration of the missing data."""
    outcomes, weights = pred.enumerated()
    total = ell.uncertainty(model.posterior)
    remaining = np.array(
        [ell.uncertainty(model.refit_with(y)) for y in outcomes], dtype=float
    )
    expected_remaining = float(weights @ remaining)
    return EurResult(
        total_uncertainty=total,
        expected_remaining=expected_remaining,
        eur=total - expected_remaining,
        mc_standard_error=0.0,
        replicates=len(outcomes),
        per_replicate_remaining=remaining,
    )


def eur_monte_carlo(
    ell: LossFunction,
    model: PosteriorModel,
    pred: PredictiveModel,
    replicates: int,
    seed: RandomSeed,
    threads: int = 1,
) -> EurResult:
    """Expected uncertainty reduction by seeded Monte Carlo.

    Replicate i draws missing data with seed (seed.stream_id, i), so runs
    are reproducible and replicates are independent streams. Requires at
    least two replicates to report a standard error.
    """
    if replicates < 2:
        raise ValueError("eur_monte_carlo requires replicates >= 2")
    if isinstance(seed, (int, np.integer)):
        seed = RandomSeed(int(seed))

    def one(i: int) -> float:
        rep_seed = seed.replicate(i)
        try:
            y = pred.simulate(rep_seed.generator())
            return ell.uncertainty(model.refit_with(y))
        except Exception as exc:
            raise RuntimeError(f"replicate with seed {rep_seed} failed") from exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            remaining = np.fromiter(
                pool.map(one, range(replicates)), dtype=float, count=replicates
            )
    else:
        remaining = np.fromiter(
            (one(i) for i in range(replicates)), dtype=float, count=replicates
        )

    total = ell.uncertainty(model.posterior)
    expected_remaining = float(remaining.mean())
    se = float(remaining.std(ddof=1) / math.sqrt(replicates))
    return EurResult(
        total_uncertainty=total,
        expected_remaining=expected_remaining,
        eur=total - expected_remaining,
        mc_standard_error=se,
        replicates=replicates,
        per_replicate_remaining=remaining,
    )


def _default_z_grid(posterior: Distribution, size: int = COHERENCE_GRID_SIZE):
    """Equi-quantile grid, concentrating points where the mass lies."""
    qs = (np.arange(size) + 0.5) / size
    return np.array([posterior.quantile(q) for q in qs])


def check_coherence(
    model: PosteriorModel,
    pred: PredictiveModel,
    z_grid=None,
    tol: float = 1e-8,
    mc_draws: Optional[int] = None,
    seed: Optional[RandomSeed] = None,
):
    """Test whether the predictive is coherent with the fitted model.

    Coherence means the mixture of refit posteriors, averaged over the
    predictive, reproduces the current posterior. The check evaluates that
    mixture pointwise on z_grid (default: 512 equi-quantile points of the
    current posterior) and compares against the current density/mass.

    Returns (coherent, max_deviation) and records the verdict on
    pred.declared_coherent. Without a finite enumeration, a Monte Carlo
    mixture with at least 10^4 draws is used; pass a wider tol then.
    """
    if z_grid is None:
        z_grid = _default_z_grid(model.posterior)
    z_grid = np.asarray(z_grid, dtype=float)
    if z_grid.size == 0:
        raise ValueError("z_grid must not be empty")

    if pred.enumerate_support is not None:
        outcomes, weights = pred.enumerated()
    else:
        draws = MIN_COHERENCE_MC_DRAWS if mc_draws is None else int(mc_draws)
        if draws < MIN_COHERENCE_MC_DRAWS:
            raise ValueError(
                f"Monte Carlo coherence check needs >= {MIN_COHERENCE_MC_DRAWS} draws"
            )
        if seed is None:
            raise ValueError("Monte Carlo coherence check needs a seed")
        rng = seed.generator()
        sampled = [pred.simulate(rng) for _ in range(draws)]
        try:
            # collapse repeated draws so each distinct refit runs once
            counts = {}
            for y in sampled:
                counts[y] = counts.get(y, 0) + 1
            outcomes = list(counts)
            weights = np.array([counts[y] / draws for y in outcomes])
        except TypeError:
            outcomes = sampled
            weights = np.full(draws, 1.0 / draws)

    mixture = np.zeros_like(z_grid)
    for y, w in zip(outcomes, weights):
        if w == 0.0:
            continue
        refit = model.refit_with(y)
        mixture += w * np.array([refit.density(z) for z in z_grid])

    current = np.array([model.posterior.density(z) for z in z_grid])
    max_deviation = float(np.max(np.abs(mixture - current)))
    coherent = max_deviation <= tol
    pred.declared_coherent = coherent
    return coherent, max_deviation
