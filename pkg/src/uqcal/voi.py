"""Value-of-information quantities expressed through the core engine.

The expected value of sample information is the expected uncertainty
reduction itself, so it delegates to the engine and asserts the identity.
The expected information gain is the log-loss special case. The expected
value of perfect information compares against knowing the target exactly,
which drives every point loss considered here to zero, leaving the
current uncertainty. Fisher information enters through the Poisson
renewal likelihood, where its inverse approximates the flat-prior
posterior variance once counts are large.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .engine import PosteriorModel, PredictiveModel, EurResult, eur_exact, eur_monte_carlo
from .losses import LogLoss, LossFunction, PROBABILISTIC
from .rng import RandomSeed

__all__ = [
    "VoiReport",
    "evsi",
    "evpi",
    "eig",
    "fisher_information_renewal",
]


@dataclass(frozen=True)
class VoiReport:
    """Bundle of value-of-information summaries under one loss."""

    evsi: float
    evpi: float
    eig: Optional[float] = None
    fisher: Optional[float] = None
    loss_kind: str = ""


def evsi(
    ell: LossFunction,
    model: PosteriorModel,
    pred: PredictiveModel,
    replicates: Optional[int] = None,
    seed: Optional[RandomSeed] = None,
    threads: int = 1,
) -> EurResult:
    """Expected value of sample information for the data described by pred.

    Identical to the expected uncertainty reduction; computed by exact
    enumeration when available, otherwise by Monte Carlo (pass replicates
    and seed). An incoherent predictive can make this negative; the value
    is returned as-is.
    """
    if pred.enumerate_support is not None:
        result = eur_exact(ell, model, pred)
    else:
        if replicates is None or seed is None:
            raise ValueError("Monte Carlo EVSI needs replicates and a seed")
        result = eur_monte_carlo(ell, model, pred, replicates, seed, threads=threads)
    # the identity is definitional; guard against drift between code paths
    assert result.eur == result.total_uncertainty - result.expected_remaining
    return result


def evpi(ell: LossFunction, model: PosteriorModel) -> float:
    """Expected value of perfect information about the target.

    If the target were known exactly, a point estimate could match it and
    the losses used here would drop to zero, so the value of perfect
    information is the current uncertainty itself (the posterior variance
    under quadratic loss).
    """
    if ell.action_space == PROBABILISTIC:
        raise ValueError(
            "perfect information drives a probabilistic score to a point "
            "mass with unbounded log density; use a point loss"
        )
    return ell.uncertainty(model.posterior)


def eig(model: PosteriorModel, pred: PredictiveModel) -> float:
    """Expected information gain: entropy now minus expected entropy after.

    This is the log-loss expected uncertainty reduction; both follow the
    same enumeration, so the values agree exactly.
    """
    outcomes, weights = pred.enumerated()
    log_loss = LogLoss()
    total = log_loss.uncertainty(model.posterior)
    per_outcome = np.array(
        [log_loss.uncertainty(model.refit_with(y)) for y in outcomes], dtype=float
    )
    return total - float(weights @ per_outcome)


def fisher_information_renewal(r: float, lambda_sum: float) -> float:
    """Fisher information about the reproduction number in the Poisson
    renewal likelihood over a window with total infectiousness lambda_sum.

    Expected counts are r times lambda_sum and the information is
    lambda_sum / r, so its inverse tracks the flat-prior posterior
    variance once window counts are large.
    """
    if r <= 0:
        raise ValueError("reproduction number must be positive")
    if lambda_sum < 0:
        raise ValueError("total infectiousness must be >= 0")
    return lambda_sum / r
