"""Loss functions, Bayes-optimal estimates, and loss-induced uncertainty.

Uncertainty is defined as the expected loss of the best available estimate
under the fitted distribution. Quadratic loss makes that the variance, log
loss makes it the entropy; the piecewise-linear losses evaluate it by
quadrature or summation. Everything here is a pure function of immutable
inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .distributions import Distribution

__all__ = [
    "LossFunction",
    "QuadraticLoss",
    "LogLoss",
    "PinballLoss",
    "AsymmetricLinearLoss",
    "BayesAct",
    "expected_loss",
    "empirical_loss",
    "golden_section_minimize",
    "bayes_act_numeric",
]

POINT = "point"
PROBABILISTIC = "probabilistic"


@dataclass(frozen=True)
class BayesAct:
    """An optimal estimate and the expected loss it incurs."""

    action: object
    expected_loss: float


class LossFunction:
    """Base class: maps an (action, outcome) pair to a real-valued penalty."""

    action_space = POINT

    def loss(self, action, outcome):
        raise NotImplementedError

    def bayes_act(self, p: Distribution) -> BayesAct:
        """Action minimising expected loss under p, with that loss attached."""
        raise NotImplementedError

    def uncertainty(self, p: Distribution) -> float:
        """Minimised expected loss under p."""
        return self.bayes_act(p).expected_loss


class QuadraticLoss(LossFunction):
    """Squared error. The optimal point estimate is the mean and the
    induced uncertainty is the variance."""

    def loss(self, action, outcome):
        return (action - outcome) ** 2

    def bayes_act(self, p):
        m = p.mean()
        return BayesAct(action=m, expected_loss=p.variance())

    def uncertainty(self, p):
        return p.variance()

    def __repr__(self):
        return "QuadraticLoss()"


class LogLoss(LossFunction):
    """Negative log score for probabilistic estimates.

    The action is itself a distribution; the optimal one is the fitted
    distribution, making the induced uncertainty its entropy. For
    continuous outcomes this is differential entropy and may be negative
    (densities can exceed 1). Zero predicted density gives +inf loss.
    """

    action_space = PROBABILISTIC

    def loss(self, action, outcome):
        if not isinstance(action, Distribution):
            raise ValueError("log loss expects a Distribution as the action")
        lp = action.log_density(outcome)
        return math.inf if lp == -math.inf else -lp

    def bayes_act(self, p):
        return BayesAct(action=p, expected_loss=p.entropy())

    def uncertainty(self, p):
        return p.entropy()

    def __repr__(self):
        return "LogLoss()"


class PinballLoss(LossFunction):
    """Quantile loss at a given level; the optimal estimate is that quantile."""

    def __init__(self, level):
        if not 0.0 < level < 1.0:
            raise ValueError("pinball level must lie strictly inside (0, 1)")
        self.level = float(level)

    def loss(self, action, outcome):
        diff = outcome - action
        if diff >= 0.0:
            return self.level * diff
        return (1.0 - self.level) * (-diff)

    def bayes_act(self, p):
        act = p.quantile(self.level)
        return BayesAct(action=act, expected_loss=expected_loss(self, act, p))

    def __repr__(self):
        return f"PinballLoss({self.level:g})"


class AsymmetricLinearLoss(LossFunction):
    """Linear loss with different prices for under- and overestimation.

    Underestimating by d costs under_cost * d, overestimating costs
    over_cost * d; the optimal estimate is the quantile at
    under_cost / (under_cost + over_cost).
    """

    def __init__(self, under_cost, over_cost):
        if under_cost <= 0 or over_cost <= 0:
            raise ValueError("both costs must be positive")
        self.under_cost = float(under_cost)
        self.over_cost = float(over_cost)

    def loss(self, action, outcome):
        diff = outcome - action
        if diff >= 0.0:
            return self.under_cost * diff
        return self.over_cost * (-diff)

    def bayes_act(self, p):
        level = self.under_cost / (self.under_cost + self.over_cost)
        act = p.quantile(level)
        return BayesAct(action=act, expected_loss=expected_loss(self, act, p))

    def __repr__(self):
        return f"AsymmetricLinearLoss({self.under_cost:g}, {self.over_cost:g})"


def expected_loss(loss_fn, action, p, kink_points=None):
    """E_p[loss(action, Z)] by summation or quadrature.

    Point losses with a kink at the action (pinball, asymmetric linear)
    get the integration domain split there automatically.
    """
    if loss_fn.action_space == PROBABILISTIC:
        return p.expect(lambda z: loss_fn.loss(action, z))
    points = kink_points if kink_points is not None else (action,)
    return p.expect(lambda z: loss_fn.loss(action, z), points=points)


def empirical_loss(loss_fn, pairs):
    """Score realised (estimate, outcome) pairs.

    Returns (mean loss, per-pair losses). This is the operational estimate
    of uncertainty for forecasts, where outcomes are eventually observed.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("empirical_loss needs at least one (action, outcome) pair")
    per_pair = [float(loss_fn.loss(a, z)) for a, z in pairs]
    return sum(per_pair) / len(per_pair), per_pair


_INV_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_minimize(fn, lo, hi, tol=1e-8):
    """Golden-section search for the minimum of a unimodal fn on [lo, hi].

    Returns the argmin to within tol. Used as a generic optimiser when an
    optimal estimate has no closed form.
    """
    a, b = float(lo), float(hi)
    c = b - _INV_GOLDEN * (b - a)
    d = a + _INV_GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INV_GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_GOLDEN * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def bayes_act_numeric(loss_fn, p, bracket=None, tol=1e-8):
    """Bayes act for a point loss found by golden-section search.

    A fallback for losses without a closed-form minimiser; the bracket
    defaults to the extreme quantiles of p widened by one bracket width.
    """
    if loss_fn.action_space != POINT:
        raise ValueError("numeric search only applies to point action spaces")
    if bracket is None:
        lo, hi = p.quantile(1e-9), p.quantile(1.0 - 1e-9)
        pad = max(hi - lo, 1e-6)
        bracket = (lo - pad, hi + pad)
    act = golden_section_minimize(
        lambda a: expected_loss(loss_fn, a, p, kink_points=(a,)), *bracket, tol=tol
    )
    return BayesAct(action=act, expected_loss=expected_loss(loss_fn, act, p))
