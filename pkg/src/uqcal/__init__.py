"""Decision-theoretic uncertainty quantification for epidemiological models.

Uncertainty is the expected loss of the best estimate available from the
fitted model; collecting missing data reduces it, and the expected
reduction can be computed exactly or by seeded Monte Carlo. The package
bundles the core machinery with three worked model suites (prevalence,
reproduction-number estimation, synthetic wastewater surveillance) and
bridges to value-of-information quantities.
"""

from .distributions import (
    Beta,
    BetaBinomial,
    Binomial,
    Discrete,
    Distribution,
    Gamma,
    Hypergeometric,
    LogNormal,
    NegativeBinomial,
    Normal,
    Poisson,
    point_mass,
)
from .engine import (
    EurResult,
    PosteriorModel,
    PredictiveModel,
    check_coherence,
    eur_exact,
    eur_monte_carlo,
    uncertainty_reduction,
)
from .errors import ConfigError, DataFormatError, DegeneracyError, UqcalError
from .losses import (
    AsymmetricLinearLoss,
    BayesAct,
    LogLoss,
    LossFunction,
    PinballLoss,
    QuadraticLoss,
    empirical_loss,
    expected_loss,
)
from .prevalence import (
    BinomialPrevalenceModel,
    HypergeometricPrevalenceModel,
    PrevalenceData,
)
from .renewal import (
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
from .rng import RandomSeed
from .surveillance import (
    JointModelConfig,
    SurveillanceDesign,
    WastewaterSeries,
    daily_ur_wastewater,
    eur_full_population,
    fit_joint,
    simulate_joint,
)
from .voi import VoiReport, eig, evpi, evsi, fisher_information_renewal

__version__ = "0.1.0"
