"""Robust semiparametric estimation of location and scale with missing outcomes."""

from .estimators import (
    AuxiliaryFits,
    LocationScaleEstimate,
    LocationScaleEstimator,
    estimate_aipw_classical,
    estimate_ipw_classical,
    estimate_or_classical,
    estimate_raipw,
    estimate_ripw,
    estimate_ror,
)
from .linreg import OutcomeModel, RobustLinearRegression, fit_outcome_model
from .logit import PropensityModel, RobustLogisticRegression, fit_logistic
from .psi import PsiFunction, huber, identity, tukey
from .sandwich import sandwich_covariance, standard_errors
from .simulation import ScenarioConfig, generate_replicate, true_beta

__all__ = [
    "AuxiliaryFits", "LocationScaleEstimate", "LocationScaleEstimator", "estimate_aipw_classical",
    "estimate_ipw_classical", "estimate_or_classical", "estimate_raipw", "estimate_ripw",
    "estimate_ror", "OutcomeModel", "RobustLinearRegression", "fit_outcome_model",
    "PropensityModel", "RobustLogisticRegression", "fit_logistic", "PsiFunction", "huber",
    "identity", "tukey", "sandwich_covariance", "standard_errors", "ScenarioConfig",
    "generate_replicate", "true_beta",
]

__version__ = "0.1.0"
