"""Type 2 Tobit sample-selection models with Bayesian additive regression trees."""

from .selection_model import (Dataset, DingPrior, LinearMean, OmoriPrior, PosteriorDraws,
                              TreesMean, VHPrior, run_chain)
from .dpm_errors import DpmConfig
from .bart_core import BartConfig, fit_bart, fit_probit_bart

__all__ = [
    "BartConfig", "Dataset", "DingPrior", "DpmConfig", "LinearMean", "OmoriPrior",
    "PosteriorDraws", "TreesMean", "VHPrior", "fit_bart", "fit_probit_bart", "run_chain",
]
