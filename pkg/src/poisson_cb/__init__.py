"""Test-error estimation for the Poisson means problem.

Coupled-bootstrap (CB) and Hudson-lemma unbiased (UE) estimators of test
error under squared loss and Poisson deviance, with exact and Monte Carlo
oracles, a collection of mean estimators and an experiment CLI.
"""

from .estimators import (
    ErrorEstimate,
    cb_estimate,
    cb_from_draws,
    cb_infinite_exact,
    choose_p,
    illdef_probability,
    ue_estimate,
    ue_sampled,
)
from .losses import DEVIANCE, SQUARED, LossSpec, deviance_loss, pad_fit, phi_and_grad, squared_loss
from .thinning import beta_split_exponential, binomial_thin, draw_coupled_bootstrap

__version__ = "0.1.0"

__all__ = [
    "DEVIANCE", "SQUARED", "ErrorEstimate", "LossSpec", "beta_split_exponential",
    "binomial_thin", "cb_estimate", "cb_from_draws", "cb_infinite_exact", "choose_p",
    "deviance_loss", "draw_coupled_bootstrap", "illdef_probability", "pad_fit",
    "phi_and_grad", "squared_loss", "ue_estimate", "ue_sampled",
]
