"""Mean-estimation algorithms ``g`` whose test error is estimated."""

from .base import Constant, CountingAlgorithm, FitAlgorithm, FunctionAlgorithm, Identity, as_algorithm
from .glm import LassoPoissonCV, PoissonGLM, lasso_poisson_cv, poisson_irls
from .pspline import PSplineCounts, SplineBasisSpec, bin_samples, lindsey_pspline
from .shrinkage import EBOneStep, LinearShrinkage, Threshold, eb_one_step, linear_shrinkage, threshold
from .tree import PoissonTree, cart_poisson
from .tv import TVDenoiser, phantom, tv_denoise

__all__ = [
    "Constant", "CountingAlgorithm", "EBOneStep", "FitAlgorithm", "FunctionAlgorithm",
    "Identity", "LassoPoissonCV", "LinearShrinkage", "PSplineCounts", "PoissonGLM",
    "PoissonTree", "SplineBasisSpec", "TVDenoiser", "Threshold", "as_algorithm",
    "bin_samples", "cart_poisson", "eb_one_step", "lasso_poisson_cv", "linear_shrinkage",
    "lindsey_pspline", "phantom", "poisson_irls", "threshold", "tv_denoise",
]
