"""Kernel interpolation with spectrum-based error bounds.

Subpackages are plain modules; the most used names are re-exported here.
"""

__version__ = "0.1.0"

from .errors import DimensionMismatchError, KslError, NumericalError, ParseError, ValidationError
from .kernels import Kernel, cross_gram, eval_kernel, gaussian_from_gamma, gram, kernel_from_config
from .linalg import eigen_sym, jacobi_eigh, solve_spd
from .sampling import SampleSet, sample_uniform, separation_radius, fill_distance_estimate
from .spectrum import spectral_profile, effective_dimension_empirical, a_d_lambda
from .interpolation import LabeledSet, KernelModel, fit, predict, rmse, holdout_select
from .bounds import BoundConfig, ae_noise_free, ae_noisy, ae_trans_native

__all__ = [
    "__version__",
    "KslError", "ValidationError", "DimensionMismatchError", "ParseError", "NumericalError",
    "Kernel", "gram", "cross_gram", "eval_kernel", "gaussian_from_gamma", "kernel_from_config",
    "eigen_sym", "jacobi_eigh", "solve_spd",
    "SampleSet", "sample_uniform", "separation_radius", "fill_distance_estimate",
    "spectral_profile", "effective_dimension_empirical", "a_d_lambda",
    "LabeledSet", "KernelModel", "fit", "predict", "rmse", "holdout_select",
    "BoundConfig", "ae_noise_free", "ae_noisy", "ae_trans_native",
]
