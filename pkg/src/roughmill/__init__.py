"""Rough-path slow-fast systems on a spectral Hilbert scale, with averaging experiments."""
from .errors import *  # noqa: F401,F403
from .hilbert_scale import SpectralOperator, norm_gamma, semigroup_apply
from .rough_path import GridRoughPath, chen_extend, max_chen_residual
from .drivers import sample_ito_brownian_lift, canonical_smooth_lift, build_mixed_lift
from .controlled import ControlledPath, controlled_norm
from .convolution import rough_convolve, rough_convolution_path
from .models import ModelSpec, default_model, null_coupling_model, ou_fast_model, zero_model
from .slowfast import SolverConfig, solve_coupled, solve_auxiliary, increment_experiment
from .averaging import estimate_fbar, ergodicity_decay, solve_averaged, averaging_error_sweep

__version__ = "0.1.0"
