"""Adaptive wavelet hard-thresholding for additive regression with long-memory errors."""

__version__ = "0.1.0"

from .errors import ConfigError, DataError, EstimationError
from .wavelet import WaveletBasis, build_basis, eval_phi, eval_psi, gram_matrix, quadrature_coefficient
from .longmem import (
    LongMemorySpec,
    arfima_autocovariance,
    exact_partial_sum_variance,
    generate_noise,
    partial_sum_variance_slope,
)
from .estimator import (
    AdditiveFit,
    CoefficientSet,
    Dataset,
    DesignDensity,
    ThresholdRegime,
    compute_threshold,
    estimate_intercept,
    estimate_scaling_coeff,
    estimate_wavelet_coeff,
    fit_additive,
    fit_bivariate,
    predict,
    select_max_level,
    sigma_psi_integral_is_zero,
)
from .simulate import (
    MiseReport,
    SimulationConfig,
    TestFunctionSuite,
    calibrate_sigma_scale,
    export_surface,
    generate_design,
    run_grid,
    run_replicate,
)
